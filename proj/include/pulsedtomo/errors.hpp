#pragma once

#include <stdexcept>
#include <string>

namespace pulsedtomo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// |H'| > 0.5 has no preimage under the transduction function.
class NoRealSolution : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class StatisticsError : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& what, std::string diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Not enough accepted trains after oversampling up to the hard cap.
class Shortfall : public Error {
public:
    using Error::Error;
};

/// An output file does not match its documented schema.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace pulsedtomo
