#pragma once

#include <cstdint>
#include <random>

namespace pulsedtomo {

/// Counter-addressed random stream: the pair (seed, stream_id) fully determines
/// the sample sequence, so trains can be simulated in any order or in parallel.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    double normal() { return normal_(engine_); }
    double normal(double sd) { return sd * normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// Packs (block, index) into a stream id; block selects e.g. the tomography angle.
constexpr std::uint64_t stream_id(std::uint64_t block, std::uint64_t index) {
    return (block << 40) ^ index;
}

} // namespace pulsedtomo
