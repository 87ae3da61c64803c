#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace pulsedtomo {

enum class ColumnType { Real, Integer, Flag, Text };

struct Column {
    std::string name;
    ColumnType type = ColumnType::Real;
};

/// Column contract of one CSV product; `pattern` is the file name, with `*`
/// standing for a variable part (marginal_<kind>_<index>.csv).
struct CsvSchema {
    std::string name;
    std::string pattern;
    std::vector<Column> columns;
    std::vector<std::string> allowed_text;  ///< for Text columns, empty = any non-empty string
};

const std::vector<CsvSchema>& csv_schemas();

/// Throws FormatError when no schema matches the file name.
const CsvSchema& schema_for_file(std::string_view filename);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
    double value(std::size_t row, std::string_view name) const;
};

/// Parses and checks header and cell types. Errors name the offending column and
/// line; a file without data rows is an error.
CsvTable read_csv(std::istream& is, const CsvSchema& schema);

/// Fields every CSV sidecar carries.
void validate_sidecar(const nlohmann::json& sidecar);

} // namespace pulsedtomo
