#include "pulsedtomo/formats.hpp"

#include "pulsedtomo/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

namespace pulsedtomo {

namespace {

constexpr auto R = ColumnType::Real;
constexpr auto I = ColumnType::Integer;

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parses_real(const std::string& s) {
    if (s.empty()) return false;
    // nan is legal: a failed fit leaves its column as nan
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parses_integer(const std::string& s) {
    if (s.empty()) return false;
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool glob_match(std::string_view pattern, std::string_view name) {
    const auto star = pattern.find('*');
    if (star == std::string_view::npos) return pattern == name;
    const auto head = pattern.substr(0, star);
    const auto tail = pattern.substr(star + 1);
    return name.size() >= head.size() + tail.size() && name.substr(0, head.size()) == head &&
           name.substr(name.size() - tail.size()) == tail;
}

} // namespace

const std::vector<CsvSchema>& csv_schemas() {
    static const std::vector<CsvSchema> schemas = {
        {"thermal-histogram", "thermal_histogram.csv", {{"bin_center", R}, {"density", R}, {"model_density", R}}, {}},
        {"pulses",
         "tomo_pulses.csv",
         {{"train_id", I}, {"pulse_index", I}, {"t", R}, {"theta", R}, {"h_norm", R}},
         {}},
        {"conditional",
         "tomo_conditional.csv",
         {{"train_id", I}, {"theta", R}, {"s_cond_xzpf", R}, {"X_hat", R}, {"Y_hat", R}, {"accepted", ColumnType::Flag}},
         {}},
        {"analytics",
         "tomo_analytics.csv",
         {{"theta", R}, {"mc_width", R}, {"analytic_width", R}, {"second_mode_width", R}, {"noise_floor", R}},
         {}},
        {"widths",
         "tomo_widths.csv",
         {{"theta", R},
          {"kind", ColumnType::Text},
          {"n", I},
          {"gaussian_sd", R},
          {"gaussian_sd_se", R},
          {"sample_sd", R},
          {"bootstrap_se", R}},
         {"none", "post-selected", "one-pulse", "two-pulse"}},
        {"marginal", "marginal_*.csv", {{"s_xzpf", R}, {"density", R}}, {}},
        {"density", "density_*.csv", {{"x", R}, {"p", R}, {"value", R}}, {}},
        {"decoherence",
         "decoherence.csv",
         {{"n", I},
          {"theta", R},
          {"t_us", R},
          {"n_trains", I},
          {"n_accepted", I},
          {"mc_width", R},
          {"mc_width_se", R},
          {"second_tomo_width", R},
          {"envelope", R},
          {"analytic_width", R},
          {"analytic_width_gamma0", R},
          {"fit_width", R}},
         {}},
        {"sweep",
         "sweep.csv",
         {{"threshold", R},
          {"theta", R},
          {"n_trains", I},
          {"n_accepted", I},
          {"retention", R},
          {"pair_retention", R},
          {"pair_contamination", R},
          {"analytic_retention", R},
          {"analytic_wrong_fraction", R},
          {"two_pulse_width", R}},
         {}},
    };
    return schemas;
}

const CsvSchema& schema_for_file(std::string_view filename) {
    for (const auto& s : csv_schemas())
        if (glob_match(s.pattern, filename)) return s;
    throw FormatError("no documented schema for " + std::string(filename));
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::value(std::size_t row, std::string_view name) const {
    return std::stod(rows.at(row).at(column(name)));
}

CsvTable read_csv(std::istream& is, const CsvSchema& schema) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line) || line.empty()) throw FormatError(schema.name + ": empty file, no header");
    t.header = split(line);
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const std::string& want = schema.columns[c].name;
        if (c >= t.header.size()) throw FormatError(schema.name + ": missing column '" + want + "'");
        if (t.header[c] != want)
            throw FormatError(schema.name + ": column " + std::to_string(c + 1) + " is '" + t.header[c] +
                              "', expected '" + want + "'");
    }
    if (t.header.size() > schema.columns.size())
        throw FormatError(schema.name + ": unexpected column '" + t.header[schema.columns.size()] + "'");

    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != schema.columns.size())
            throw FormatError(schema.name + ": line " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(schema.columns.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const Column& col = schema.columns[c];
            const std::string& v = cells[c];
            bool ok = true;
            switch (col.type) {
            case ColumnType::Real: ok = parses_real(v); break;
            case ColumnType::Integer: ok = parses_integer(v); break;
            case ColumnType::Flag: ok = v == "0" || v == "1"; break;
            case ColumnType::Text:
                ok = !v.empty() && (schema.allowed_text.empty() ||
                                    std::find(schema.allowed_text.begin(), schema.allowed_text.end(), v) !=
                                        schema.allowed_text.end());
                break;
            }
            if (!ok)
                throw FormatError(schema.name + ": bad value '" + v + "' in column '" + col.name + "' at line " +
                                  std::to_string(lineno));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.rows.empty()) throw FormatError(schema.name + ": no data rows");
    return t;
}

void validate_sidecar(const nlohmann::json& sidecar) {
    for (const char* key : {"schema_version", "config_hash", "seed", "version", "derived", "file"})
        if (!sidecar.contains(key)) throw FormatError(std::string("sidecar lacks '") + key + "'");
    for (const char* key : {"beta", "chi", "sigma_th", "sigma_m"})
        if (!sidecar["derived"].contains(key)) throw FormatError(std::string("sidecar lacks 'derived.") + key + "'");
}

} // namespace pulsedtomo
