#pragma once

// CSV / JSON report rows shared by every CLI subcommand.

#include "devbound/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace devbound {

struct ReportRow {
    std::string experiment;
    std::string sequence;
    std::int64_t n = 0;
    std::string quantity;
    double value = 0.0;
    std::optional<std::string> regime;
    std::optional<double> argmax_log_index;
    std::optional<double> std_error;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

enum class ReportFormat { csv, json };

inline ReportFormat parse_format(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ValidationError("format must be csv or json (got '" + s + "')");
}

inline constexpr const char* kCsvHeader =
    "experiment,sequence,n,quantity,value,regime,argmax_log_index,std_error,ci_lo,ci_hi";

namespace detail {

/// 17 significant digits; non-finite values as inf, -inf, nan.
inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string json_number(double v) {
    if (!std::isfinite(v)) return "\"" + fmt17(v) + "\"";
    return fmt17(v);
}

inline std::string json_opt(const std::optional<double>& v) { return v ? json_number(*v) : "null"; }

inline double json_to_double(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
        throw ValidationError("report: unexpected string number '" + s + "'");
    }
    return j.get<double>();
}

inline std::optional<double> json_opt_double(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return json_to_double(obj.at(key));
}

} // namespace detail

inline std::string render(const std::vector<ReportRow>& rows, ReportFormat format) {
    if (rows.empty()) throw ValidationError("report: no rows to emit");
    using namespace detail;
    std::string out;
    if (format == ReportFormat::csv) {
        out += kCsvHeader;
        out += '\n';
        auto opt = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); };
        for (const auto& r : rows) {
            out += csv_cell(r.experiment) + ',' + csv_cell(r.sequence) + ',' + std::to_string(r.n) + ',' +
                   csv_cell(r.quantity) + ',' + fmt17(r.value) + ',' + (r.regime ? csv_cell(*r.regime) : "") + ',' +
                   opt(r.argmax_log_index) + ',' + opt(r.std_error) + ',' + opt(r.ci_lo) + ',' + opt(r.ci_hi) + '\n';
        }
        return out;
    }
    out += "[\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out += "  {\"experiment\": " + json_string(r.experiment) + ", \"sequence\": " + json_string(r.sequence) +
               ", \"n\": " + std::to_string(r.n) + ", \"quantity\": " + json_string(r.quantity) +
               ", \"value\": " + json_number(r.value) +
               ", \"regime\": " + (r.regime ? json_string(*r.regime) : std::string("null")) +
               ", \"argmax_log_index\": " + json_opt(r.argmax_log_index) +
               ", \"std_error\": " + json_opt(r.std_error) + ", \"ci_lo\": " + json_opt(r.ci_lo) +
               ", \"ci_hi\": " + json_opt(r.ci_hi) + "}";
        out += i + 1 < rows.size() ? ",\n" : "\n";
    }
    out += "]\n";
    return out;
}

/// Parse the JSON form produced by render().
inline std::vector<ReportRow> parse_json_rows(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw ValidationError("report: JSON document must be an array");
    std::vector<ReportRow> rows;
    for (const auto& o : doc) {
        ReportRow r;
        r.experiment = o.at("experiment").get<std::string>();
        r.sequence = o.at("sequence").get<std::string>();
        r.n = o.at("n").get<std::int64_t>();
        r.quantity = o.at("quantity").get<std::string>();
        r.value = detail::json_to_double(o.at("value"));
        if (o.contains("regime") && !o.at("regime").is_null()) r.regime = o.at("regime").get<std::string>();
        r.argmax_log_index = detail::json_opt_double(o, "argmax_log_index");
        r.std_error = detail::json_opt_double(o, "std_error");
        r.ci_lo = detail::json_opt_double(o, "ci_lo");
        r.ci_hi = detail::json_opt_double(o, "ci_hi");
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Write rows to `path`, or to `os` when the path is empty or "-".
inline void emit(const std::vector<ReportRow>& rows, ReportFormat format, const std::string& path,
                 std::ostream& os = std::cout) {
    const std::string text = render(rows, format);
    if (path.empty() || path == "-") {
        os << text;
        os.flush();
        if (!os) throw ResourceError("report: failed to write to output stream");
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ResourceError("report: cannot open '" + path + "' for writing");
    f << text;
    f.close();
    if (!f) throw ResourceError("report: failed writing '" + path + "'");
}

} // namespace devbound
