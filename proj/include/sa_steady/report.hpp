#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sa_steady/config.hpp"
#include "sa_steady/engine.hpp"
#include "sa_steady/error.hpp"
#include "sa_steady/experiments.hpp"

namespace sa_steady {

inline constexpr int kCsvSchemaVersion = 1;

/// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

/// CSV text of a table, CRLF line endings as RFC 4180 specifies.
inline std::string csv_text(const Table& t) {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_field(cells[i]);
        }
        out += "\r\n";
    };
    line(t.columns);
    for (const auto& r : t.rows) line(r);
    return out;
}

namespace detail {
inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("report: cannot write " + p.string());
    out << text;
    if (!out) throw Error("report: write failed for " + p.string());
}
}  // namespace detail

/// Files written by emit_report, in a fixed order.
struct ReportFiles {
    std::vector<std::filesystem::path> paths;
};

/// Writes results.csv, plot.csv, certificates.json and config-echo.json into
/// `dir` (plus sample_<i>.csv and sidecars when samples are given). Output
/// depends only on the inputs, so reruns are byte-identical.
inline ReportFiles emit_report(const StudyResult& r, const json& config_echo, const std::string& dir,
                               const std::vector<SteadySample>* samples = nullptr) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("report: cannot create output directory '" + dir + "'");
    ReportFiles f;
    const fs::path base(dir);

    detail::write_file(base / "results.csv", csv_text(r.table));
    f.paths.push_back(base / "results.csv");

    Table plot{{"study", "curve", "x", "y"}, {}};
    for (const auto& row : r.plot.rows) plot.add({r.study, row[0], row[1], row[2]});
    detail::write_file(base / "plot.csv", csv_text(plot));
    f.paths.push_back(base / "plot.csv");

    json certs = to_json(r);
    certs["csv_schema_version"] = kCsvSchemaVersion;
    if (r.fit) certs["fit"] = to_json(*r.fit);
    detail::write_file(base / "certificates.json", certs.dump(2) + "\n");
    f.paths.push_back(base / "certificates.json");

    detail::write_file(base / "config-echo.json", config_echo.dump(2) + "\n");
    f.paths.push_back(base / "config-echo.json");

    if (samples) {
        for (std::size_t i = 0; i < samples->size(); ++i) {
            const std::string stem = "sample_" + std::to_string(i);
            write_sample((*samples)[i], (base / (stem + ".csv")).string(), (base / (stem + ".json")).string());
            f.paths.push_back(base / (stem + ".csv"));
            f.paths.push_back(base / (stem + ".json"));
        }
    }
    return f;
}

inline ReportFiles emit_report(const StudyResult& r, const RunConfig& c, const std::vector<SteadySample>* samples = nullptr) {
    return emit_report(r, to_json(c), c.output_dir, samples);
}

}  // namespace sa_steady
