#pragma once

// Report rows and serialization. CSV headers are bit-exact; every float is
// written with 17 significant digits so parsing a report back recovers the
// exact doubles. Wall-clock runtime is deliberately never serialized: rerun
// reports must be byte-identical.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plmc/errors.hpp"
#include "plmc/metrics.hpp"

namespace plmc {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ReportRow {
    std::string scheme;
    std::string model;
    std::optional<double> alpha;
    std::optional<double> beta;
    int d = 0;
    double h = 0.0;
    std::string phi;
    double estimate = 0.0;
    double reference = 0.0;
    double abs_error = 0.0;
    double std_error = 0.0;
};

struct OrderRow {
    std::string phi;
    double slope = 0.0;
    double residual_rms = 0.0;
};

struct HistRow {
    std::string scheme;
    double bin_center = 0.0;
    double density = 0.0;
};

struct CheckRow {
    std::string id;
    std::int64_t samples = 0;
    std::int64_t violations = 0;
    double worst_margin = 0.0;
    bool pass = true;
};

struct ExperimentReport {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;  // ordered key/value pairs
    std::vector<ReportRow> rows;
    std::vector<OrderRow> orders;
    std::vector<HistRow> hist;
    std::vector<CheckRow> checks;
    bool any_cell_failed = false;   // a (d,h) cell was dropped for divergence
    bool any_check_failed = false;
    double runtime_seconds = 0.0;   // informational only; never serialized

    void add_meta(const std::string& k, const std::string& v) { meta.emplace_back(k, v); }
};

inline constexpr const char* kReportHeader =
    "scheme,model,alpha,beta,d,h,phi,estimate,reference,abs_error,std_error";

inline std::string report_to_csv(const ExperimentReport& rep) {
    std::ostringstream out;
    out << "# plmc-report kind=" << rep.kind;
    for (const auto& [k, v] : rep.meta) out << " " << k << "=" << v;
    out << "\n" << kReportHeader << "\n";
    for (const ReportRow& r : rep.rows) {
        out << r.scheme << "," << r.model << "," << (r.alpha ? fmt17(*r.alpha) : "") << ","
            << (r.beta ? fmt17(*r.beta) : "") << "," << r.d << "," << fmt17(r.h) << "," << r.phi
            << "," << fmt17(r.estimate) << "," << fmt17(r.reference) << "," << fmt17(r.abs_error)
            << "," << fmt17(r.std_error) << "\n";
    }
    for (const OrderRow& o : rep.orders)
        out << "ORDER," << o.phi << "," << fmt17(o.slope) << "," << fmt17(o.residual_rms) << "\n";
    for (const HistRow& hrow : rep.hist)
        out << "HIST," << hrow.scheme << "," << fmt17(hrow.bin_center) << ","
            << fmt17(hrow.density) << "\n";
    for (const CheckRow& c : rep.checks)
        out << "CHECK," << c.id << "," << c.samples << "," << c.violations << ","
            << fmt17(c.worst_margin) << "," << (c.pass ? 1 : 0) << "\n";
    return out.str();
}

inline std::string report_to_json(const ExperimentReport& rep) {
    nlohmann::ordered_json j;
    j["kind"] = rep.kind;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rep.meta) meta[k] = v;
    j["meta"] = meta;
    j["rows"] = nlohmann::ordered_json::array();
    for (const ReportRow& r : rep.rows) {
        nlohmann::ordered_json row;
        row["scheme"] = r.scheme;
        row["model"] = r.model;
        if (r.alpha) row["alpha"] = *r.alpha; else row["alpha"] = nullptr;
        if (r.beta) row["beta"] = *r.beta; else row["beta"] = nullptr;
        row["d"] = r.d;
        row["h"] = r.h;
        row["phi"] = r.phi;
        row["estimate"] = r.estimate;
        row["reference"] = r.reference;
        row["abs_error"] = r.abs_error;
        row["std_error"] = r.std_error;
        j["rows"].push_back(row);
    }
    j["orders"] = nlohmann::ordered_json::array();
    for (const OrderRow& o : rep.orders)
        j["orders"].push_back({{"phi", o.phi}, {"slope", o.slope}, {"residual_rms", o.residual_rms}});
    j["hist"] = nlohmann::ordered_json::array();
    for (const HistRow& hrow : rep.hist)
        j["hist"].push_back(
            {{"scheme", hrow.scheme}, {"bin_center", hrow.bin_center}, {"density", hrow.density}});
    j["checks"] = nlohmann::ordered_json::array();
    for (const CheckRow& c : rep.checks)
        j["checks"].push_back({{"id", c.id},
                               {"samples", c.samples},
                               {"violations", c.violations},
                               {"worst_margin", c.worst_margin},
                               {"pass", c.pass}});
    return j.dump(2) + "\n";
}

inline void write_report(const ExperimentReport& rep, const std::string& path,
                         const std::string& format) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("write_report: cannot open " + path);
    if (format == "csv")
        f << report_to_csv(rep);
    else if (format == "json")
        f << report_to_json(rep);
    else
        throw invalid_parameter_error("write_report: unknown format " + format);
    if (!f) throw config_error("write_report: write failure on " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error(std::string("report parse: bad ") + what + " field: " + s);
    }
}

} // namespace detail

/// Parses a CSV report produced by report_to_csv. All doubles round-trip
/// exactly (they were written with 17 significant digits).
inline ExperimentReport parse_report_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("parse_report_csv: cannot open " + path);
    ExperimentReport rep;
    std::string line;
    bool header_seen = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "# plmc-report kind=";
            if (line.rfind(tag, 0) == 0) {
                std::istringstream ss(line.substr(2));
                std::string token;
                ss >> token;  // "plmc-report"
                while (ss >> token) {
                    const auto eq = token.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string k = token.substr(0, eq), v = token.substr(eq + 1);
                    if (k == "kind")
                        rep.kind = v;
                    else
                        rep.add_meta(k, v);
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line != kReportHeader)
                throw config_error("parse_report_csv: unexpected header: " + line);
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.empty()) continue;
        if (fields[0] == "ORDER") {
            if (fields.size() != 4) throw config_error("parse_report_csv: bad ORDER row");
            rep.orders.push_back({fields[1], detail::parse_double(fields[2], "slope"),
                                  detail::parse_double(fields[3], "residual_rms")});
        } else if (fields[0] == "HIST") {
            if (fields.size() != 4) throw config_error("parse_report_csv: bad HIST row");
            rep.hist.push_back({fields[1], detail::parse_double(fields[2], "bin_center"),
                                detail::parse_double(fields[3], "density")});
        } else if (fields[0] == "CHECK") {
            if (fields.size() != 6) throw config_error("parse_report_csv: bad CHECK row");
            CheckRow c;
            c.id = fields[1];
            c.samples = std::stoll(fields[2]);
            c.violations = std::stoll(fields[3]);
            c.worst_margin = detail::parse_double(fields[4], "worst_margin");
            c.pass = (fields[5] == "1");
            rep.checks.push_back(c);
        } else {
            if (fields.size() != 11) throw config_error("parse_report_csv: bad data row");
            ReportRow r;
            r.scheme = fields[0];
            r.model = fields[1];
            if (!fields[2].empty()) r.alpha = detail::parse_double(fields[2], "alpha");
            if (!fields[3].empty()) r.beta = detail::parse_double(fields[3], "beta");
            r.d = static_cast<int>(std::stoll(fields[4]));
            r.h = detail::parse_double(fields[5], "h");
            r.phi = fields[6];
            r.estimate = detail::parse_double(fields[7], "estimate");
            r.reference = detail::parse_double(fields[8], "reference");
            r.abs_error = detail::parse_double(fields[9], "abs_error");
            r.std_error = detail::parse_double(fields[10], "std_error");
            rep.rows.push_back(r);
        }
    }
    if (!header_seen) throw config_error("parse_report_csv: missing header");
    return rep;
}

} // namespace plmc
