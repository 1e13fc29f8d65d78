#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vector.hpp"

namespace pscs {

/* Oracle-call bookkeeping for one solver run. */
struct OracleCounters {
    std::int64_t f_evals = 0;        // gradient-oracle calls f = ∇F
    std::int64_t a_applies = 0;      // design-matrix products (A or Aᵀ), prox backend
    std::int64_t t_applies = 0;      // quadratic-operator products, linear backends
    std::int64_t cg_iterations = 0;
    std::int64_t energy_evals = 0;
    std::int64_t residual_evals = 0;
};

namespace detail {
constexpr double qnan = std::numeric_limits<double>::quiet_NaN();
}

/* One outer iteration. Only the fixed column set below is serialized; dice
 * and dist_surrogate stay in memory for diagnostics. */
struct TraceRecord {
    int n = 0;
    double energy = detail::qnan;
    double aux_a = detail::qnan;
    double step_norm = 0.0;
    double beta = 0.0;
    double omega = 0.0;
    double residual = detail::qnan;
    bool restart = false;
    std::int64_t wall_ns = 0;

    double dice = detail::qnan;
    double dist_surrogate = detail::qnan;
};

struct Trace {
    std::vector<TraceRecord> records;
    Vector final_u;
    std::string stop_reason;
    bool hit_max = false;
    int iterations = 0;
    std::int64_t solve_wall_ns = 0;
    std::int64_t total_wall_ns = 0;
    OracleCounters counters;
    std::vector<std::string> warnings;
    std::vector<Vector> iterates; // filled only when the run records iterates
    double final_residual = detail::qnan;
    double final_energy = detail::qnan;
    double final_dice = detail::qnan;
};

/** Shortest round-trippable decimal form of a double; deterministic across runs. */
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/** RFC-4180 field quoting: quote when a field contains comma, quote, or newline. */
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

inline const char* trace_csv_header() {
    return "n,E,A,step_norm,beta,omega,residual,restart,wall_ns";
}

inline void write_trace_csv(const std::string& path, const Trace& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << trace_csv_header() << "\n";
    for (const auto& r : t.records) {
        out << r.n << ',' << fmt_double(r.energy) << ',' << fmt_double(r.aux_a) << ','
            << fmt_double(r.step_norm) << ',' << fmt_double(r.beta) << ','
            << fmt_double(r.omega) << ',' << fmt_double(r.residual) << ','
            << (r.restart ? 1 : 0) << ',' << r.wall_ns << "\n";
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

/** Read back a trace CSV written by write_trace_csv. */
inline std::vector<TraceRecord> read_trace_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace file " + path);
    std::vector<TraceRecord> recs;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 9) throw std::runtime_error("malformed trace row in " + path);
        TraceRecord r;
        r.n = std::stoi(f[0]);
        r.energy = std::strtod(f[1].c_str(), nullptr);
        r.aux_a = std::strtod(f[2].c_str(), nullptr);
        r.step_norm = std::strtod(f[3].c_str(), nullptr);
        r.beta = std::strtod(f[4].c_str(), nullptr);
        r.omega = std::strtod(f[5].c_str(), nullptr);
        r.residual = std::strtod(f[6].c_str(), nullptr);
        r.restart = f[7] == "1";
        r.wall_ns = std::stoll(f[8]);
        recs.push_back(r);
    }
    return recs;
}

} // namespace pscs
