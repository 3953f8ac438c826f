#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "diffsim/graph.hpp"
#include "diffsim/metrics.hpp"

namespace diffsim {

namespace detail {

// Shortest round-trip decimal form; identical doubles always print the same
// bytes, which is what the reproducibility contract needs.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kMetricsCsvHeader =
    "round,total_load,max_above_avg,max_local_diff,potential_over_n,min_load,min_transient";

// Streaming writer for the per-round metrics CSV.
class MetricsCsvWriter {
public:
    MetricsCsvWriter(const std::filesystem::path& path, bool integer_loads)
        : out_(path), integer_loads_(integer_loads) {
        if (!out_) throw std::runtime_error("metrics csv: cannot open " + path.string());
        out_ << kMetricsCsvHeader << '\n';
    }

    void row(const RoundRecord& rec) {
        out_ << rec.round << ',';
        if (integer_loads_) {
            out_ << detail::format_int(static_cast<std::int64_t>(rec.total_load)) << ','
                 << detail::format_double(rec.max_above_avg) << ','
                 << detail::format_int(static_cast<std::int64_t>(rec.max_local_diff)) << ','
                 << detail::format_double(rec.potential_over_n) << ','
                 << detail::format_int(static_cast<std::int64_t>(rec.min_load)) << ','
                 << detail::format_int(static_cast<std::int64_t>(rec.min_transient));
        } else {
            out_ << detail::format_double(rec.total_load) << ','
                 << detail::format_double(rec.max_above_avg) << ','
                 << detail::format_double(rec.max_local_diff) << ','
                 << detail::format_double(rec.potential_over_n) << ','
                 << detail::format_double(rec.min_load) << ','
                 << detail::format_double(rec.min_transient);
        }
        out_ << '\n';
        if (!out_) throw std::runtime_error("metrics csv: write failed");
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("metrics csv: close failed");
    }

private:
    std::ofstream out_;
    bool integer_loads_;
};

inline void write_metrics_csv(const std::filesystem::path& path,
                              std::span<const RoundRecord> records, bool integer_loads) {
    MetricsCsvWriter writer(path, integer_loads);
    for (const auto& rec : records) writer.row(rec);
    writer.close();
}

// Load snapshot: "n <n> round <round>" then one value per line.
template <typename LoadT>
void write_snapshot(const std::filesystem::path& path, std::span<const LoadT> x, int round) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("snapshot: cannot open " + path.string());
    out << "n " << x.size() << " round " << round << '\n';
    for (LoadT v : x) {
        if constexpr (std::is_integral_v<LoadT>)
            out << detail::format_int(v) << '\n';
        else
            out << detail::format_double(v) << '\n';
    }
    if (!out) throw std::runtime_error("snapshot: write failed for " + path.string());
}

struct Snapshot {
    int round = 0;
    std::vector<double> values;
};

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("snapshot: cannot open " + path.string());
    std::string key_n, key_round;
    std::size_t n = 0;
    Snapshot snap;
    in >> key_n >> n >> key_round >> snap.round;
    if (key_n != "n" || key_round != "round")
        throw std::runtime_error("snapshot: bad header in " + path.string());
    snap.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(in >> snap.values[i]))
            throw std::runtime_error("snapshot: truncated data in " + path.string());
    return snap;
}

// One decimal per line; used for speed files and file-backed initial loads.
inline std::vector<double> read_value_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("value file: cannot open " + path.string());
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (values.empty()) throw std::runtime_error("value file: no values in " + path.string());
    return values;
}

// Speed file: line k = speed of node k.
inline std::vector<double> read_speeds(const std::filesystem::path& path) {
    return read_value_file(path);
}

// Debug export: one "i j" pair per line, i < j.
inline void write_edge_list(const Graph& g, std::ostream& out) {
    for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

inline void write_edge_list(const Graph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("edge list: cannot open " + path.string());
    write_edge_list(g, out);
    if (!out) throw std::runtime_error("edge list: write failed for " + path.string());
}

// Coefficient trace CSV (round, leading eigenvector position, max |a_i| over
// the non-stationary coefficients, and a_4).
inline constexpr const char* kTraceCsvHeader = "round,leading_index,max_abs_coefficient,a4";

class TraceCsvWriter {
public:
    explicit TraceCsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw std::runtime_error("trace csv: cannot open " + path.string());
        out_ << kTraceCsvHeader << '\n';
    }

    void row(int round, int leading_index, double max_abs, double a4) {
        out_ << round << ',' << leading_index << ',' << detail::format_double(max_abs) << ','
             << detail::format_double(a4) << '\n';
        if (!out_) throw std::runtime_error("trace csv: write failed");
    }

private:
    std::ofstream out_;
};

}  // namespace diffsim
