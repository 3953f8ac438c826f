#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "diffsim/graph.hpp"
#include "diffsim/metrics.hpp"
#include "diffsim/parallel.hpp"
#include "diffsim/rng.hpp"

namespace diffsim {

enum class Scheme { fos, sos };
enum class Rounding { none, floor, randomized };

struct SchemeConfig {
    Scheme scheme = Scheme::fos;
    double beta = 1.0;  // only read by SOS; must be in (0,2)
    Rounding rounding = Rounding::none;
    std::optional<int> switch_at;  // round at which SOS becomes FOS
    int rounds = 0;
    std::uint64_t seed = 0;
};

// Flows, schedules and rounding errors are stored once per undirected edge in
// the canonical u < v orientation; the v -> u value is the negation, so
// antisymmetry is structural.

// FOS schedule: alpha_ij (x_i/s_i - x_j/s_j) per edge.
template <typename LoadT>
std::vector<double> fos_flows(const Graph& g, std::span<const LoadT> x) {
    if (static_cast<int>(x.size()) != g.node_count())
        throw std::invalid_argument("fos_flows: dimension mismatch");
    std::vector<double> schedule(g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto [u, v] = g.edge(e);
        schedule[e] = g.alpha(e) * (static_cast<double>(x[u]) * g.inv_speed(u) -
                                    static_cast<double>(x[v]) * g.inv_speed(v));
    }
    return schedule;
}

// SOS schedule: (beta-1) y_prev + beta alpha_ij (x_i/s_i - x_j/s_j).
template <typename LoadT>
std::vector<double> sos_flows(const Graph& g, std::span<const LoadT> x,
                              std::span<const LoadT> y_prev, double beta) {
    if (static_cast<int>(x.size()) != g.node_count())
        throw std::invalid_argument("sos_flows: dimension mismatch");
    if (static_cast<int>(y_prev.size()) != g.edge_count())
        throw std::invalid_argument("sos_flows: y_prev dimension mismatch");
    std::vector<double> schedule(g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto [u, v] = g.edge(e);
        const double diff = static_cast<double>(x[u]) * g.inv_speed(u) -
                            static_cast<double>(x[v]) * g.inv_speed(v);
        schedule[e] = (beta - 1.0) * static_cast<double>(y_prev[e]) + beta * g.alpha(e) * diff;
    }
    return schedule;
}

struct RoundedFlows {
    std::vector<std::int64_t> flows;  // canonical orientation, integer
    std::vector<double> errors;       // e = scheduled - realized, same orientation
};

// Floor the positive direction of every edge: |flow| = floor(|schedule|).
inline RoundedFlows round_floor(const Graph& g, std::span<const double> schedule) {
    RoundedFlows out;
    out.flows.resize(schedule.size());
    out.errors.resize(schedule.size());
    for (std::size_t e = 0; e < schedule.size(); ++e) {
        const double s = schedule[e];
        const double f = s >= 0.0 ? std::floor(s) : -std::floor(-s);
        out.flows[e] = static_cast<std::int64_t>(f);
        out.errors[e] = s - f;
    }
    return out;
}

// Randomized rounding: each node floors its outgoing schedules, then draws
// ceil(r) excess tokens, r the sum of the dropped fractional parts. A token
// leaves with probability r/ceil(r) and picks destination j with probability
// {Y_ij}/r, destinations independent across tokens. Tokens consume only the
// (seed, node, round) substream, so results do not depend on thread layout.
inline RoundedFlows round_randomized(const Graph& g, std::span<const double> schedule,
                                     std::uint64_t master_seed, int round, int workers = 1) {
    const int m = g.edge_count();
    if (static_cast<int>(schedule.size()) != m)
        throw std::invalid_argument("round_randomized: dimension mismatch");
    RoundedFlows out;
    out.flows.resize(m);
    out.errors.resize(m);

    parallel_for_ranges(static_cast<std::size_t>(g.node_count()), workers,
                        [&](std::size_t begin, std::size_t end) {
        std::vector<int> outgoing;  // edge ids this node sends over
        for (std::size_t node = begin; node < end; ++node) {
            const int i = static_cast<int>(node);
            outgoing.clear();
            double r = 0.0;
            for (int e : g.incident_edges(i)) {
                const auto [u, v] = g.edge(e);
                const double s = schedule[e];
                const bool sender = (s > 0.0 && u == i) || (s < 0.0 && v == i);
                if (s == 0.0 && u == i) {  // integral zero: settle the edge once, no tokens
                    out.flows[e] = 0;
                    out.errors[e] = 0.0;
                }
                if (!sender) continue;
                const double mag = std::abs(s);
                const double base = std::floor(mag);
                const double frac = mag - base;
                const std::int64_t sign = (u == i) ? 1 : -1;
                out.flows[e] = sign * static_cast<std::int64_t>(base);
                out.errors[e] = sign * frac;
                r += frac;
                if (frac > 0.0) outgoing.push_back(e);
            }
            if (r <= 0.0 || outgoing.empty()) continue;

            const int tokens = static_cast<int>(std::ceil(r));
            SplitMix64 rng(substream_seed(master_seed, node, static_cast<std::uint64_t>(round)));
            for (int t = 0; t < tokens; ++t) {
                // One draw u in [0, tokens): u < r picks a destination by the
                // cumulative fractional parts, otherwise the token stays home.
                const double u = rng.next_double() * tokens;
                if (u >= r) continue;
                double acc = 0.0;
                int chosen = outgoing.back();
                for (int e : outgoing) {
                    acc += std::abs(schedule[e]) - std::floor(std::abs(schedule[e]));
                    if (u < acc) {
                        chosen = e;
                        break;
                    }
                }
                const std::int64_t sign = (g.edge(chosen).u == i) ? 1 : -1;
                out.flows[chosen] += sign;
                out.errors[chosen] -= sign;
            }
        }
    });
    return out;
}

template <typename LoadT>
struct AppliedFlows {
    std::vector<LoadT> next;       // x(t+1)
    std::vector<LoadT> transient;  // x after sending, before receiving
};

// Two-step round split: transient load subtracts all outgoing flow; the next
// load additionally receives the incoming flow. Negative values are recorded,
// not rejected.
template <typename LoadT, typename FlowT>
AppliedFlows<LoadT> apply_flows(const Graph& g, std::span<const LoadT> x,
                                std::span<const FlowT> flows, int workers = 1) {
    if (static_cast<int>(x.size()) != g.node_count())
        throw std::invalid_argument("apply_flows: dimension mismatch");
    if (static_cast<int>(flows.size()) != g.edge_count())
        throw std::invalid_argument("apply_flows: flow dimension mismatch");
    AppliedFlows<LoadT> out;
    out.next.resize(x.size());
    out.transient.resize(x.size());
    parallel_for_ranges(x.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const int node = static_cast<int>(i);
            LoadT sent = 0;
            LoadT net = 0;
            const auto eids = g.incident_edges(node);
            for (int e : eids) {
                const FlowT f = flows[e];
                const LoadT signed_out =
                    g.edge(e).u == node ? static_cast<LoadT>(f) : static_cast<LoadT>(-f);
                net += signed_out;
                if (signed_out > 0) sent += signed_out;
            }
            out.transient[i] = x[i] - sent;
            out.next[i] = x[i] - net;
        }
    });
    return out;
}

// Corner / uniform / file-backed initial load.
struct InitSpec {
    enum Kind { corner, uniform, file } kind = corner;
    double value = 1000.0;
    std::string path;
};

template <typename LoadT>
std::vector<LoadT> initial_load(const InitSpec& spec, const Graph& g,
                                std::span<const double> file_values = {}) {
    const int n = g.node_count();
    std::vector<LoadT> x(n, LoadT{0});
    switch (spec.kind) {
        case InitSpec::corner: {
            const double total = spec.value * n;
            if constexpr (std::is_integral_v<LoadT>) {
                if (std::floor(total) != total)
                    throw std::invalid_argument("initial_load: corner total not integral");
            }
            x[0] = static_cast<LoadT>(total);
            break;
        }
        case InitSpec::uniform:
            for (auto& v : x) v = static_cast<LoadT>(spec.value);
            break;
        case InitSpec::file: {
            if (static_cast<int>(file_values.size()) != n)
                throw std::invalid_argument("initial_load: file length mismatch");
            for (int i = 0; i < n; ++i) x[i] = static_cast<LoadT>(file_values[i]);
            break;
        }
    }
    return x;
}

// One run of a scheme over a graph. LoadT = double gives the idealized
// continuous process (rounding none); LoadT = int64 the discrete one.
template <typename LoadT>
class Simulation {
    static_assert(std::is_same_v<LoadT, double> || std::is_same_v<LoadT, std::int64_t>);

public:
    Simulation(const Graph& g, std::vector<LoadT> x0, SchemeConfig cfg, int workers = 1)
        : g_(&g), cfg_(cfg), workers_(workers), x_(std::move(x0)) {
        if (static_cast<int>(x_.size()) != g.node_count())
            throw std::invalid_argument("simulation: x0 dimension mismatch");
        if constexpr (std::is_same_v<LoadT, double>) {
            if (cfg_.rounding != Rounding::none)
                throw std::invalid_argument("simulation: continuous loads take rounding none");
        } else {
            if (cfg_.rounding == Rounding::none)
                throw std::invalid_argument("simulation: discrete loads need a rounding scheme");
        }
        if (cfg_.scheme == Scheme::sos && !(cfg_.beta > 0.0 && cfg_.beta < 2.0))
            throw std::invalid_argument("simulation: beta must be in (0,2)");
        y_prev_.assign(g.edge_count(), LoadT{0});
        transient_ = x_;
    }

    const Graph& graph() const { return *g_; }
    int round() const { return round_; }
    const std::vector<LoadT>& load() const { return x_; }
    const std::vector<LoadT>& transient_load() const { return transient_; }
    const std::vector<double>& last_schedule() const { return schedule_; }
    const std::vector<LoadT>& previous_flows() const { return y_prev_; }
    const std::vector<double>& last_errors() const { return errors_; }

    RoundRecord step() {
        const Graph& g = *g_;
        const bool sos_now = cfg_.scheme == Scheme::sos && round_ >= 1 &&
                             (!cfg_.switch_at || round_ < *cfg_.switch_at);

        // Phase 1: schedule from an immutable snapshot of x.
        schedule_.resize(g.edge_count());
        const double beta = cfg_.beta;
        parallel_for_ranges(static_cast<std::size_t>(g.edge_count()), workers_,
                            [&](std::size_t begin, std::size_t end) {
            for (std::size_t e = begin; e < end; ++e) {
                const auto [u, v] = g.edge(e);
                const double diff = static_cast<double>(x_[u]) * g.inv_speed(u) -
                                    static_cast<double>(x_[v]) * g.inv_speed(v);
                const double base = g.alpha(static_cast<int>(e)) * diff;
                schedule_[e] = sos_now
                                   ? (beta - 1.0) * static_cast<double>(y_prev_[e]) + beta * base
                                   : base;
            }
        });

        // Phase 1b: rounding (discrete only).
        const std::vector<LoadT>* flows = nullptr;
        if constexpr (std::is_same_v<LoadT, double>) {
            flows = &schedule_;
        } else {
            RoundedFlows rounded =
                cfg_.rounding == Rounding::floor
                    ? round_floor(g, schedule_)
                    : round_randomized(g, schedule_, cfg_.seed, round_, workers_);
            int_flows_ = std::move(rounded.flows);
            errors_ = std::move(rounded.errors);
            flows = &int_flows_;
        }

        // Phase 2: apply.
        auto applied = apply_flows<LoadT, LoadT>(g, x_, *flows, workers_);
        x_ = std::move(applied.next);
        transient_ = std::move(applied.transient);
        y_prev_ = *flows;  // discrete memory holds the realized integer flows

        RoundRecord rec = make_round_record(g, round_, std::span<const LoadT>(x_),
                                            std::span<const LoadT>(transient_));
        ++round_;
        return rec;
    }

    std::vector<RoundRecord> run() {
        std::vector<RoundRecord> records;
        records.reserve(cfg_.rounds);
        for (int t = 0; t < cfg_.rounds; ++t) records.push_back(step());
        return records;
    }

private:
    const Graph* g_;
    SchemeConfig cfg_;
    int workers_;
    int round_ = 0;
    std::vector<LoadT> x_, transient_, y_prev_;
    std::vector<double> schedule_, errors_;
    std::vector<std::int64_t> int_flows_;
};

using ContinuousSimulation = Simulation<double>;
using DiscreteSimulation = Simulation<std::int64_t>;

}  // namespace diffsim
