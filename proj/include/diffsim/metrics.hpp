#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsim/graph.hpp"

namespace diffsim {

// Per-round metric snapshot. Metrics are evaluated on the post-round load and
// on the transient state seen during the round. All reductions run in a fixed
// serial order so records never depend on the worker count.
struct RoundRecord {
    int round = 0;
    double max_above_avg = 0.0;
    double max_local_diff = 0.0;
    double potential_over_n = 0.0;
    double min_transient = 0.0;
    double min_load = 0.0;
    double total_load = 0.0;
};

namespace detail {

// Balanced load of node i is total * s_i / s; homogeneous speeds reduce this
// to the plain average.
template <typename LoadT>
double balanced_load(const Graph& g, double total, int i) {
    return g.homogeneous() ? total / g.node_count() : total * g.speed(i) / g.total_speed();
}

}  // namespace detail

template <typename LoadT>
double total_load(std::span<const LoadT> x) {
    LoadT sum{0};
    for (LoadT v : x) sum += v;
    return static_cast<double>(sum);
}

// max_{(u,v) in E} |x_u - x_v|
template <typename LoadT>
double max_local_difference(const Graph& g, std::span<const LoadT> x) {
    if (static_cast<int>(x.size()) != g.node_count())
        throw std::invalid_argument("max_local_difference: dimension mismatch");
    double best = 0.0;
    for (const auto& [u, v] : g.edges())
        best = std::max(best, std::abs(static_cast<double>(x[u]) - static_cast<double>(x[v])));
    return best;
}

// max_v x_v - xbar_v (one-sided deviation above the balanced load).
template <typename LoadT>
double max_above_average(const Graph& g, std::span<const LoadT> x) {
    const double total = total_load(x);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.node_count(); ++i)
        best = std::max(best,
                        static_cast<double>(x[i]) - detail::balanced_load<LoadT>(g, total, i));
    return best;
}

// Delta(t) = ||x - xbar||_inf, the two-sided deviation used by the negative
// load bounds.
template <typename LoadT>
double linf_deviation(const Graph& g, std::span<const LoadT> x) {
    const double total = total_load(x);
    double best = 0.0;
    for (int i = 0; i < g.node_count(); ++i)
        best = std::max(best, std::abs(static_cast<double>(x[i]) -
                                       detail::balanced_load<LoadT>(g, total, i)));
    return best;
}

struct Potential {
    double phi = 0.0;
    double phi_over_n = 0.0;
};

// phi = sum_v (x_v - xbar_v)^2
template <typename LoadT>
Potential potential(const Graph& g, std::span<const LoadT> x) {
    const double total = total_load(x);
    double phi = 0.0;
    for (int i = 0; i < g.node_count(); ++i) {
        const double dev = static_cast<double>(x[i]) - detail::balanced_load<LoadT>(g, total, i);
        phi += dev * dev;
    }
    return {phi, phi / g.node_count()};
}

template <typename LoadT>
double min_transient(std::span<const LoadT> transient) {
    if (transient.empty()) throw std::invalid_argument("min_transient: empty vector");
    return static_cast<double>(*std::min_element(transient.begin(), transient.end()));
}

template <typename LoadT>
RoundRecord make_round_record(const Graph& g, int round, std::span<const LoadT> x,
                              std::span<const LoadT> transient) {
    RoundRecord rec;
    rec.round = round;
    const double total = total_load(x);
    rec.total_load = total;
    double max_above = -std::numeric_limits<double>::infinity();
    double phi = 0.0;
    double min_load = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.node_count(); ++i) {
        const double xi = static_cast<double>(x[i]);
        const double dev = xi - detail::balanced_load<LoadT>(g, total, i);
        max_above = std::max(max_above, dev);
        phi += dev * dev;
        min_load = std::min(min_load, xi);
    }
    rec.max_above_avg = max_above;
    rec.potential_over_n = phi / g.node_count();
    rec.min_load = min_load;
    rec.min_transient = min_transient(transient);
    rec.max_local_diff = max_local_difference(g, x);
    return rec;
}

// Convergence detection for the discrete plateau: converged at the first
// round r after which the best max_above_avg value never improves by tol or
// more again (anywhere in the rest of the trajectory, so a later scheme
// switch reopens the verdict). The reported imbalance is the median over the
// following window, since the discrete series keeps fluctuating.
struct ImbalanceVerdict {
    std::optional<int> converged_at;
    double remaining_imbalance = 0.0;
};

inline ImbalanceVerdict remaining_imbalance(std::span<const double> max_above_avg_series,
                                            int window = 100, double tol = 1.0) {
    const int len = static_cast<int>(max_above_avg_series.size());
    if (len < window) throw std::invalid_argument("remaining_imbalance: trajectory shorter than window");
    std::vector<double> suffix_min(len + 1, std::numeric_limits<double>::infinity());
    for (int r = len - 1; r >= 0; --r)
        suffix_min[r] = std::min(suffix_min[r + 1], max_above_avg_series[r]);
    double best_so_far = std::numeric_limits<double>::infinity();
    for (int r = 0; r + window <= len; ++r) {
        best_so_far = std::min(best_so_far, max_above_avg_series[r]);
        if (best_so_far - suffix_min[r] < tol) {
            std::vector<double> win(max_above_avg_series.begin() + r,
                                    max_above_avg_series.begin() + r + window);
            std::nth_element(win.begin(), win.begin() + window / 2, win.end());
            return {r, win[window / 2]};
        }
    }
    return {std::nullopt, 0.0};
}

}  // namespace diffsim
