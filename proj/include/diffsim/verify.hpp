#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsim/diffusion.hpp"
#include "diffsim/graph.hpp"
#include "diffsim/metrics.hpp"
#include "diffsim/rng.hpp"
#include "diffsim/spectral.hpp"
#include "diffsim/theory.hpp"

namespace diffsim {

// One verified inequality or residual: pass iff observed <= bound.
struct CheckResult {
    std::string suite;
    std::string instance;
    double observed = 0.0;
    double bound = 0.0;
    bool pass = false;
};

namespace detail {

inline CheckResult make_check(std::string suite, std::string instance, double observed,
                              double bound) {
    return {std::move(suite), std::move(instance), observed, bound, observed <= bound};
}

// Random connected graph: random spanning tree plus extra random edges.
inline Graph random_connected_graph(int n, int extra_edges, std::uint64_t seed) {
    SplitMix64 rng(substream_seed(seed, 0xc0, n));
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v)
        edges.emplace_back(static_cast<int>(rng.next_below(v)), v);
    for (int k = 0; k < extra_edges; ++k) {
        const int u = static_cast<int>(rng.next_below(n));
        const int v = static_cast<int>(rng.next_below(n));
        if (u == v) continue;
        const auto edge = std::minmax(u, v);
        if (std::find(edges.begin(), edges.end(), std::make_pair(edge.first, edge.second)) ==
            edges.end())
            edges.emplace_back(edge.first, edge.second);
    }
    return Graph::from_edges(n, std::move(edges));
}

// The four canonical desk instances for the deviation identity.
struct NamedGraph {
    std::string name;
    Graph graph;
};

inline std::vector<NamedGraph> canonical_instances() {
    std::vector<NamedGraph> out;
    out.push_back({"K2", Graph::from_edges(2, {{0, 1}})});
    out.push_back({"cycle4", cycle_graph(4)});
    out.push_back({"torus3x3", torus2d(3, 3)});
    out.push_back({"hetero-path4", path_graph(4).with_speeds({1.0, 2.0, 3.0, 4.0})});
    return out;
}

inline std::vector<std::int64_t> random_integer_load(const Graph& g, std::uint64_t seed) {
    SplitMix64 rng(substream_seed(seed, 0x10ad, g.node_count()));
    std::vector<std::int64_t> x(g.node_count());
    for (auto& v : x) v = static_cast<std::int64_t>(rng.next_below(64));
    x[0] += 7 * g.node_count();  // keep a corner-heavy component
    return x;
}

}  // namespace detail

// Deviation identity (exact telescoping of rounding errors): after every
// round t, x^D_k(t) - x^C_k(t) equals the contribution-weighted error sum,
// for every node k. Returns the max residual over k and t <= horizon.
inline double lemma_deterministic_residual(const Graph& g, Scheme scheme, double beta,
                                           Rounding rounding, std::uint64_t seed, int horizon) {
    SchemeConfig cfg;
    cfg.scheme = scheme;
    cfg.beta = beta;
    cfg.rounding = rounding;
    cfg.rounds = horizon;
    cfg.seed = seed;

    const auto x0 = detail::random_integer_load(g, seed);
    std::vector<double> x0d(x0.begin(), x0.end());
    DiscreteSimulation disc(g, x0, cfg);
    SchemeConfig cont_cfg = cfg;
    cont_cfg.rounding = Rounding::none;
    ContinuousSimulation cont(g, x0d, cont_cfg);

    std::vector<ContributionTable> tables;
    tables.reserve(g.node_count());
    for (int k = 0; k < g.node_count(); ++k)
        tables.push_back(contributions(g, scheme, beta, k, horizon));

    std::vector<std::vector<double>> error_history;
    double residual = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        disc.step();
        cont.step();
        error_history.push_back(disc.last_errors());
        for (int k = 0; k < g.node_count(); ++k) {
            const double lhs = static_cast<double>(disc.load()[k]) - cont.load()[k];
            const double rhs = deviation_rhs(tables[k], error_history, t);
            residual = std::max(residual, std::abs(lhs - rhs));
        }
    }
    return residual;
}

inline std::vector<CheckResult> verify_lemma_deterministic(int seeds = 5, int horizon = 20) {
    std::vector<CheckResult> checks;
    for (const auto& [name, graph] : detail::canonical_instances()) {
        const double beta_o = beta_opt(lambda2(graph).lambda);
        for (const auto& [scheme, beta, scheme_name] :
             {std::tuple{Scheme::fos, 1.0, "fos"}, std::tuple{Scheme::sos, 1.5, "sos-b1.5"},
              std::tuple{Scheme::sos, beta_o, "sos-bopt"}}) {
            for (const auto& [rounding, rname] :
                 {std::pair{Rounding::floor, "floor"}, std::pair{Rounding::randomized, "rand"}}) {
                const int reps = rounding == Rounding::randomized ? seeds : 1;
                double residual = 0.0;
                for (int s = 0; s < reps; ++s)
                    residual = std::max(residual, lemma_deterministic_residual(
                                                      graph, scheme, beta, rounding,
                                                      0x9d5eed + 97 * s, horizon));
                checks.push_back(detail::make_check(
                    "lemma-deterministic",
                    name + std::string("/") + scheme_name + "/" + rname, residual, 1e-9));
            }
        }
    }
    return checks;
}

// Q-series invariants on random connected graphs: equal column sums, closed
// form vs scalar recursion on the graph spectrum, the Lemma q(2) eigenvalue
// bound, and the eigen-reconstruction of Q(t).
namespace detail {

// gamma_j(t) for t = 0..horizon by the defining scalar recursion.
inline std::vector<double> gamma_by_recursion(double lambda_j, double beta, int horizon) {
    std::vector<double> g(horizon + 1);
    g[0] = 1.0;
    if (horizon >= 1) g[1] = beta * lambda_j;
    for (int t = 2; t <= horizon; ++t)
        g[t] = beta * lambda_j * g[t - 1] + (1.0 - beta) * g[t - 2];
    return g;
}

}  // namespace detail

inline std::vector<CheckResult> verify_q_series(int instances = 50, std::uint64_t seed = 1,
                                                int horizon = 30) {
    std::vector<CheckResult> checks;
    double col_spread = 0.0, gamma_residual = 0.0, bound_excess = 0.0, reconstruction = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
        SplitMix64 rng(substream_seed(seed, 0x9, inst));
        const int n = 4 + static_cast<int>(rng.next_below(29));  // 4..32
        const Graph g = detail::random_connected_graph(n, n, substream_seed(seed, 0xa, inst));
        const EigenBasis basis = eigenbasis(g);
        const double lambda = std::abs(basis.values[1]);
        const double beta = beta_opt(lambda);
        const QSeries series = q_series(g, beta, horizon);

        for (int t = 0; t <= horizon; ++t) {
            const Eigen::RowVectorXd sums = series.at(t).colwise().sum();
            col_spread = std::max(col_spread, sums.maxCoeff() - sums.minCoeff());
        }

        const double root = std::sqrt(beta - 1.0);
        for (int j = 0; j < n; ++j) {
            const double lj = j == 0 ? 1.0 : basis.values[j];
            const auto rec = detail::gamma_by_recursion(lj, beta, horizon);
            for (int t = 0; t <= horizon; ++t) {
                gamma_residual = std::max(
                    gamma_residual, std::abs(gamma_closed_form(lj, lambda, beta, t) - rec[t]));
                if (j > 0)
                    bound_excess =
                        std::max(bound_excess, std::abs(rec[t]) - std::pow(root, t) * (t + 1));
            }
        }

        for (int t : {0, 1, 2, horizon / 2, horizon}) {
            Eigen::VectorXd gammas(n);
            for (int j = 0; j < n; ++j)
                gammas[j] = gamma_closed_form(j == 0 ? 1.0 : basis.values[j], lambda, beta, t);
            const Eigen::MatrixXd rebuilt = basis.vectors * gammas.asDiagonal() * basis.inverse;
            reconstruction =
                std::max(reconstruction, (rebuilt - series.at(t)).cwiseAbs().maxCoeff());
        }
    }
    checks.push_back(detail::make_check("q-series", "equal column sums", col_spread, 1e-10));
    checks.push_back(detail::make_check("q-series", "gamma closed form vs recursion",
                                        gamma_residual, 1e-9));
    checks.push_back(detail::make_check("q-series", "lemma-q2 eigenvalue bound", bound_excess,
                                        1e-9));
    checks.push_back(detail::make_check("q-series", "eigen reconstruction of Q(t)",
                                        reconstruction, 1e-8));
    return checks;
}

// Closed-form gamma against the scalar recursion on random (lambda_j, t).
inline std::vector<CheckResult> verify_gamma(std::uint64_t seed = 2) {
    SplitMix64 rng(seed);
    double residual = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const double lambda = 0.05 + 0.9 * rng.next_double();
        const double beta = beta_opt(lambda);
        double lj;
        const auto pick = rng.next_below(4);
        if (pick == 0) lj = 1.0;
        else if (pick == 1) lj = rng.next_below(2) ? lambda : -lambda;
        else lj = (2.0 * rng.next_double() - 1.0) * lambda * 0.999;
        const int t = static_cast<int>(rng.next_below(51));
        const auto rec = detail::gamma_by_recursion(lj, beta, t);
        residual = std::max(residual, std::abs(gamma_closed_form(lj, lambda, beta, t) - rec[t]));
    }
    return {detail::make_check("gamma", "closed form vs recursion (100 random)", residual, 1e-9)};
}

// Negative-load sweeps: randomized and continuous SOS runs on cycles and
// small tori from corner loads; end-of-round loads against Obs-style
// -sqrt(n) Delta(0) and transient loads against the explicit constant bound.
inline std::vector<CheckResult> verify_negative_load(int runs = 100, std::uint64_t seed = 3) {
    std::vector<CheckResult> checks;
    std::vector<detail::NamedGraph> instances;
    instances.push_back({"cycle8", cycle_graph(8)});
    instances.push_back({"cycle16", cycle_graph(16)});
    instances.push_back({"cycle64", cycle_graph(64)});
    instances.push_back({"torus3x3", torus2d(3, 3)});
    instances.push_back({"torus8x8", torus2d(8, 8)});

    double worst_end_margin = 0.0;       // bound - min observed (pass when <= 0)
    double worst_transient_margin = 0.0;
    int run_count = 0;
    for (const auto& [name, g] : instances) {
        const double lambda = lambda2(g).lambda;
        const double beta = beta_opt(lambda);
        const int rounds = std::min(2000, static_cast<int>(std::ceil(20.0 / (1.0 - lambda))));
        const int per_instance = std::max(1, runs / static_cast<int>(instances.size()) / 2);
        for (int rep = 0; rep < per_instance; ++rep) {
            const double factor = (rep % 3 == 0) ? 10.0 : (rep % 3 == 1 ? 100.0 : 1000.0);
            std::vector<std::int64_t> x0(g.node_count(), 0);
            x0[0] = static_cast<std::int64_t>(factor) * g.node_count();
            std::vector<double> x0d(x0.begin(), x0.end());
            const double delta0 = linf_deviation<double>(g, x0d);
            const double end_bound =
                negative_load_floor(g.node_count(), delta0, lambda,
                                    NegativeLoadVariant::end_of_round);
            const double transient_bound = negative_load_floor(
                g.node_count(), delta0, lambda, NegativeLoadVariant::transient_continuous);

            SchemeConfig cfg;
            cfg.scheme = Scheme::sos;
            cfg.beta = beta;
            cfg.rounds = rounds;

            // Randomized discrete run and the continuous run it rounds.
            cfg.rounding = Rounding::randomized;
            cfg.seed = substream_seed(seed, run_count, 0);
            DiscreteSimulation disc(g, x0, cfg);
            cfg.rounding = Rounding::none;
            ContinuousSimulation cont(g, x0d, cfg);
            for (int t = 0; t < rounds; ++t) {
                const RoundRecord rd = disc.step();
                const RoundRecord rc = cont.step();
                worst_end_margin = std::max({worst_end_margin, end_bound - rd.min_load,
                                             end_bound - rc.min_load});
                worst_transient_margin =
                    std::max({worst_transient_margin, transient_bound - rd.min_transient,
                              transient_bound - rc.min_transient});
            }
            run_count += 2;
        }
    }
    checks.push_back(detail::make_check(
        "negative-load", "end-of-round >= -sqrt(n) Delta(0), " + std::to_string(run_count) +
                             " runs", worst_end_margin, 0.0));
    checks.push_back(detail::make_check("negative-load", "transient >= explicit Thm bound",
                                        worst_transient_margin, 0.0));
    return checks;
}

inline std::vector<CheckResult> verify_upsilon() {
    std::vector<CheckResult> checks;

    const Graph k2 = Graph::from_edges(2, {{0, 1}});
    const auto k2_fos = upsilon(k2, Scheme::fos, 1.0);
    checks.push_back(detail::make_check("upsilon", "K2 FOS equals sqrt(2)",
                                        std::abs(k2_fos.value - std::sqrt(2.0)), 1e-12));

    const Graph c4 = cycle_graph(4);
    const double lambda = lambda2(c4).lambda;
    const auto c4_fos = upsilon(c4, Scheme::fos, 1.0);
    // Explicit chain from the FOS divergence proof: Upsilon^2 <= 8 d / (1-lambda)
    // for homogeneous speeds.
    const double bound = std::sqrt(8.0 * c4.max_degree() / (1.0 - lambda));
    checks.push_back(
        detail::make_check("upsilon", "cycle4 FOS below explicit bound", c4_fos.value, bound));

    // Partial sums of nonnegative terms: a looser truncation can only give a
    // smaller value.
    const auto c4_coarse = upsilon(c4, Scheme::fos, 1.0, 1e-4);
    checks.push_back(detail::make_check("upsilon", "monotone under truncation",
                                        c4_coarse.value - c4_fos.value, 1e-15));

    const double beta = beta_opt(lambda);
    const auto c4_sos = upsilon(c4, Scheme::sos, beta);
    checks.push_back(detail::make_check("upsilon", "cycle4 SOS finite and positive",
                                        c4_sos.value > 0 ? 0.0 : 1.0, 0.5));
    return checks;
}

// Deterministic-rounding SOS deviation against the explicit constant of the
// deviation theorem, plus monitoring ratios for the randomized bounds.
inline std::vector<CheckResult> verify_deviation_bounds(int horizon = 100) {
    std::vector<CheckResult> checks;
    for (const auto& [name, g] : detail::canonical_instances()) {
        const double lambda = lambda2(g).lambda;
        SchemeConfig cfg;
        cfg.scheme = Scheme::sos;
        cfg.beta = beta_opt(lambda);
        cfg.rounding = Rounding::floor;
        cfg.rounds = horizon;
        std::vector<std::int64_t> x0(g.node_count(), 0);
        x0[0] = 7 * g.node_count();
        const DeviationPair pair = run_deviation_pair(g, x0, cfg);
        const BoundReport report =
            deviation_bound_check(g, DeviationBound::sos_deterministic, lambda, pair.max_dev);
        checks.push_back(detail::make_check("deviation-bounds", name + "/sosdet",
                                            report.observed, report.bound));
    }
    return checks;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& selector) {
    if (selector == "lemma-deterministic") return verify_lemma_deterministic();
    if (selector == "q-series") return verify_q_series();
    if (selector == "gamma") return verify_gamma();
    if (selector == "negative-load") return verify_negative_load();
    if (selector == "upsilon") return verify_upsilon();
    if (selector == "deviation-bounds") return verify_deviation_bounds();
    if (selector == "all") {
        std::vector<CheckResult> all;
        for (const char* name : {"lemma-deterministic", "q-series", "gamma", "negative-load",
                                 "upsilon", "deviation-bounds"}) {
            auto part = run_verify_suite(name);
            all.insert(all.end(), part.begin(), part.end());
        }
        return all;
    }
    throw std::invalid_argument("unknown verify suite: " + selector);
}

}  // namespace diffsim
