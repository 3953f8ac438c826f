#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsim/diffusion.hpp"
#include "diffsim/graph.hpp"
#include "diffsim/spectral.hpp"

namespace diffsim {

// Error-propagation matrices of SOS:
//   Q(0) = I, Q(1) = beta M, Q(t) = beta M Q(t-1) + (1-beta) Q(t-2).
struct QSeries {
    double beta = 0.0;
    std::vector<Eigen::MatrixXd> q;  // q[t], t = 0..T

    int horizon() const { return static_cast<int>(q.size()) - 1; }
    const Eigen::MatrixXd& at(int t) const { return q.at(t); }
};

inline QSeries q_series(const Graph& g, double beta, int horizon, int dense_cap = 4096) {
    if (g.node_count() > dense_cap) throw std::invalid_argument("q_series: above dense cap");
    if (horizon < 0) throw std::invalid_argument("q_series: negative horizon");
    const Eigen::MatrixXd m = dense_diffusion_matrix(g);
    QSeries out;
    out.beta = beta;
    out.q.reserve(horizon + 1);
    out.q.push_back(Eigen::MatrixXd::Identity(g.node_count(), g.node_count()));
    if (horizon >= 1) out.q.push_back(beta * m);
    for (int t = 2; t <= horizon; ++t)
        out.q.push_back(beta * m * out.q[t - 1] + (1.0 - beta) * out.q[t - 2]);
    return out;
}

// Closed form of the Q(t) eigenvalue attached to an M-eigenvalue lambda_j,
// valid for beta = beta_opt(lambda). Three regimes: the stationary eigenvalue,
// the double root at |lambda_j| = lambda, and the oscillatory interior where
// theta = atan2(sqrt(lambda^2-lambda_j^2), lambda_j) pins the quadrant for
// negative lambda_j.
inline double gamma_closed_form(double lambda_j, double lambda, double beta, int t) {
    if (t < 0) throw std::invalid_argument("gamma_closed_form: negative t");
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("gamma_closed_form: lambda must be in [0,1)");
    const double r = std::sqrt(beta - 1.0);
    if (lambda_j == 1.0) return (1.0 - std::pow(beta - 1.0, t + 1)) / (2.0 - beta);
    const double mag = std::abs(lambda_j);
    if (mag > lambda + 1e-12)
        throw std::invalid_argument("gamma_closed_form: |lambda_j| above lambda");
    if (std::abs(mag - lambda) <= 1e-12) {
        const double root = lambda_j >= 0.0 ? r : -r;
        return std::pow(root, t) * (t + 1);
    }
    const double theta = std::atan2(std::sqrt(lambda * lambda - lambda_j * lambda_j), lambda_j);
    const double ratio = lambda_j / std::sqrt(lambda * lambda - lambda_j * lambda_j);
    return std::pow(r, t) * (std::cos(theta * t) + std::sin(theta * t) * ratio);
}

// Contribution of one unit moved over edge (i,j) during a round on node k,
// s rounds later: zero at s = 0 and P(s-1)_{k,i} - P(s-1)_{k,j} for s >= 1,
// where the propagator P(t) is M^t for FOS and the Q(t) series for SOS (a
// unit transfer perturbs the flow memory along with the loads, which is
// exactly what Q propagates). Under this convention the deviation identity
// below telescopes exactly.
struct ContributionTable {
    int k = 0;
    Scheme scheme = Scheme::fos;
    std::vector<std::vector<double>> per_round;  // [s][edge id]
};

inline ContributionTable contributions(const Graph& g, Scheme scheme, double beta, int k,
                                       int horizon, int dense_cap = 4096) {
    if (g.node_count() > dense_cap) throw std::invalid_argument("contributions: above dense cap");
    if (k < 0 || k >= g.node_count()) throw std::invalid_argument("contributions: bad node id");
    ContributionTable table;
    table.k = k;
    table.scheme = scheme;
    table.per_round.assign(horizon + 1, std::vector<double>(g.edge_count(), 0.0));

    const Eigen::MatrixXd m = dense_diffusion_matrix(g);
    const int n = g.node_count();
    // Row k of the propagator suffices; Q(t) is a polynomial in M, so the
    // row recursion q_s = beta q_{s-1} M + (1-beta) q_{s-2} is legitimate.
    Eigen::RowVectorXd q_prev = Eigen::RowVectorXd::Zero(n);  // placeholder before Q(0)
    Eigen::RowVectorXd q_cur = Eigen::RowVectorXd::Zero(n);   // P(0) row = unit_k
    q_cur[k] = 1.0;
    for (int s = 1; s <= horizon; ++s) {
        for (int e = 0; e < g.edge_count(); ++e) {
            const auto [u, v] = g.edge(e);
            table.per_round[s][e] = q_cur[u] - q_cur[v];
        }
        Eigen::RowVectorXd next;
        if (scheme == Scheme::fos)
            next = q_cur * m;
        else if (s == 1)
            next = beta * (q_cur * m);  // Q(1) = beta M
        else
            next = beta * (q_cur * m) + (1.0 - beta) * q_prev;
        q_prev = q_cur;
        q_cur = next;
    }
    return table;
}

// Right-hand side of the deviation identity
//   x^D_k(t) - x^C_k(t) = sum_{s=1..t} sum_{{i,j} in E} e_{i,j}(t-s) Q^C_{k,i->j}(s).
// error_history[tau] holds the per-edge rounding errors of round tau in the
// canonical orientation; both factors are antisymmetric so one orientation
// per undirected edge is enough.
inline double deviation_rhs(const ContributionTable& table,
                            const std::vector<std::vector<double>>& error_history, int t) {
    if (t > static_cast<int>(error_history.size()))
        throw std::invalid_argument("deviation_rhs: error history shorter than t");
    if (t >= static_cast<int>(table.per_round.size()))
        throw std::invalid_argument("deviation_rhs: contribution table shorter than t");
    double acc = 0.0;
    for (int s = 1; s <= t; ++s) {
        const auto& errors = error_history[t - s];
        const auto& contrib = table.per_round[s];
        for (std::size_t e = 0; e < contrib.size(); ++e) acc += errors[e] * contrib[e];
    }
    return acc;
}

// Refined local divergence
//   Upsilon^C(G) = max_k ( sum_s sum_i max_{j in N(i)} (Q^C_{k,i->j}(s))^2 )^{1/2},
// truncated once a round's total contribution falls below tol times the
// accumulated mass, or at t_max.
struct UpsilonResult {
    double value = 0.0;
    int truncated_at = 0;
    bool converged = false;
};

inline UpsilonResult upsilon(const Graph& g, Scheme scheme, double beta, double tol = 1e-12,
                             int t_max = -1, int dense_cap = 4096) {
    const int n = g.node_count();
    if (n > dense_cap) throw std::invalid_argument("upsilon: above dense cap");
    if (t_max < 0) {
        const double lambda = lambda2(g).lambda;
        t_max = static_cast<int>(std::ceil(50.0 / std::max(1e-6, 1.0 - lambda)));
    }

    const Eigen::MatrixXd m = dense_diffusion_matrix(g);
    Eigen::MatrixXd propagator = Eigen::MatrixXd::Identity(n, n);  // M^s, or Q(s-1) for SOS
    Eigen::MatrixXd q_prev;
    std::vector<double> acc(n, 0.0);

    UpsilonResult result;
    for (int s = 0; s <= t_max; ++s) {
        double round_total = 0.0;
        if (scheme != Scheme::sos || s > 0) {  // SOS contributions vanish at s = 0
            for (int k = 0; k < n; ++k) {
                double sum_i = 0.0;
                for (int i = 0; i < n; ++i) {
                    double worst = 0.0;
                    for (int j : g.neighbors(i)) {
                        const double c = propagator(k, i) - propagator(k, j);
                        worst = std::max(worst, c * c);
                    }
                    sum_i += worst;
                }
                acc[k] += sum_i;
                round_total += sum_i;
            }
        }
        double acc_total = 0.0;
        for (double a : acc) acc_total += a;
        result.truncated_at = s;
        if (s > 0 && round_total <= tol * acc_total) {
            result.converged = true;
            break;
        }
        // Advance the propagator for the next round.
        if (scheme == Scheme::fos) {
            propagator = m * propagator;
        } else if (s == 0) {
            // propagator stays Q(0) = I for the s = 1 term
        } else if (s == 1) {
            q_prev = propagator;
            propagator = beta * m;  // Q(1)
        } else {
            Eigen::MatrixXd next = beta * m * propagator + (1.0 - beta) * q_prev;
            q_prev = propagator;
            propagator = next;
        }
    }
    double best = 0.0;
    for (double a : acc) best = std::max(best, a);
    result.value = std::sqrt(best);
    if (!result.converged && t_max > 0)
        throw std::runtime_error("upsilon: series not decayed by t_max");
    return result;
}

// Lower bounds on loads during SOS with optimal beta, explicit constants
// traced through the proofs:
//   end_of_round:         x(t)      >= -sqrt(n) Delta(0)
//   transient_continuous: xbreve(t) >= -(sqrt(n) Delta(0) + 16 sqrt(n) Delta(0) / sqrt(1-lambda))
//   transient_discrete:   same with the degree term, + 16 d^2 / sqrt(1-lambda)
enum class NegativeLoadVariant { end_of_round, transient_continuous, transient_discrete };

inline double negative_load_floor(int n, double delta0, double lambda, NegativeLoadVariant variant,
                                  int max_degree = 0) {
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("negative_load_floor: lambda must be in [0,1)");
    if (delta0 < 0.0) throw std::invalid_argument("negative_load_floor: Delta(0) must be >= 0");
    const double root_n = std::sqrt(static_cast<double>(n));
    const double base = root_n * delta0;
    switch (variant) {
        case NegativeLoadVariant::end_of_round: return -base;
        case NegativeLoadVariant::transient_continuous:
            return -(base + 16.0 * base / std::sqrt(1.0 - lambda));
        case NegativeLoadVariant::transient_discrete: {
            const double d2 = static_cast<double>(max_degree) * max_degree;
            return -(base + 16.0 * (base + d2) / std::sqrt(1.0 - lambda));
        }
    }
    throw std::invalid_argument("negative_load_floor: bad variant");
}

// Deviation bound comparisons between a discrete run and its continuous
// companion. The deterministic SOS bound carries the explicit constant
// 16 d sqrt(2 n s_max) / (1-lambda); the randomized bounds have no
// recoverable constant, so their reports are monitoring ratios against the
// bare bound expression.
struct BoundReport {
    std::string quantity;
    double bound = 0.0;
    double observed = 0.0;
    bool satisfied = false;
};

enum class DeviationBound { sos_deterministic, fos_randomized, sos_randomized };

inline BoundReport deviation_bound_check(const Graph& g, DeviationBound kind, double lambda,
                                         double observed_max_deviation) {
    const double d = g.max_degree();
    const double n = g.node_count();
    const double s_max = g.max_speed();
    const double gap = 1.0 - lambda;
    BoundReport report;
    report.observed = observed_max_deviation;
    switch (kind) {
        case DeviationBound::sos_deterministic:
            report.quantity = "sos deterministic deviation";
            report.bound = 16.0 * d * std::sqrt(2.0 * n * s_max) / gap;
            break;
        case DeviationBound::fos_randomized:
            report.quantity = "fos randomized deviation ratio";
            report.bound = d * std::sqrt(std::log(n) * std::max(1.0, std::log(s_max)) / gap);
            break;
        case DeviationBound::sos_randomized:
            report.quantity = "sos randomized deviation ratio";
            report.bound = d * std::max(1.0, std::log(s_max)) * std::sqrt(std::log(n)) /
                           std::pow(gap, 0.75);
            break;
    }
    report.satisfied = report.observed <= report.bound;
    return report;
}

// Paired discrete/continuous runs from the same initial load; reports the
// per-round max_k |x^D_k - x^C_k| series.
struct DeviationPair {
    std::vector<double> max_dev_per_round;
    double max_dev = 0.0;
};

inline DeviationPair run_deviation_pair(const Graph& g, const std::vector<std::int64_t>& x0,
                                        SchemeConfig discrete_cfg) {
    SchemeConfig cont_cfg = discrete_cfg;
    cont_cfg.rounding = Rounding::none;
    std::vector<double> x0d(x0.begin(), x0.end());
    DiscreteSimulation disc(g, x0, discrete_cfg);
    ContinuousSimulation cont(g, x0d, cont_cfg);
    DeviationPair pair;
    pair.max_dev_per_round.reserve(discrete_cfg.rounds);
    for (int t = 0; t < discrete_cfg.rounds; ++t) {
        disc.step();
        cont.step();
        double dev = 0.0;
        for (int i = 0; i < g.node_count(); ++i)
            dev = std::max(dev, std::abs(static_cast<double>(disc.load()[i]) - cont.load()[i]));
        pair.max_dev_per_round.push_back(dev);
        pair.max_dev = std::max(pair.max_dev, dev);
    }
    return pair;
}

}  // namespace diffsim
