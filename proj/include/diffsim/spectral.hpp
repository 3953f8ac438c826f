#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsim/graph.hpp"
#include "diffsim/parallel.hpp"
#include "diffsim/rng.hpp"

namespace diffsim {

enum class SpectrumSource { closed_form, dense, iterative };

struct Spectrum {
    double lambda = 0.0;  // second largest |eigenvalue| of M
    SpectrumSource source = SpectrumSource::closed_form;
};

// Optimal over-relaxation parameter 2/(1+sqrt(1-lambda^2)).
inline double beta_opt(double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("beta_opt: lambda must be in [0,1)");
    return 2.0 / (1.0 + std::sqrt(1.0 - lambda * lambda));
}

// Dense diffusion matrix; heterogeneous graphs give M = I - L S^-1.
inline Eigen::MatrixXd dense_diffusion_matrix(const Graph& g) {
    const int n = g.node_count();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const auto row = g.diffusion_row(i);
        m(i, i) = row.diagonal;
        for (auto [j, value] : row.off_diagonal) m(i, j) = value;
    }
    return m;
}

struct PowerIterationOptions {
    double tol = 1e-12;      // relative eigenvalue change between sweeps
    int max_sweeps = 100000;
    int workers = 1;
    std::uint64_t seed = 0x5eed;
    int dense_cap = 4096;    // below this, use a dense symmetric solve
};

namespace detail {

// y = B x where B = S^-1/2 M S^1/2 is the symmetrization of M = I - L S^-1.
// Homogeneous speeds make B == M.
class SymmetrizedMatVec {
public:
    explicit SymmetrizedMatVec(const Graph& g) : g_(&g) {
        const int n = g.node_count();
        alpha_sum_.assign(n, 0.0);
        sqrt_s_.resize(n);
        inv_sqrt_s_.resize(n);
        for (int v = 0; v < n; ++v) {
            for (int e : g.incident_edges(v)) alpha_sum_[v] += g.alpha(e);
            sqrt_s_[v] = std::sqrt(g.speed(v));
            inv_sqrt_s_[v] = 1.0 / sqrt_s_[v];
        }
        // Per-incidence weights aligned with the CSR layout keep the hot loop
        // free of random edge-id lookups.
        alpha_inc_.reserve(static_cast<std::size_t>(2) * g.edge_count());
        for (int v = 0; v < n; ++v)
            for (int e : g.incident_edges(v)) alpha_inc_.push_back(g.alpha(e));
        scratch_.resize(n);
    }

    // Not safe for concurrent calls on the same object (shared scratch).
    void apply(std::span<const double> x, std::span<double> y, int workers = 1) const {
        const Graph& g = *g_;
        std::vector<double>& z = scratch_;  // z_j = x_j / sqrt(s_j)
        for (std::size_t j = 0; j < x.size(); ++j) z[j] = x[j] * inv_sqrt_s_[j];
        parallel_for_ranges(x.size(), workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto nbrs = g.neighbors(static_cast<int>(i));
                const double* a = alpha_inc_.data() + g.incidence_offset(static_cast<int>(i));
                double acc = 0.0;
                for (std::size_t k = 0; k < nbrs.size(); ++k) acc += a[k] * z[nbrs[k]];
                y[i] = x[i] + (acc - alpha_sum_[i] * z[i]) * inv_sqrt_s_[i];
            }
        });
    }

    // Top eigenvector of B (eigenvalue 1) is proportional to sqrt(s).
    std::vector<double> top_eigenvector() const {
        std::vector<double> v(sqrt_s_);
        double norm = 0.0;
        for (double t : v) norm += t * t;
        norm = std::sqrt(norm);
        for (double& t : v) t /= norm;
        return v;
    }

private:
    const Graph* g_;
    std::vector<double> alpha_sum_;
    std::vector<double> sqrt_s_;
    std::vector<double> inv_sqrt_s_;
    std::vector<double> alpha_inc_;
    mutable std::vector<double> scratch_;
};

inline double torus_eigenvalue(int w, int h, int a, int b) {
    const double tau = 2.0 * std::numbers::pi;
    return (1.0 + 2.0 * std::cos(tau * a / w) + 2.0 * std::cos(tau * b / h)) / 5.0;
}

}  // namespace detail

// Second largest eigenvalue of M in magnitude. Closed forms for homogeneous
// torus/hypercube, a dense symmetric solve up to opts.dense_cap nodes, and
// deflated power iteration beyond that.
inline Spectrum lambda2(const Graph& g, const PowerIterationOptions& opts = {}) {
    const int n = g.node_count();
    if (n < 2) throw std::invalid_argument("lambda2: need at least two nodes");

    if (g.homogeneous() && g.family().kind == GraphFamily::torus2d) {
        const int w = g.family().a, h = g.family().b;
        double best = 0.0;
        for (int a = 0; a < w; ++a)
            for (int b = 0; b < h; ++b) {
                if (a == 0 && b == 0) continue;
                best = std::max(best, std::abs(detail::torus_eigenvalue(w, h, a, b)));
            }
        return {best, SpectrumSource::closed_form};
    }
    if (g.homogeneous() && g.family().kind == GraphFamily::hypercube) {
        const int d = g.family().a;
        return {static_cast<double>(d - 1) / (d + 1), SpectrumSource::closed_form};
    }

    if (n <= opts.dense_cap) {
        detail::SymmetrizedMatVec mv(g);
        Eigen::MatrixXd b(n, n);
        std::vector<double> unit(n, 0.0), col(n);
        for (int j = 0; j < n; ++j) {
            unit[j] = 1.0;
            mv.apply(unit, col);
            unit[j] = 0.0;
            for (int i = 0; i < n; ++i) b(i, j) = col[i];
        }
        b = 0.5 * (b + b.transpose().eval());  // clear round-off asymmetry
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
        if (es.info() != Eigen::Success) throw std::runtime_error("lambda2: dense solve failed");
        double best = 0.0, top = -2.0;
        for (int i = 0; i < n; ++i) top = std::max(top, es.eigenvalues()[i]);
        for (int i = 0; i < n; ++i) {
            const double mu = es.eigenvalues()[i];
            if (mu == top) continue;  // the single eigenvalue 1 of a connected graph
            best = std::max(best, std::abs(mu));
        }
        return {best, SpectrumSource::dense};
    }

    // Power iteration on the symmetrized operator, deflated against sqrt(s).
    detail::SymmetrizedMatVec mv(g);
    const std::vector<double> top = mv.top_eigenvector();
    std::vector<double> v(n), w(n);
    SplitMix64 rng(opts.seed);
    for (int i = 0; i < n; ++i) v[i] = rng.next_double() - 0.5;
    auto deflate_normalize = [&](std::vector<double>& vec) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += vec[i] * top[i];
        for (int i = 0; i < n; ++i) vec[i] -= dot * top[i];
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += vec[i] * vec[i];
        norm = std::sqrt(norm);
        if (norm == 0.0) throw std::runtime_error("lambda2: degenerate start vector");
        for (int i = 0; i < n; ++i) vec[i] /= norm;
        return norm;
    };
    deflate_normalize(v);
    double estimate = 0.0;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        mv.apply(v, w, opts.workers);
        double rayleigh = 0.0;  // v is unit length
        for (int i = 0; i < n; ++i) rayleigh += v[i] * w[i];
        std::swap(v, w);
        deflate_normalize(v);
        if (sweep > 0 && std::abs(rayleigh - estimate) <= opts.tol * std::abs(rayleigh)) {
            return {std::abs(rayleigh), SpectrumSource::iterative};
        }
        estimate = rayleigh;
    }
    throw std::runtime_error("lambda2: power iteration did not converge");
}

// Full eigenbasis of M. vectors columns are right eigenvectors sorted by
// |eigenvalue| descending; inverse is vectors^-1 (the transpose when the
// graph is homogeneous, where the basis is orthonormal).
struct EigenBasis {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
    Eigen::MatrixXd inverse;
    bool orthonormal = true;
};

namespace detail {

inline void sort_basis(EigenBasis& basis) {
    const int n = static_cast<int>(basis.values.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        const double ai = std::abs(basis.values[i]), aj = std::abs(basis.values[j]);
        if (ai != aj) return ai > aj;
        if (basis.values[i] != basis.values[j]) return basis.values[i] > basis.values[j];
        return i < j;
    });
    Eigen::MatrixXd vectors(n, n), inverse(n, n);
    Eigen::VectorXd values(n);
    for (int k = 0; k < n; ++k) {
        vectors.col(k) = basis.vectors.col(order[k]);
        inverse.row(k) = basis.inverse.row(order[k]);
        values[k] = basis.values[order[k]];
    }
    basis.vectors = std::move(vectors);
    basis.inverse = std::move(inverse);
    basis.values = std::move(values);
}

// Real Fourier eigenbasis of the homogeneous torus. One basis vector per
// self-conjugate frequency, a cos/sin pair otherwise.
struct TorusBasisEntry {
    double mu;
    int a, b;
    enum Kind { self_cos, pair_cos, pair_sin } kind;
};

inline std::vector<TorusBasisEntry> torus_basis_entries(int w, int h) {
    std::vector<TorusBasisEntry> entries;
    entries.reserve(static_cast<std::size_t>(w) * h);
    for (int a = 0; a < w; ++a)
        for (int b = 0; b < h; ++b) {
            const int ca = (w - a) % w, cb = (h - b) % h;
            if (std::make_pair(ca, cb) < std::make_pair(a, b)) continue;  // conjugate seen
            const double mu = torus_eigenvalue(w, h, a, b);
            if (ca == a && cb == b) {
                entries.push_back({mu, a, b, TorusBasisEntry::self_cos});
            } else {
                entries.push_back({mu, a, b, TorusBasisEntry::pair_cos});
                entries.push_back({mu, a, b, TorusBasisEntry::pair_sin});
            }
        }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
        const double ax = std::abs(x.mu), ay = std::abs(y.mu);
        if (ax != ay) return ax > ay;
        if (x.mu != y.mu) return x.mu > y.mu;
        return false;
    });
    return entries;
}

}  // namespace detail

inline EigenBasis eigenbasis(const Graph& g, int cap = 4096) {
    const int n = g.node_count();
    if (g.homogeneous() && g.family().kind == GraphFamily::torus2d) {
        const int w = g.family().a, h = g.family().b;
        const auto entries = detail::torus_basis_entries(w, h);
        EigenBasis basis;
        basis.vectors.resize(n, n);
        basis.values.resize(n);
        const double tau = 2.0 * std::numbers::pi;
        for (int k = 0; k < n; ++k) {
            const auto& ent = entries[k];
            basis.values[k] = ent.mu;
            const double scale = ent.kind == detail::TorusBasisEntry::self_cos
                                     ? 1.0 / std::sqrt(static_cast<double>(n))
                                     : std::sqrt(2.0 / n);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const double phase =
                        tau * (static_cast<double>(ent.a) * c / w + static_cast<double>(ent.b) * r / h);
                    const double val = ent.kind == detail::TorusBasisEntry::pair_sin
                                           ? std::sin(phase)
                                           : std::cos(phase);
                    basis.vectors(r * w + c, k) = scale * val;
                }
        }
        basis.inverse = basis.vectors.transpose();
        basis.orthonormal = true;
        return basis;
    }

    if (n > cap) throw std::invalid_argument("eigenbasis: graph above dense cap");
    detail::SymmetrizedMatVec mv(g);
    Eigen::MatrixXd b(n, n);
    {
        std::vector<double> unit(n, 0.0), col(n);
        for (int j = 0; j < n; ++j) {
            unit[j] = 1.0;
            mv.apply(unit, col);
            unit[j] = 0.0;
            for (int i = 0; i < n; ++i) b(i, j) = col[i];
        }
    }
    b = 0.5 * (b + b.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenbasis: dense solve failed");

    EigenBasis basis;
    basis.values = es.eigenvalues();
    if (g.homogeneous()) {
        basis.vectors = es.eigenvectors();
        basis.inverse = basis.vectors.transpose();
        basis.orthonormal = true;
    } else {
        // B = S^-1/2 M S^1/2 = U D U^T, so V = S^1/2 U and V^-1 = U^T S^-1/2.
        Eigen::VectorXd sqrt_s(n);
        for (int i = 0; i < n; ++i) sqrt_s[i] = std::sqrt(g.speed(i));
        basis.vectors = sqrt_s.asDiagonal() * es.eigenvectors();
        basis.inverse = es.eigenvectors().transpose() * sqrt_s.cwiseInverse().asDiagonal();
        basis.orthonormal = false;
    }
    detail::sort_basis(basis);
    return basis;
}

// Coefficients of x in the eigenbasis: the solution of V a = x.
template <typename LoadT>
Eigen::VectorXd load_coefficients(const EigenBasis& basis, std::span<const LoadT> x) {
    const int n = static_cast<int>(basis.values.size());
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("load_coefficients: dimension mismatch");
    Eigen::VectorXd xv(n);
    for (int i = 0; i < n; ++i) xv[i] = static_cast<double>(x[i]);
    return basis.inverse * xv;
}

// 1-based position of the leading coefficient. The stationary coefficient
// (position 1) encodes total load and never decays, so it is excluded.
inline int leading_coefficient(const Eigen::VectorXd& a) {
    if (a.size() < 2) throw std::invalid_argument("leading_coefficient: need >= 2 coefficients");
    int best = 2;
    for (int i = 2; i <= static_cast<int>(a.size()); ++i)
        if (std::abs(a[i - 1]) > std::abs(a[best - 1])) best = i;
    return best;
}

// Streams eigen-coefficients of load snapshots. Uses the separable Fourier
// transform for tori of any size and a dense basis otherwise; only the dense
// path materializes an n x n matrix.
class CoefficientTracker {
public:
    static CoefficientTracker make(const Graph& g, int cap = 4096) {
        CoefficientTracker t;
        if (g.homogeneous() && g.family().kind == GraphFamily::torus2d) {
            t.torus_w_ = g.family().a;
            t.torus_h_ = g.family().b;
            t.entries_ = detail::torus_basis_entries(t.torus_w_, t.torus_h_);
        } else {
            t.basis_ = eigenbasis(g, cap);
        }
        t.n_ = g.node_count();
        return t;
    }

    int size() const { return n_; }

    Eigen::VectorXd values() const {
        if (entries_.empty()) return basis_.values;
        Eigen::VectorXd mu(n_);
        for (int k = 0; k < n_; ++k) mu[k] = entries_[k].mu;
        return mu;
    }

    template <typename LoadT>
    Eigen::VectorXd coefficients(std::span<const LoadT> x) const {
        if (static_cast<int>(x.size()) != n_)
            throw std::invalid_argument("coefficients: dimension mismatch");
        if (entries_.empty()) return load_coefficients(basis_, x);

        const int w = torus_w_, h = torus_h_;
        using cd = std::complex<double>;
        std::vector<cd> tw_w(w), tw_h(h);
        const double tau = 2.0 * std::numbers::pi;
        for (int k = 0; k < w; ++k) tw_w[k] = std::polar(1.0, tau * k / w);
        for (int k = 0; k < h; ++k) tw_h[k] = std::polar(1.0, tau * k / h);

        // F(a,b) = sum_{r,c} x(r,c) e^{i 2 pi (a c / w + b r / h)}, row pass then column pass.
        std::vector<cd> rows(static_cast<std::size_t>(h) * w);
        for (int r = 0; r < h; ++r)
            for (int a = 0; a < w; ++a) {
                cd acc = 0.0;
                for (int c = 0; c < w; ++c)
                    acc += static_cast<double>(x[static_cast<std::size_t>(r) * w + c]) *
                           tw_w[static_cast<std::size_t>(a) * c % w];
                rows[static_cast<std::size_t>(r) * w + a] = acc;
            }
        std::vector<cd> f(static_cast<std::size_t>(h) * w);
        for (int a = 0; a < w; ++a)
            for (int b = 0; b < h; ++b) {
                cd acc = 0.0;
                for (int r = 0; r < h; ++r)
                    acc += rows[static_cast<std::size_t>(r) * w + a] *
                           tw_h[static_cast<std::size_t>(b) * r % h];
                f[static_cast<std::size_t>(b) * w + a] = acc;
            }

        Eigen::VectorXd coeffs(n_);
        const double self_scale = 1.0 / std::sqrt(static_cast<double>(n_));
        const double pair_scale = std::sqrt(2.0 / n_);
        for (int k = 0; k < n_; ++k) {
            const auto& ent = entries_[k];
            const cd fab = f[static_cast<std::size_t>(ent.b) * w + ent.a];
            switch (ent.kind) {
                case detail::TorusBasisEntry::self_cos: coeffs[k] = self_scale * fab.real(); break;
                case detail::TorusBasisEntry::pair_cos: coeffs[k] = pair_scale * fab.real(); break;
                case detail::TorusBasisEntry::pair_sin: coeffs[k] = pair_scale * fab.imag(); break;
            }
        }
        return coeffs;
    }

private:
    int n_ = 0;
    int torus_w_ = 0, torus_h_ = 0;
    std::vector<detail::TorusBasisEntry> entries_;  // torus path
    EigenBasis basis_;                              // dense path
};

}  // namespace diffsim
