#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diffsim/rng.hpp"

namespace diffsim {

// Exact edge weight. Generators always produce 1/(max(d_i,d_j)+1); keeping the
// pair avoids drift when checking stochasticity of the diffusion matrix.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// How a graph was built. lambda2() uses this to pick closed-form spectra.
struct GraphFamily {
    enum Kind { generic, torus2d, hypercube } kind = generic;
    int a = 0;  // torus width / hypercube dimension
    int b = 0;  // torus height
};

// Immutable undirected graph with per-node speeds and per-edge weights.
// Edges are stored once with canonical orientation u < v; per-node incidence
// lists carry the edge id next to each neighbor.
class Graph {
public:
    struct Edge {
        int u, v;  // u < v
    };

    static Graph from_edges(int n, std::vector<std::pair<int, int>> edge_pairs) {
        Graph g = build(n, std::move(edge_pairs), GraphFamily{});
        if (!g.is_connected()) throw std::invalid_argument("graph: not connected");
        return g;
    }

    int node_count() const { return n_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    int degree(int v) const { return static_cast<int>(offsets_[v + 1] - offsets_[v]); }
    int max_degree() const { return max_degree_; }

    std::span<const int> neighbors(int v) const {
        return {adj_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    // Edge ids aligned with neighbors(v).
    std::span<const int> incident_edges(int v) const {
        return {incident_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    // Start of node v's slice in the CSR arrays.
    std::size_t incidence_offset(int v) const { return offsets_[v]; }

    const std::vector<Edge>& edges() const { return edges_; }
    Edge edge(int e) const { return edges_[e]; }

    Rational alpha_exact(int e) const { return alpha_[e]; }
    double alpha(int e) const { return alpha_value_[e]; }

    double speed(int v) const { return speeds_[v]; }
    double inv_speed(int v) const { return inv_speeds_[v]; }
    double total_speed() const { return total_speed_; }
    double max_speed() const { return max_speed_; }
    bool homogeneous() const { return homogeneous_; }
    const std::vector<double>& speeds() const { return speeds_; }

    const GraphFamily& family() const { return family_; }

    // Same topology with new speeds (minimum speed is 1).
    Graph with_speeds(std::vector<double> speeds) const {
        if (static_cast<int>(speeds.size()) != n_)
            throw std::invalid_argument("with_speeds: length mismatch");
        for (double s : speeds)
            if (!(s >= 1.0)) throw std::invalid_argument("with_speeds: speeds must be >= 1");
        Graph g = *this;
        g.speeds_ = std::move(speeds);
        g.init_speed_cache();
        return g;
    }

    // Row i of the diffusion matrix M. Homogeneous: M_ij = alpha_ij and
    // M_ii = 1 - sum alpha. Heterogeneous (M = I - L S^-1): M_ij = alpha_ij/s_j,
    // M_ii = 1 - (sum_j alpha_ij)/s_i, so every column of M sums to one.
    struct DiffusionRow {
        double diagonal = 0.0;
        std::vector<std::pair<int, double>> off_diagonal;  // (j, M_ij)
    };
    DiffusionRow diffusion_row(int i) const {
        if (i < 0 || i >= n_) throw std::invalid_argument("diffusion_row: bad node id");
        DiffusionRow row;
        double alpha_sum = 0.0;
        const auto nbrs = neighbors(i);
        const auto eids = incident_edges(i);
        row.off_diagonal.reserve(nbrs.size());
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double a = alpha_value_[eids[k]];
            alpha_sum += a;
            row.off_diagonal.emplace_back(nbrs[k], a * inv_speeds_[nbrs[k]]);
        }
        row.diagonal = 1.0 - alpha_sum * inv_speeds_[i];
        return row;
    }

    bool is_connected() const {
        if (n_ == 0) return false;
        std::vector<int> stack{0};
        std::vector<char> seen(n_, 0);
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int w : neighbors(u)) {
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == n_;
    }

    friend Graph torus2d(int, int);
    friend Graph hypercube(int);
    friend Graph random_regular(int, int, std::uint64_t);
    friend Graph random_geometric(int, double, std::uint64_t);
    friend Graph cycle_graph(int);
    friend Graph path_graph(int);

private:
    static Graph build(int n, std::vector<std::pair<int, int>> edge_pairs, GraphFamily family) {
        if (n <= 0) throw std::invalid_argument("graph: need at least one node");
        Graph g;
        g.n_ = n;
        g.family_ = family;

        for (auto& [u, v] : edge_pairs) {
            if (u > v) std::swap(u, v);
            if (u == v) throw std::invalid_argument("graph: self-loop");
            if (u < 0 || v >= n) throw std::invalid_argument("graph: node id out of range");
        }
        std::sort(edge_pairs.begin(), edge_pairs.end());
        if (std::adjacent_find(edge_pairs.begin(), edge_pairs.end()) != edge_pairs.end())
            throw std::invalid_argument("graph: parallel edge");

        g.edges_.reserve(edge_pairs.size());
        for (auto [u, v] : edge_pairs) g.edges_.push_back({u, v});

        std::vector<int> deg(n, 0);
        for (auto [u, v] : edge_pairs) {
            ++deg[u];
            ++deg[v];
        }
        g.offsets_.assign(n + 1, 0);
        for (int v = 0; v < n; ++v) g.offsets_[v + 1] = g.offsets_[v] + deg[v];
        g.adj_.resize(g.offsets_[n]);
        g.incident_.resize(g.offsets_[n]);
        std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
        for (int e = 0; e < static_cast<int>(g.edges_.size()); ++e) {
            const auto [u, v] = g.edges_[e];
            g.adj_[cursor[u]] = v;
            g.incident_[cursor[u]++] = e;
            g.adj_[cursor[v]] = u;
            g.incident_[cursor[v]++] = e;
        }
        // Neighbor lists come out sorted because edges were sorted per endpoint
        // only for u; sort each list (with its edge ids) to keep the invariant.
        for (int v = 0; v < n; ++v) {
            const std::size_t lo = g.offsets_[v], hi = g.offsets_[v + 1];
            std::vector<std::pair<int, int>> tmp;
            tmp.reserve(hi - lo);
            for (std::size_t k = lo; k < hi; ++k) tmp.emplace_back(g.adj_[k], g.incident_[k]);
            std::sort(tmp.begin(), tmp.end());
            for (std::size_t k = lo; k < hi; ++k) {
                g.adj_[k] = tmp[k - lo].first;
                g.incident_[k] = tmp[k - lo].second;
            }
        }

        g.max_degree_ = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
        g.alpha_.reserve(g.edges_.size());
        g.alpha_value_.reserve(g.edges_.size());
        for (auto [u, v] : g.edges_) {
            const std::int64_t den = std::max(deg[u], deg[v]) + 1;
            g.alpha_.push_back(Rational{1, den});
            g.alpha_value_.push_back(1.0 / static_cast<double>(den));
        }

        g.speeds_.assign(n, 1.0);
        g.init_speed_cache();
        return g;
    }

    void init_speed_cache() {
        inv_speeds_.resize(speeds_.size());
        total_speed_ = 0.0;
        max_speed_ = 0.0;
        homogeneous_ = true;
        for (std::size_t i = 0; i < speeds_.size(); ++i) {
            inv_speeds_[i] = 1.0 / speeds_[i];
            total_speed_ += speeds_[i];
            max_speed_ = std::max(max_speed_, speeds_[i]);
            if (speeds_[i] != 1.0) homogeneous_ = false;
        }
    }

    int n_ = 0;
    int max_degree_ = 0;
    GraphFamily family_;
    std::vector<std::size_t> offsets_;
    std::vector<int> adj_;
    std::vector<int> incident_;
    std::vector<Edge> edges_;
    std::vector<Rational> alpha_;
    std::vector<double> alpha_value_;
    std::vector<double> speeds_;
    std::vector<double> inv_speeds_;
    double total_speed_ = 0.0;
    double max_speed_ = 0.0;
    bool homogeneous_ = true;
};

// Two-dimensional torus, node id = row*width + col, 4-neighborhood with
// periodic boundary. Dimensions below 3 would create parallel edges.
inline Graph torus2d(int width, int height) {
    if (width < 3 || height < 3) throw std::invalid_argument("torus2d: dimensions must be >= 3");
    const std::int64_t n64 = static_cast<std::int64_t>(width) * height;
    if (n64 > (std::int64_t{1} << 31) - 1) throw std::invalid_argument("torus2d: too large");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(2) * n64);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const int id = r * width + c;
            edges.emplace_back(id, r * width + (c + 1) % width);
            edges.emplace_back(id, ((r + 1) % height) * width + c);
        }
    }
    return Graph::build(static_cast<int>(n64), std::move(edges),
                        GraphFamily{GraphFamily::torus2d, width, height});
}

// Hypercube on 2^dimension nodes; i ~ j iff ids differ in exactly one bit.
inline Graph hypercube(int dimension) {
    if (dimension < 1) throw std::invalid_argument("hypercube: dimension must be >= 1");
    if (dimension > 30) throw std::invalid_argument("hypercube: dimension above 30 refused");
    const int n = 1 << dimension;
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(n / 2) * dimension);
    for (int v = 0; v < n; ++v)
        for (int bit = 0; bit < dimension; ++bit) {
            const int w = v ^ (1 << bit);
            if (v < w) edges.emplace_back(v, w);
        }
    return Graph::build(n, std::move(edges), GraphFamily{GraphFamily::hypercube, dimension, 0});
}

// Simple d-regular graph via configuration-model stub pairing. A drawn stub
// pair that would form a self-loop or parallel edge is redrawn; if the pairing
// deadlocks (or the result is disconnected) the whole pairing restarts.
// Rejecting entire pairings on any collision, as stated naively, has success
// probability ~exp(-(d^2-1)/4) and can never finish for d around 20.
inline Graph random_regular(int n, int d, std::uint64_t seed) {
    if (n <= 0 || d <= 0) throw std::invalid_argument("random_regular: n, d must be positive");
    if (d >= n) throw std::invalid_argument("random_regular: need d < n");
    if ((static_cast<std::int64_t>(n) * d) % 2 != 0)
        throw std::invalid_argument("random_regular: n*d must be even");

    const int max_attempts = 200;
    SplitMix64 rng(substream_seed(seed, 0x5e6u, 0));
    std::vector<int> stubs;
    std::vector<int> adj_flat(static_cast<std::size_t>(n) * d);
    std::vector<int> adj_count(n);

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        stubs.clear();
        stubs.reserve(static_cast<std::size_t>(n) * d);
        for (int v = 0; v < n; ++v)
            for (int k = 0; k < d; ++k) stubs.push_back(v);
        std::fill(adj_count.begin(), adj_count.end(), 0);

        bool stuck = false;
        std::size_t live = stubs.size();
        while (live > 0) {
            int failures = 0;
            int u = -1, v = -1;
            std::size_t iu = 0, iv = 0;
            for (;;) {
                iu = rng.next_below(live);
                iv = rng.next_below(live - 1);
                if (iv >= iu) ++iv;
                u = stubs[iu];
                v = stubs[iv];
                bool suitable = u != v;
                if (suitable) {
                    const int* row = adj_flat.data() + static_cast<std::size_t>(u) * d;
                    for (int k = 0; k < adj_count[u]; ++k)
                        if (row[k] == v) {
                            suitable = false;
                            break;
                        }
                }
                if (suitable) break;
                if (++failures > 1000) {
                    stuck = true;
                    break;
                }
            }
            if (stuck) break;
            adj_flat[static_cast<std::size_t>(u) * d + adj_count[u]++] = v;
            adj_flat[static_cast<std::size_t>(v) * d + adj_count[v]++] = u;
            if (iu < iv) std::swap(iu, iv);
            stubs[iu] = stubs[live - 1];
            stubs[iv] = stubs[live - 2];
            live -= 2;
        }
        if (stuck) continue;

        std::vector<std::pair<int, int>> edges;
        edges.reserve(static_cast<std::size_t>(n) * d / 2);
        for (int u = 0; u < n; ++u)
            for (int k = 0; k < d; ++k) {
                const int v = adj_flat[static_cast<std::size_t>(u) * d + k];
                if (u < v) edges.emplace_back(u, v);
            }
        Graph g = Graph::build(n, std::move(edges), GraphFamily{});
        if (g.is_connected()) return g;
    }
    throw std::runtime_error("random_regular: gave up after bounded resampling attempts");
}

// Random geometric graph on [0, sqrt(n)]^2; i ~ j iff euclidean distance <=
// radius. Every node of a non-giant component then gains one edge to its
// nearest node in the giant component, so the result is always connected.
inline Graph random_geometric(int n, double radius, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("random_geometric: need n >= 2");
    if (!(radius > 0.0)) throw std::invalid_argument("random_geometric: radius must be positive");

    const double side = std::sqrt(static_cast<double>(n));
    std::vector<double> xs(n), ys(n);
    SplitMix64 rng(substream_seed(seed, 0x9e0u, 0));
    for (int v = 0; v < n; ++v) {
        xs[v] = rng.next_double() * side;
        ys[v] = rng.next_double() * side;
    }

    // Bucket grid with cell size >= radius keeps neighbor search local.
    const int cells = std::max(1, static_cast<int>(side / radius));
    const double cell_size = side / cells;
    std::vector<std::vector<int>> grid(static_cast<std::size_t>(cells) * cells);
    auto cell_of = [&](int v) {
        int cx = std::min(cells - 1, static_cast<int>(xs[v] / cell_size));
        int cy = std::min(cells - 1, static_cast<int>(ys[v] / cell_size));
        return cy * cells + cx;
    };
    for (int v = 0; v < n; ++v) grid[cell_of(v)].push_back(v);

    const double r2 = radius * radius;
    auto dist2 = [&](int a, int b) {
        const double dx = xs[a] - xs[b], dy = ys[a] - ys[b];
        return dx * dx + dy * dy;
    };
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v < n; ++v) {
        const int cx = std::min(cells - 1, static_cast<int>(xs[v] / cell_size));
        const int cy = std::min(cells - 1, static_cast<int>(ys[v] / cell_size));
        const int reach = static_cast<int>(std::ceil(radius / cell_size));
        for (int gy = std::max(0, cy - reach); gy <= std::min(cells - 1, cy + reach); ++gy)
            for (int gx = std::max(0, cx - reach); gx <= std::min(cells - 1, cx + reach); ++gx)
                for (int w : grid[static_cast<std::size_t>(gy) * cells + gx])
                    if (v < w && dist2(v, w) <= r2) edges.emplace_back(v, w);
    }

    // Connectivity repair against the largest component.
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    {
        std::vector<int> stack;
        std::vector<std::vector<int>> adj(n);
        for (auto [u, w] : edges) {
            adj[u].push_back(w);
            adj[w].push_back(u);
        }
        for (int v = 0; v < n; ++v) {
            if (comp[v] != -1) continue;
            comp[v] = ncomp;
            stack.push_back(v);
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                for (int w : adj[u])
                    if (comp[w] == -1) {
                        comp[w] = ncomp;
                        stack.push_back(w);
                    }
            }
            ++ncomp;
        }
    }
    if (ncomp > 1) {
        std::vector<int> size(ncomp, 0);
        for (int v = 0; v < n; ++v) ++size[comp[v]];
        const int giant =
            static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
        std::vector<int> giant_nodes;
        for (int v = 0; v < n; ++v)
            if (comp[v] == giant) giant_nodes.push_back(v);
        for (int v = 0; v < n; ++v) {
            if (comp[v] == giant) continue;
            int best = giant_nodes[0];
            double best_d = dist2(v, best);
            for (int w : giant_nodes) {
                const double d = dist2(v, w);
                if (d < best_d) {
                    best_d = d;
                    best = w;
                }
            }
            edges.emplace_back(std::min(v, best), std::max(v, best));
        }
    }
    return Graph::build(n, std::move(edges), GraphFamily{});
}

inline Graph cycle_graph(int n) {
    if (n < 3) throw std::invalid_argument("cycle_graph: need n >= 3");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(n);
    for (int v = 0; v < n; ++v) edges.emplace_back(v, (v + 1) % n);
    return Graph::build(n, std::move(edges), GraphFamily{});
}

inline Graph path_graph(int n) {
    if (n < 2) throw std::invalid_argument("path_graph: need n >= 2");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(n - 1);
    for (int v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
    return Graph::build(n, std::move(edges), GraphFamily{});
}

}  // namespace diffsim
