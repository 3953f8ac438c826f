// Acceptance suite: every criterion prints one [PASS]/[FAIL] line. The
// default invocation runs the desk-scale variants; --long runs the full
// 1000x1000 torus experiments (several minutes).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "diffsim/diffusion.hpp"
#include "diffsim/graph.hpp"
#include "diffsim/io.hpp"
#include "diffsim/metrics.hpp"
#include "diffsim/render.hpp"
#include "diffsim/spectral.hpp"
#include "diffsim/theory.hpp"
#include "diffsim/verify.hpp"

namespace fs = std::filesystem;
using namespace diffsim;

namespace {

int g_failures = 0;
int g_workers = 8;

void criterion(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct Trajectory {
    std::vector<RoundRecord> records;
    bool conserved = true;  // exact total-load conservation, checked per round
    std::vector<double> center_load;  // optional per-round probe
};

Trajectory run_discrete(const Graph& g, SchemeConfig cfg, std::int64_t corner_factor,
                        int center_probe = -1) {
    std::vector<std::int64_t> x0(g.node_count(), 0);
    x0[0] = corner_factor * g.node_count();
    const std::int64_t total0 = x0[0];
    DiscreteSimulation sim(g, std::move(x0), cfg, g_workers);
    Trajectory traj;
    traj.records.reserve(cfg.rounds);
    for (int t = 0; t < cfg.rounds; ++t) {
        const RoundRecord rec = sim.step();
        traj.records.push_back(rec);
        if (static_cast<std::int64_t>(rec.total_load) != total0) traj.conserved = false;
        if (center_probe >= 0)
            traj.center_load.push_back(static_cast<double>(sim.load()[center_probe]));
    }
    return traj;
}

double min_over(const std::vector<RoundRecord>& recs, int from, int to,
                double RoundRecord::*field) {
    double best = std::numeric_limits<double>::infinity();
    for (int t = from; t < to && t < static_cast<int>(recs.size()); ++t)
        best = std::min(best, recs[t].*field);
    return best;
}

// Rounds where max_local_diff jumps against the recent trend: a rising edge
// at least 15% above the minimum of the previous 20 rounds. Calibrated on the
// 100x100 proxy, where the wavefront collapse lifts the otherwise decaying
// series by 20-30%.
std::vector<int> spike_rounds(const std::vector<RoundRecord>& recs) {
    std::vector<int> spikes;
    for (int r = 1; r < static_cast<int>(recs.size()); ++r) {
        const int lo = std::max(0, r - 20);
        double recent_min = std::numeric_limits<double>::infinity();
        for (int u = lo; u < r; ++u) recent_min = std::min(recent_min, recs[u].max_local_diff);
        if (recs[r].max_local_diff > recs[r - 1].max_local_diff &&
            recs[r].max_local_diff >= 1.15 * recent_min)
            spikes.push_back(r);
    }
    return spikes;
}

int first_round_with_load(const std::vector<double>& center_load) {
    for (int t = 0; t < static_cast<int>(center_load.size()); ++t)
        if (center_load[t] != 0.0) return t;
    return -1;
}

// ---------------------------------------------------------------------------

void criterion_1_beta_golden() {
    bool pass = true;
    std::string detail;

    const double beta_torus_1000 = beta_opt(lambda2(torus2d(1000, 1000)).lambda);
    const double beta_torus_100 = beta_opt(lambda2(torus2d(100, 100)).lambda);
    pass &= std::abs(beta_torus_1000 - 1.9920836447) < 1e-6;
    pass &= std::abs(beta_torus_100 - 1.9235874877) < 1e-6;
    {
        const double beta_hc = beta_opt(lambda2(hypercube(20)).lambda);
        pass &= std::abs(beta_hc - 1.4026054847) < 1e-6;
        detail = "torus1000=" + fmt(beta_torus_1000) + " torus100=" + fmt(beta_torus_100) +
                 " hypercube20=" + fmt(beta_hc);
    }

    // The 5% beta window tolerates |lambda| error near 1.5e-1 for the random
    // regular graph and 3e-3 for the geometric one; the stopping tolerances
    // below leave residual error well inside those slacks without the long
    // tail of sweeps a 1e-12 stop would spend crawling along the bulk edge.
    PowerIterationOptions opts;
    opts.tol = 1e-4;
    opts.workers = g_workers;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Graph g = random_regular(1000000, 19, seed);
        const double beta = beta_opt(lambda2(g, opts).lambda);
        pass &= std::abs(beta - 1.0651965147) < 0.05 * 1.0651965147;
        if (seed == 1) detail += " regular=" + fmt(beta);
    }
    opts.tol = 1e-8;
    const double radius = std::pow(std::log(1e4), 0.25);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Graph g = random_geometric(10000, radius, seed);
        const double beta = beta_opt(lambda2(g, opts).lambda);
        pass &= std::abs(beta - 1.9554636334) < 0.05 * 1.9554636334;
        if (seed == 1) detail += " geometric=" + fmt(beta);
    }
    criterion(1, "beta golden values", pass, detail);
}

void criterion_2_deviation_identity() {
    const auto checks = verify_lemma_deterministic(/*seeds=*/20, /*horizon=*/20);
    double worst = 0.0;
    bool pass = true;
    for (const auto& c : checks) {
        worst = std::max(worst, c.observed);
        pass &= c.pass;
    }
    criterion(2, "deviation identity exact to 1e-9", pass, "max residual " + fmt(worst));
}

void criterion_3_q_series() {
    bool pass = true;
    std::string detail;
    for (const auto& c : verify_q_series(/*instances=*/50)) {
        pass &= c.pass;
        detail += c.instance + "=" + fmt(c.observed) + " ";
    }
    for (const auto& c : verify_gamma()) pass &= c.pass;
    criterion(3, "Q-series invariants", pass, detail);
}

void criterion_5_to_8(bool long_mode) {
    // --- Criterion 5: SOS beats FOS to potential/n < 1 on the 100x100 torus.
    const Graph torus100 = torus2d(100, 100);
    const double lambda100 = lambda2(torus100).lambda;
    const double beta100 = beta_opt(lambda100);
    bool pass5 = true, conserved = true;
    if (!long_mode) {
        // Pure randomized SOS never reaches potential/n < 1: its rounding
        // noise plateaus near 6 (the paper-consistent remaining imbalance the
        // plateau criterion below checks for). The criterion is asserted as
        // stated; the detail line also reports the convergence ordering at a
        // threshold above both noise floors, where SOS does win.
        std::string detail5;
        struct Reach {
            int below_one;
            int below_hundred;
            double floor;
        };
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto reach = [&](Scheme scheme, int cap) {
                SchemeConfig cfg;
                cfg.scheme = scheme;
                cfg.beta = beta100;
                cfg.rounding = Rounding::randomized;
                cfg.rounds = cap;
                cfg.seed = seed;
                std::vector<std::int64_t> x0(torus100.node_count(), 0);
                x0[0] = 1000LL * torus100.node_count();
                DiscreteSimulation sim(torus100, x0, cfg, g_workers);
                Reach r{cap + 1, cap + 1, std::numeric_limits<double>::infinity()};
                for (int t = 0; t < cap; ++t) {
                    const RoundRecord rec = sim.step();
                    if (static_cast<std::int64_t>(rec.total_load) != x0[0]) conserved = false;
                    r.floor = std::min(r.floor, rec.potential_over_n);
                    if (rec.potential_over_n < 100.0 && r.below_hundred > cap)
                        r.below_hundred = t + 1;
                    if (rec.potential_over_n < 1.0) {
                        r.below_one = t + 1;
                        break;
                    }
                }
                return r;
            };
            const Reach sos = reach(Scheme::sos, 20000);
            const Reach fos = reach(Scheme::fos, 60000);
            pass5 &= sos.below_one < fos.below_one && sos.below_one <= 20000 &&
                     fos.below_one <= 60000;
            if (seed == 1)
                detail5 = "seed1: rounds to potential/n<1: sos=" +
                          (sos.below_one > 20000 ? "never (floor " + fmt(sos.floor) + ")"
                                                 : std::to_string(sos.below_one)) +
                          " fos=" + std::to_string(fos.below_one) +
                          "; to potential/n<100: sos=" + std::to_string(sos.below_hundred) +
                          " fos=" + std::to_string(fos.below_hundred);
        }
        criterion(5, "SOS beats FOS to potential/n < 1 (5 seeds)", pass5, detail5);
    }

    if (!long_mode) {
        // --- Criterion 6 proxy: strict post-switch drop on the 100x100 torus.
        SchemeConfig cfg;
        cfg.scheme = Scheme::sos;
        cfg.beta = beta100;
        cfg.rounding = Rounding::randomized;
        cfg.switch_at = 500;
        cfg.rounds = 2000;
        cfg.seed = 11;
        const Trajectory switched = run_discrete(torus100, cfg, 1000);
        conserved &= switched.conserved;
        const double mld_pre = min_over(switched.records, 400, 500, &RoundRecord::max_local_diff);
        const double mld_post =
            min_over(switched.records, 500, 2000, &RoundRecord::max_local_diff);
        const double maa_pre = min_over(switched.records, 400, 500, &RoundRecord::max_above_avg);
        const double maa_post =
            min_over(switched.records, 500, 2000, &RoundRecord::max_above_avg);
        const bool pass6 = mld_post < mld_pre && maa_post < maa_pre;
        criterion(6, "switch-to-FOS drop (100x100 proxy)", pass6,
                  "mld " + fmt(mld_pre) + "->" + fmt(mld_post) + ", maa " + fmt(maa_pre) + "->" +
                      fmt(maa_post));

        // --- Criterion 7 proxy: pure SOS keeps a larger remaining imbalance.
        SchemeConfig pure_cfg = cfg;
        pure_cfg.switch_at.reset();
        const Trajectory pure = run_discrete(torus100, pure_cfg, 1000, 50 * 100 + 50);
        conserved &= pure.conserved;
        std::vector<double> mavg_pure, mavg_switched;
        for (const auto& r : pure.records) mavg_pure.push_back(r.max_above_avg);
        for (const auto& r : switched.records) mavg_switched.push_back(r.max_above_avg);
        const auto v_pure = remaining_imbalance(mavg_pure);
        const auto v_switched = remaining_imbalance(mavg_switched);
        const bool pass7 = v_pure.converged_at.has_value() &&
                           v_switched.converged_at.has_value() &&
                           v_pure.remaining_imbalance > v_switched.remaining_imbalance;
        criterion(7, "pure-SOS imbalance exceeds switched run (100x100 proxy)", pass7,
                  "pure=" + fmt(v_pure.remaining_imbalance) +
                      " switched=" + fmt(v_switched.remaining_imbalance));

        // --- Criterion 8 proxy: wavefront monitoring only.
        const int first_center = first_round_with_load(pure.center_load);
        const auto spikes = spike_rounds(pure.records);
        std::string near_spikes;
        for (int s : spikes)
            if (std::abs(s - first_center) <= 100) near_spikes += std::to_string(s) + " ";
        if (near_spikes.empty()) near_spikes = "none ";
        criterion(8, "wavefront discontinuity (100x100 proxy, monitoring)", true,
                  "center first load at round " + std::to_string(first_center) +
                      ", spikes within +-100: " + near_spikes + "(recorded, not pass/fail)");

        criterion(4, "conservation and antisymmetry on criteria 5-8 trajectories", conserved,
                  "total load exact every round; flows and errors stored once per undirected "
                  "edge, antisymmetry structural");
        return;
    }

    // --- Long mode: full-scale 1000x1000 experiments.
    const Graph torus1000 = torus2d(1000, 1000);
    const double beta1000 = beta_opt(lambda2(torus1000).lambda);

    SchemeConfig cfg;
    cfg.scheme = Scheme::sos;
    cfg.beta = beta1000;
    cfg.rounding = Rounding::randomized;
    cfg.switch_at = 3000;
    cfg.rounds = 4000;
    cfg.seed = 1;
    const Trajectory switched = run_discrete(torus1000, cfg, 1000);
    const double final_mld = switched.records.back().max_local_diff;
    const double final_maa = switched.records.back().max_above_avg;
    criterion(6, "switch-to-FOS drop (1000x1000, SOS 3000 + FOS 1000)",
              final_mld <= 5.0 && final_maa <= 8.0,
              "final mld=" + fmt(final_mld) + " maa=" + fmt(final_maa));

    SchemeConfig pure_cfg = cfg;
    pure_cfg.switch_at.reset();
    pure_cfg.rounds = 5000;
    const Trajectory pure = run_discrete(torus1000, pure_cfg, 1000, 500 * 1000 + 500);
    const double maa_min = min_over(pure.records, 0, 5000, &RoundRecord::max_above_avg);
    criterion(7, "SOS plateau (1000x1000, 5000 rounds)", maa_min >= 10.0,
              "min max_above_avg=" + fmt(maa_min));

    const int first_center = first_round_with_load(pure.center_load);
    const auto spikes = spike_rounds(pure.records);
    bool spike_near = false;
    int nearest = -1;
    for (int s : spikes) {
        if (nearest < 0 || std::abs(s - first_center) < std::abs(nearest - first_center))
            nearest = s;
        if (std::abs(s - first_center) <= 100) spike_near = true;
    }
    criterion(8, "wavefront discontinuity (1000x1000)", first_center > 0 && spike_near,
              "center first load at round " + std::to_string(first_center) +
                  ", nearest spike at " + std::to_string(nearest));

    criterion(4, "conservation and antisymmetry on criteria 6-8 trajectories",
              switched.conserved && pure.conserved,
              "total load exact every round on both 1000x1000 runs");
}

void criterion_9_negative_load() {
    bool pass = true;
    std::string detail;
    for (const auto& c : verify_negative_load(/*runs=*/100)) {
        pass &= c.pass;
        detail += c.instance + " margin=" + fmt(c.observed) + "; ";
    }
    criterion(9, "negative-load bounds over randomized SOS sweeps", pass, detail);
}

void criterion_10_sosdet_bound() {
    bool pass = true;
    std::string detail;
    for (const auto& c : verify_deviation_bounds(/*horizon=*/100)) {
        pass &= c.pass;
        detail += c.instance + " " + fmt(c.observed) + "<=" + fmt(c.bound) + "; ";
    }
    criterion(10, "deterministic-rounding SOS deviation bound", pass, detail);
}

void criterion_11_coefficient_dynamics() {
    double worst = 0.0;
    for (const Graph& g : {cycle_graph(4), torus2d(10, 10)}) {
        const auto tracker = CoefficientTracker::make(g);
        const Eigen::VectorXd mu = tracker.values();
        std::vector<double> x0(g.node_count(), 0.0);
        x0[0] = 1000.0 * g.node_count();
        SchemeConfig cfg;
        cfg.rounds = 30;
        ContinuousSimulation sim(g, x0, cfg);
        Eigen::VectorXd prev = tracker.coefficients(std::span<const double>(sim.load()));
        for (int t = 0; t < 30; ++t) {
            sim.step();
            const Eigen::VectorXd cur = tracker.coefficients(std::span<const double>(sim.load()));
            for (int i = 0; i < cur.size(); ++i)
                worst = std::max(worst, std::abs(cur[i] - mu[i] * prev[i]));
            prev = cur;
        }
    }
    criterion(11, "coefficient dynamics a_i(t+1) = mu_i a_i(t)", worst <= 1e-8,
              "max residual " + fmt(worst));
}

void criterion_12_reproducibility() {
    const fs::path base = fs::temp_directory_path() / "diffsim_acceptance";
    fs::remove_all(base);
    auto run_with_workers = [&](int workers) {
        const fs::path dir = base / ("w" + std::to_string(workers));
        fs::create_directories(dir / "frames");
        const Graph g = torus2d(16, 16);
        SchemeConfig cfg;
        cfg.scheme = Scheme::sos;
        cfg.beta = beta_opt(lambda2(g).lambda);
        cfg.rounding = Rounding::randomized;
        cfg.rounds = 200;
        cfg.seed = 42;
        std::vector<std::int64_t> x0(g.node_count(), 0);
        x0[0] = 1000LL * g.node_count();
        DiscreteSimulation sim(g, x0, cfg, workers);
        MetricsCsvWriter csv(dir / "metrics.csv", true);
        for (int t = 0; t < cfg.rounds; ++t) {
            csv.row(sim.step());
            if (t % 50 == 0) {
                char name[32];
                std::snprintf(name, sizeof name, "frame_%08d.pgm", t);
                write_pgm(render_adaptive(std::span<const std::int64_t>(sim.load()), 16, 16),
                          dir / "frames" / name);
            }
        }
        csv.close();
        return dir;
    };
    auto bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>()};
    };
    const fs::path d1 = run_with_workers(1);
    const fs::path d2 = run_with_workers(2);
    const fs::path d8 = run_with_workers(8);
    bool pass = bytes(d1 / "metrics.csv") == bytes(d2 / "metrics.csv") &&
                bytes(d1 / "metrics.csv") == bytes(d8 / "metrics.csv");
    for (int t : {0, 50, 100, 150}) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%08d.pgm", t);
        pass &= bytes(d1 / "frames" / name) == bytes(d2 / "frames" / name);
        pass &= bytes(d1 / "frames" / name) == bytes(d8 / "frames" / name);
    }
    criterion(12, "byte-identical CSV and PGM across 1, 2, 8 workers", pass, "");
}

}  // namespace

int main(int argc, char** argv) {
    bool long_mode = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--long") == 0) long_mode = true;

    if (long_mode) {
        std::cout << "acceptance --long: full-scale 1000x1000 torus criteria 6-8\n";
        criterion_5_to_8(true);
    } else {
        criterion_1_beta_golden();
        criterion_2_deviation_identity();
        criterion_3_q_series();
        criterion_5_to_8(false);  // also reports criterion 4
        criterion_9_negative_load();
        criterion_10_sosdet_bound();
        criterion_11_coefficient_dynamics();
        criterion_12_reproducibility();
    }

    if (g_failures == 0) {
        std::cout << "acceptance: all criteria passed" << std::endl;
        return 0;
    }
    std::cout << "acceptance: " << g_failures << " criteria FAILED" << std::endl;
    return 1;
}
