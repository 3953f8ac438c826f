// Command line front end: reproducible runs of FOS/SOS diffusion load
// balancing, spectral diagnostics, frame rendering and the analytical
// verification suites.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diffsim/diffusion.hpp"
#include "diffsim/graph.hpp"
#include "diffsim/io.hpp"
#include "diffsim/metrics.hpp"
#include "diffsim/render.hpp"
#include "diffsim/spectral.hpp"
#include "diffsim/verify.hpp"

namespace fs = std::filesystem;
using namespace diffsim;

namespace {

struct GraphSpec {
    std::string text;
    std::uint64_t seed = 1;
    std::string speeds_path;
};

// family:params, e.g. torus2d:100x100, hypercube:20, regular:1000,8,
// geometric:10000,1.74, cycle:64, path:4
Graph build_graph(const GraphSpec& spec) {
    const auto colon = spec.text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("graph spec needs family:params, got '" + spec.text + "'");
    const std::string family = spec.text.substr(0, colon);
    const std::string params = spec.text.substr(colon + 1);
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= s.size(); ++i)
            if (i == s.size() || s[i] == sep) {
                parts.push_back(s.substr(start, i - start));
                start = i + 1;
            }
        return parts;
    };

    Graph g = [&] {
        if (family == "torus2d") {
            const auto parts = split(params, 'x');
            if (parts.size() != 2) throw std::invalid_argument("torus2d wants WxH");
            return torus2d(std::stoi(parts[0]), std::stoi(parts[1]));
        }
        if (family == "hypercube") return hypercube(std::stoi(params));
        if (family == "regular") {
            const auto parts = split(params, ',');
            if (parts.size() != 2) throw std::invalid_argument("regular wants N,D");
            return random_regular(std::stoi(parts[0]), std::stoi(parts[1]), spec.seed);
        }
        if (family == "geometric") {
            const auto parts = split(params, ',');
            if (parts.size() != 2) throw std::invalid_argument("geometric wants N,R");
            return random_geometric(std::stoi(parts[0]), std::stod(parts[1]), spec.seed);
        }
        if (family == "cycle") return cycle_graph(std::stoi(params));
        if (family == "path") return path_graph(std::stoi(params));
        throw std::invalid_argument("unknown graph family '" + family + "'");
    }();
    if (!spec.speeds_path.empty()) g = g.with_speeds(read_speeds(spec.speeds_path));
    return g;
}

InitSpec parse_init(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("init spec needs kind:value, got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    const std::string value = text.substr(colon + 1);
    InitSpec spec;
    if (kind == "corner") {
        spec.kind = InitSpec::corner;
        spec.value = std::stod(value);
    } else if (kind == "uniform") {
        spec.kind = InitSpec::uniform;
        spec.value = std::stod(value);
    } else if (kind == "file") {
        spec.kind = InitSpec::file;
        spec.path = value;
    } else {
        throw std::invalid_argument("unknown init kind '" + kind + "'");
    }
    return spec;
}

std::string frame_name(int round) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%08d.pgm", round);
    return buf;
}

std::string snapshot_name(int round) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%08d.txt", round);
    return buf;
}

struct RunFlags {
    GraphSpec graph;
    std::string scheme = "fos";
    std::string beta = "auto";
    std::string rounding = "randomized";
    std::optional<int> switch_at;
    int rounds = -1;
    std::uint64_t seed = 0;
    std::string init = "corner:1000";
    std::string out = "out";
    int workers = 1;
    int frame_every = 0;
    int snapshot_every = 0;
};

// Flat key=value config file; keys mirror the run flags. Values never
// override an explicitly passed flag.
void apply_config_file(const std::string& path, RunFlags& flags,
                       const std::map<std::string, std::size_t>& explicit_counts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) + " has no '='");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (explicit_counts.at(key) > 0) continue;  // flags win
        if (key == "graph") flags.graph.text = value;
        else if (key == "graph-seed") flags.graph.seed = std::stoull(value);
        else if (key == "speeds") flags.graph.speeds_path = value;
        else if (key == "scheme") flags.scheme = value;
        else if (key == "beta") flags.beta = value;
        else if (key == "rounding") flags.rounding = value;
        else if (key == "switch-at") flags.switch_at = std::stoi(value);
        else if (key == "rounds") flags.rounds = std::stoi(value);
        else if (key == "seed") flags.seed = std::stoull(value);
        else if (key == "init") flags.init = value;
        else if (key == "out") flags.out = value;
        else if (key == "workers") flags.workers = std::stoi(value);
        else if (key == "frame-every") flags.frame_every = std::stoi(value);
        else if (key == "snapshot-every") flags.snapshot_every = std::stoi(value);
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
}

double resolve_beta(const RunFlags& flags, const Graph& g) {
    if (flags.scheme != "sos") return 1.0;
    if (flags.beta != "auto") return std::stod(flags.beta);
    PowerIterationOptions opts;
    opts.workers = flags.workers;
    return beta_opt(lambda2(g, opts).lambda);
}

template <typename LoadT>
int execute_run(const RunFlags& flags, const Graph& g, const SchemeConfig& cfg) {
    const fs::path out_dir(flags.out);
    fs::create_directories(out_dir);
    if (flags.frame_every > 0) {
        if (g.family().kind != GraphFamily::torus2d)
            throw std::invalid_argument("frames are only rendered for torus2d graphs");
        fs::create_directories(out_dir / "frames");
    }
    if (flags.snapshot_every > 0) fs::create_directories(out_dir / "snapshots");

    std::vector<double> file_values;
    const InitSpec init = parse_init(flags.init);
    if (init.kind == InitSpec::file) file_values = read_value_file(init.path);
    auto x0 = initial_load<LoadT>(init, g, file_values);

    Simulation<LoadT> sim(g, std::move(x0), cfg, flags.workers);
    MetricsCsvWriter csv(out_dir / "metrics.csv", std::is_integral_v<LoadT>);
    std::vector<double> max_above_series;
    double min_transient_ever = std::numeric_limits<double>::infinity();
    for (int t = 0; t < cfg.rounds; ++t) {
        const RoundRecord rec = sim.step();
        csv.row(rec);
        max_above_series.push_back(rec.max_above_avg);
        min_transient_ever = std::min(min_transient_ever, rec.min_transient);
        if (flags.frame_every > 0 && t % flags.frame_every == 0) {
            const Frame frame = render_adaptive(std::span<const LoadT>(sim.load()),
                                                g.family().a, g.family().b);
            write_pgm(frame, out_dir / "frames" / frame_name(t));
        }
        if (flags.snapshot_every > 0 && t % flags.snapshot_every == 0)
            write_snapshot(out_dir / "snapshots" / snapshot_name(t),
                           std::span<const LoadT>(sim.load()), t);
    }
    csv.close();

    std::cout << "rounds=" << cfg.rounds << " beta=" << detail::format_double(cfg.beta)
              << " total_load=" << detail::format_double(total_load(std::span<const LoadT>(sim.load())));
    if (cfg.rounds > 0)
        std::cout << " min_transient_ever=" << detail::format_double(min_transient_ever);
    if (static_cast<int>(max_above_series.size()) >= 100) {
        const auto verdict = remaining_imbalance(max_above_series);
        if (verdict.converged_at)
            std::cout << " converged_at=" << *verdict.converged_at
                      << " remaining_imbalance=" << detail::format_double(verdict.remaining_imbalance);
        else
            std::cout << " converged_at=none";
    }
    std::cout << '\n';
    return 0;
}

int cmd_run(const RunFlags& flags) {
    const Graph g = build_graph(flags.graph);
    SchemeConfig cfg;
    cfg.scheme = flags.scheme == "sos" ? Scheme::sos : Scheme::fos;
    cfg.beta = resolve_beta(flags, g);
    cfg.switch_at = flags.switch_at;
    cfg.rounds = flags.rounds;
    cfg.seed = flags.seed;
    if (flags.rounding == "none") {
        cfg.rounding = Rounding::none;
        return execute_run<double>(flags, g, cfg);
    }
    cfg.rounding = flags.rounding == "floor" ? Rounding::floor : Rounding::randomized;
    return execute_run<std::int64_t>(flags, g, cfg);
}

int cmd_spectral(const GraphSpec& spec, int workers, double tol, const std::string& trace_dir,
                 const std::string& out) {
    const Graph g = build_graph(spec);
    PowerIterationOptions opts;
    opts.workers = workers;
    opts.tol = tol;
    const Spectrum s = lambda2(g, opts);
    std::cout << "lambda=" << detail::format_double(s.lambda)
              << " beta_opt=" << detail::format_double(beta_opt(s.lambda)) << " source="
              << (s.source == SpectrumSource::closed_form
                      ? "closed_form"
                      : s.source == SpectrumSource::dense ? "dense" : "iterative")
              << '\n';
    if (trace_dir.empty()) return 0;

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(trace_dir))
        if (entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no snapshots in " + trace_dir);

    const auto tracker = CoefficientTracker::make(g);
    fs::create_directories(out);
    TraceCsvWriter csv(fs::path(out) / "coefficients.csv");
    for (const auto& file : files) {
        const Snapshot snap = read_snapshot(file);
        const Eigen::VectorXd a =
            tracker.coefficients(std::span<const double>(snap.values));
        const int leading = leading_coefficient(a);
        const double a4 = a.size() >= 4 ? a[3] : 0.0;
        csv.row(snap.round, leading, std::abs(a[leading - 1]), a4);
    }
    return 0;
}

int cmd_verify(const std::string& selector) {
    const auto checks = run_verify_suite(selector);
    bool all_pass = true;
    for (const auto& c : checks) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.suite << ": " << c.instance
                  << " observed=" << detail::format_double(c.observed)
                  << " bound=" << detail::format_double(c.bound) << '\n';
        all_pass = all_pass && c.pass;
    }
    std::cout << (all_pass ? "verify: all checks passed\n" : "verify: FAILURES\n");
    return all_pass ? 0 : 1;
}

int cmd_render(const std::string& snapshot_dir, const std::string& out, int width, int height,
               double threshold) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(snapshot_dir))
        if (entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no snapshots in " + snapshot_dir);
    fs::create_directories(out);
    for (const auto& file : files) {
        const Snapshot snap = read_snapshot(file);
        const std::span<const double> x(snap.values);
        const Frame frame = threshold > 0.0 ? render_threshold(x, width, height, threshold)
                                            : render_adaptive(x, width, height);
        write_pgm(frame, fs::path(out) / frame_name(snap.round));
    }
    std::cout << "rendered " << files.size() << " frames\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion load balancing simulator"};
    app.require_subcommand(1);

    RunFlags run_flags;
    std::string run_config;
    auto* run = app.add_subcommand("run", "execute a load balancing run");
    std::map<std::string, CLI::Option*> run_opts;
    run_opts["graph"] = run->add_option("--graph", run_flags.graph.text,
                                        "family:params graph spec");
    run_opts["graph-seed"] =
        run->add_option("--graph-seed", run_flags.graph.seed, "seed for random graph families");
    run_opts["speeds"] = run->add_option("--speeds", run_flags.graph.speeds_path,
                                         "speed file (one value per line)");
    run_opts["scheme"] = run->add_option("--scheme", run_flags.scheme, "fos|sos")
                             ->check(CLI::IsMember({"fos", "sos"}));
    run_opts["beta"] =
        run->add_option("--beta", run_flags.beta, "SOS relaxation parameter or 'auto'");
    run_opts["rounding"] =
        run->add_option("--rounding", run_flags.rounding, "none|floor|randomized")
            ->check(CLI::IsMember({"none", "floor", "randomized"}));
    run_opts["switch-at"] =
        run->add_option("--switch-at", run_flags.switch_at, "round at which SOS becomes FOS");
    run_opts["rounds"] = run->add_option("--rounds", run_flags.rounds, "round budget");
    run_opts["seed"] = run->add_option("--seed", run_flags.seed,
                                       "master seed for randomized rounding");
    run_opts["init"] =
        run->add_option("--init", run_flags.init, "corner:F | uniform:V | file:PATH");
    run_opts["out"] = run->add_option("--out", run_flags.out, "output directory");
    run_opts["workers"] = run->add_option("--workers", run_flags.workers,
                                          "worker threads (outputs are identical)");
    run_opts["frame-every"] = run->add_option("--frame-every", run_flags.frame_every,
                                              "render a PGM frame every K rounds");
    run_opts["snapshot-every"] = run->add_option("--snapshot-every", run_flags.snapshot_every,
                                                 "write a load snapshot every K rounds");
    run->add_option("--config", run_config, "flat key=value file; explicit flags win");

    GraphSpec spectral_spec;
    int spectral_workers = 1;
    double spectral_tol = 1e-12;
    std::string trace_dir, spectral_out = "out";
    auto* spectral = app.add_subcommand("spectral", "lambda, beta_opt and coefficient traces");
    spectral->add_option("--graph", spectral_spec.text, "family:params graph spec")->required();
    spectral->add_option("--graph-seed", spectral_spec.seed, "seed for random graph families");
    spectral->add_option("--speeds", spectral_spec.speeds_path, "speed file");
    spectral->add_option("--workers", spectral_workers, "worker threads");
    spectral->add_option("--tol", spectral_tol, "power iteration stopping tolerance");
    spectral->add_option("--trace", trace_dir, "snapshot directory to trace coefficients of");
    spectral->add_option("--out", spectral_out, "output directory for the trace CSV");

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "run analytical verification suites");
    verify->add_option("suite", suite,
                       "all|lemma-deterministic|q-series|gamma|negative-load|upsilon|deviation-bounds");

    std::string render_snapshots, render_out = "out";
    int render_width = 0, render_height = 0;
    double render_cutoff = 0.0;
    auto* render = app.add_subcommand("render", "re-render frames from load snapshots");
    render->add_option("--snapshots", render_snapshots, "snapshot directory")->required();
    render->add_option("--out", render_out, "output directory");
    render->add_option("--width", render_width, "torus width")->required();
    render->add_option("--height", render_height, "torus height")->required();
    render->add_option("--threshold", render_cutoff,
                       "black-at cutoff; adaptive shading when omitted");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (!run_config.empty()) {
                std::map<std::string, std::size_t> counts;
                for (const auto& [key, opt] : run_opts) counts[key] = opt->count();
                apply_config_file(run_config, run_flags, counts);
            }
            if (run_flags.graph.text.empty())
                throw std::invalid_argument("--graph is required (flag or config)");
            if (run_flags.rounds < 0)
                throw std::invalid_argument("--rounds is required (flag or config)");
            return cmd_run(run_flags);
        }
        if (spectral->parsed())
            return cmd_spectral(spectral_spec, spectral_workers, spectral_tol, trace_dir,
                                spectral_out);
        if (verify->parsed()) return cmd_verify(suite);
        if (render->parsed())
            return cmd_render(render_snapshots, render_out, render_width, render_height,
                              render_cutoff);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
