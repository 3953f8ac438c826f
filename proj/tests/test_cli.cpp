#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli = DIFFSIM_CLI_PATH;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string capture_cli(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "diffsim_cli_out.txt";
    const std::string cmd = std::string(cli) + " " + args + " > " + tmp.string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream in(tmp);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "diffsim_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    return lines;
}

}  // namespace

TEST_CASE("run with zero rounds writes a header-only csv") {
    const fs::path out = fresh_dir("zero");
    REQUIRE(run_cli("run --graph torus2d:4x4 --rounds 0 --out " + out.string()) == 0);
    REQUIRE(count_lines(out / "metrics.csv") == 1);
}

TEST_CASE("run produces one csv row per round with constant total load") {
    const fs::path out = fresh_dir("rows");
    REQUIRE(run_cli("run --graph torus2d:8x8 --scheme sos --beta auto --rounding randomized "
                    "--init corner:1000 --rounds 40 --seed 7 --out " + out.string()) == 0);
    REQUIRE(count_lines(out / "metrics.csv") == 41);
    std::ifstream in(out / "metrics.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto first = line.find(',');
        const auto second = line.find(',', first + 1);
        CHECK(line.substr(first + 1, second - first - 1) == "64000");
    }
}

TEST_CASE("cli output is byte identical across worker counts") {
    const std::string base =
        "run --graph torus2d:12x12 --scheme sos --beta auto --rounding randomized "
        "--init corner:100 --rounds 30 --seed 99 --frame-every 10 ";
    const fs::path out1 = fresh_dir("w1"), out8 = fresh_dir("w8");
    REQUIRE(run_cli(base + "--workers 1 --out " + out1.string()) == 0);
    REQUIRE(run_cli(base + "--workers 8 --out " + out8.string()) == 0);
    REQUIRE(file_bytes(out1 / "metrics.csv") == file_bytes(out8 / "metrics.csv"));
    for (int t : {0, 10, 20}) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%08d.pgm", t);
        REQUIRE(file_bytes(out1 / "frames" / name) == file_bytes(out8 / "frames" / name));
    }
}

TEST_CASE("spectral prints lambda and beta") {
    // hypercube(4): lambda = 3/5, beta = 2/(1+sqrt(1-0.36)) = 2/1.8.
    const std::string text = capture_cli("spectral --graph hypercube:4");
    CHECK(text.find("lambda=0.6") != std::string::npos);
    CHECK(text.find("beta_opt=1.111111111111111") != std::string::npos);
    CHECK(text.find("closed_form") != std::string::npos);
}

TEST_CASE("spectral trace emits a coefficient csv") {
    const fs::path out = fresh_dir("trace");
    REQUIRE(run_cli("run --graph torus2d:10x10 --scheme fos --rounding none "
                    "--init corner:100 --rounds 20 --snapshot-every 1 --out " +
                    out.string()) == 0);
    REQUIRE(run_cli("spectral --graph torus2d:10x10 --trace " + (out / "snapshots").string() +
                    " --out " + out.string()) == 0);
    REQUIRE(count_lines(out / "coefficients.csv") == 21);
    std::ifstream in(out / "coefficients.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "round,leading_index,max_abs_coefficient,a4");
}

TEST_CASE("render regenerates frames from snapshots") {
    const fs::path out = fresh_dir("render");
    REQUIRE(run_cli("run --graph torus2d:6x6 --scheme sos --beta auto --rounding randomized "
                    "--init corner:10 --rounds 5 --seed 3 --snapshot-every 1 --frame-every 1 "
                    "--out " + out.string()) == 0);
    const fs::path rendered = fresh_dir("rendered");
    REQUIRE(run_cli("render --snapshots " + (out / "snapshots").string() + " --width 6 "
                    "--height 6 --out " + rendered.string()) == 0);
    for (int t = 0; t < 5; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%08d.pgm", t);
        REQUIRE(file_bytes(rendered / name) == file_bytes(out / "frames" / name));
    }
}

TEST_CASE("verify subcommand") {
    REQUIRE(run_cli("verify gamma") == 0);
    REQUIRE(run_cli("verify upsilon") == 0);
    CHECK(run_cli("verify no-such-suite") != 0);
}

TEST_CASE("invalid configs are rejected") {
    CHECK(run_cli("run --graph torus2d:2x2 --rounds 1") != 0);
    CHECK(run_cli("run --graph nonsense --rounds 1") != 0);
    CHECK(run_cli("run --graph cycle:8 --rounds 1 --frame-every 1") != 0);
}

TEST_CASE("config file supplies defaults, flags win") {
    const fs::path out = fresh_dir("config");
    const fs::path cfg = out / "run.cfg";
    {
        std::ofstream f(cfg);
        f << "graph=torus2d:4x4\nrounds=3\nrounding=floor\ninit=corner:10\n";
        f << "out=" << (out / "a").string() << "\n";
    }
    REQUIRE(run_cli("run --config " + cfg.string()) == 0);
    REQUIRE(count_lines(out / "a" / "metrics.csv") == 4);
    REQUIRE(run_cli("run --config " + cfg.string() + " --rounds 5 --out " +
                    (out / "b").string()) == 0);
    REQUIRE(count_lines(out / "b" / "metrics.csv") == 6);
}
