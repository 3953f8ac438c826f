#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffsim {

// Grayscale raster of a torus load state; row-major, node id = row*width+col.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::uint8_t shade(double value) {  // round half up, clamp to [0,255]
    const double r = std::floor(value + 0.5);
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

template <typename LoadT>
double mean_load(std::span<const LoadT> x) {
    double total = 0.0;
    for (LoadT v : x) total += static_cast<double>(v);
    return total / static_cast<double>(x.size());
}

}  // namespace detail

// Light pixels sit near the average load, dark pixels near the extremes:
// pixel = 255 - round(255 |x_v - xbar| / max_v |x_v - xbar|).
template <typename LoadT>
Frame render_adaptive(std::span<const LoadT> x, int width, int height) {
    if (static_cast<std::int64_t>(width) * height != static_cast<std::int64_t>(x.size()))
        throw std::invalid_argument("render_adaptive: dimension mismatch");
    Frame frame{width, height, std::vector<std::uint8_t>(x.size(), 255)};
    const double avg = detail::mean_load(x);
    double scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        scale = std::max(scale, std::abs(static_cast<double>(x[i]) - avg));
    if (scale == 0.0) return frame;  // balanced: all white
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dev = std::abs(static_cast<double>(x[i]) - avg);
        frame.pixels[i] = static_cast<std::uint8_t>(255 - detail::shade(255.0 * dev / scale));
    }
    return frame;
}

// Fixed ramp: white at deviation 0, black at deviation >= cutoff.
template <typename LoadT>
Frame render_threshold(std::span<const LoadT> x, int width, int height, double cutoff) {
    if (static_cast<std::int64_t>(width) * height != static_cast<std::int64_t>(x.size()))
        throw std::invalid_argument("render_threshold: dimension mismatch");
    if (!(cutoff > 0.0)) throw std::invalid_argument("render_threshold: cutoff must be positive");
    Frame frame{width, height, std::vector<std::uint8_t>(x.size(), 255)};
    const double avg = detail::mean_load(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dev = std::min(std::abs(static_cast<double>(x[i]) - avg), cutoff);
        frame.pixels[i] = detail::shade(255.0 * (1.0 - dev / cutoff));
    }
    return frame;
}

// Binary PGM: "P5\n<width> <height>\n255\n" then raw bytes. Bit-exact output.
inline void write_pgm(const Frame& frame, const std::filesystem::path& path) {
    if (frame.width <= 0 || frame.height <= 0) throw std::invalid_argument("write_pgm: empty frame");
    if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height)
        throw std::invalid_argument("write_pgm: pixel count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(frame.pixels.data()),
              static_cast<std::streamsize>(frame.pixels.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

inline Frame read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0)
        throw std::runtime_error("read_pgm: unsupported header in " + path.string());
    in.get();  // the single whitespace after maxval
    Frame frame{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
    in.read(reinterpret_cast<char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated data in " + path.string());
    return frame;
}

}  // namespace diffsim
