#pragma once

#include <cstddef>
#include <thread>
#include <utility>
#include <vector>

namespace diffsim {

// Static contiguous partition of [0, n) over `workers` threads. Each range is
// disjoint, so any function that only writes to its own range produces output
// independent of the worker count.
template <typename Fn>
void parallel_for_ranges(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    // Below ~64k items the spawn cost dominates the loop body.
    if (workers <= 1 || n < 65536) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t w = static_cast<std::size_t>(workers);
    const std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> pool;
    pool.reserve(w - 1);
    std::size_t begin = chunk;  // thread 0 == caller runs the first chunk
    for (std::size_t t = 1; t < w && begin < n; ++t) {
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    fn(std::size_t{0}, std::min(chunk, n));
    for (auto& th : pool) th.join();
}

}  // namespace diffsim
