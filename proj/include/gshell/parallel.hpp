#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace gshell {

// Splits [0, n) into one contiguous range per worker and joins. Results must
// be written to per-chunk storage and merged in chunk order by the caller;
// since chunks cover the index space in order and each element's output is a
// pure function of its index, merged output is identical at any thread count.
template <class Fn>
void parallel_ranges(size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        if (n) fn(size_t(0), n, 0);
        return;
    }
    size_t nt = std::min<size_t>(size_t(threads), n);
    size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (size_t c = 0; c < nt; ++c) {
        size_t lo = c * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, c] { fn(lo, hi, c); });
    }
    for (auto& t : pool) t.join();
}

} // namespace gshell
