#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace stbn {

inline int default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
// workers. Chunk boundaries depend on `threads`; bodies must not rely on them
// for results.
template <typename Body>
void parallel_for(int n, int threads, Body &&body) {
    threads = std::clamp(threads, 1, std::max(1, n));
    if (threads == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(std::size_t(threads));
    for (int w = 0; w < threads; ++w) {
        const int begin = int(long(n) * w / threads), end = int(long(n) * (w + 1) / threads);
        workers.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto &t : workers) t.join();
}

}  // namespace stbn
