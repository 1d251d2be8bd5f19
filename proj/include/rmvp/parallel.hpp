#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace rmvp {

/// Process-wide worker count used by loops that are allowed to run in
/// parallel. Defaults to 1 (sequential, bitwise deterministic).
int worker_count();
void set_worker_count(int workers);

/// Runs fn(i) for i in [0, n) split into contiguous chunks, one per worker.
/// Every index is written by exactly one worker, so results do not depend on
/// scheduling as long as fn only writes slot i.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, worker_count())), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rmvp
