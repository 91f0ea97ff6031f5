#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cagewarp {

/// Upper bound on worker threads used by parallel_for. Default: hardware
/// concurrency. 1 forces fully serial execution.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous static chunks. Callers write
/// per-index results only; any reduction happens afterwards in index order,
/// which keeps results independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 32) {
    const std::size_t max_workers = thread_count();
    const std::size_t workers = std::min<std::size_t>(max_workers, (n + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    auto run = [&](std::size_t w) {
        try {
            const std::size_t end = std::min(n, (w + 1) * chunk);
            for (std::size_t i = w * chunk; i < end; ++i) body(i);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace cagewarp
