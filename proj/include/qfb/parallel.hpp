#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qfb {

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Calls body(k) for k in [0, n) on up to `workers` threads. Each index is
/// visited exactly once; callers write to disjoint slots, so results do not
/// depend on the worker count. The first exception is rethrown after join.
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
    workers = std::max(1u, workers);
    if (workers == 1 || n < 2) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                body(k);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace qfb
