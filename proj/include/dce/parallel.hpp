#pragma once

// Static-partition parallel loop. The split into chunks depends only on the
// iteration count and the thread count, so results that avoid cross-chunk
// reductions are identical for every schedule.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dce {

/// 0 restores the default (hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Calls body(begin, end) on disjoint chunks covering [0, n).
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1) {
    if (n == 0) return;
    const std::size_t threads = std::min(thread_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
    if (threads <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads - 1);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 1; t < threads; ++t) {
        const std::size_t begin = std::min(n, t * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                if (begin < end) body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    try {
        body(std::size_t{0}, std::min(n, chunk));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace dce
