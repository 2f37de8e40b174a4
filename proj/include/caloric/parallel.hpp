#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace caloric {

/// Runs fn(i) for i in [0, count) on up to `workers` threads using a static
/// contiguous partition. Callers write into per-index slots, so results do
/// not depend on the worker count. The first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    if (count == 0) return;
    const std::size_t nthreads = std::clamp<std::size_t>(workers, 1, count);
    if (nthreads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (std::size_t w = 0; w < nthreads; ++w) {
            const std::size_t lo = count * w / nthreads;
            const std::size_t hi = count * (w + 1) / nthreads;
            pool.emplace_back([&, lo, hi] {
                try {
                    for (std::size_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace caloric
