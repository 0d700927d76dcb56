#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace census {

/// Worker cap from CENSUS_EVAL_THREADS; hardware concurrency when unset or invalid.
inline unsigned threads_from_env() {
    const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
    const char* raw = std::getenv("CENSUS_EVAL_THREADS");
    if (raw == nullptr) return hw;
    try {
        const long v = std::stol(raw);
        if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    return hw;
}

/// Runs fn(i) for i in [0, n). Each index writes only its own slot, so results
/// do not depend on the thread count. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::size_t>(n, 256))));
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace census
