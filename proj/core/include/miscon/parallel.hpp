#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace miscon {

/// Runs fn(i) once for every i in [0, count) across up to `workers` threads.
/// Workers pull indices from a shared counter, so callers that need ordered
/// results must write into index i of a preallocated buffer. Every index is
/// attempted even when some throw; afterwards the exception raised by the
/// smallest index is rethrown, which keeps failure reporting independent of
/// thread scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    if (count == 0) return;
    if (workers == 0) workers = 1;
    if (workers > count) workers = count;

    if (workers == 1) {
        std::exception_ptr first;
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::size_t first_failed_index = count;
    std::exception_ptr first_failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (i < first_failed_index) {
                    first_failed_index = i;
                    first_failure = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (first_failure) std::rethrow_exception(first_failure);
}

}  // namespace miscon
