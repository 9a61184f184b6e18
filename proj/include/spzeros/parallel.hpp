#ifndef SPZEROS_PARALLEL_HPP
#define SPZEROS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace spzeros
{

// Worker count: SPZEROS_THREADS when set to a positive integer, otherwise the
// hardware concurrency. Never affects results, only scheduling.
inline unsigned thread_count()
{
    if (const char *env = std::getenv("SPZEROS_THREADS"); env != nullptr && *env != '\0') {
        try {
            const long v = std::stol(env);
            if (v > 0) {
                return static_cast<unsigned>(std::min<long>(v, 1024));
            }
        } catch (const std::exception &) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n). Tasks are claimed dynamically; if any task
// throws, the exception of the lowest-index failing task is rethrown so the
// reported failure does not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t n, Body &&body, unsigned threads = thread_count())
{
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(n);
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }
    for (const auto &f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
}

} // namespace spzeros

#endif
