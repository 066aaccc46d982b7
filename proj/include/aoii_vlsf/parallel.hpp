#pragma once

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <utility>
#include <mutex>
#include <thread>
#include <vector>

namespace aoii {

/// Number of worker threads to use. A request of 0 means "all hardware
/// threads". The AOII_THREADS environment variable, when set to a positive
/// integer, caps the result.
inline int resolve_threads(int requested) {
    int n = requested;
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
    }
    if (n < 1) {
        n = 1;
    }
    if (const char* cap = std::getenv("AOII_THREADS")) {
        int limit = std::atoi(cap);
        if (limit >= 1 && limit < n) {
            n = limit;
        }
    }
    return n;
}

/// Run fn(worker_index) on `workers` threads and join them. The first
/// exception thrown by any worker is rethrown after the join. With a single
/// worker fn runs on the calling thread.
template <typename Fn>
void run_workers(int workers, Fn&& fn) {
    if (workers <= 1) {
        fn(0);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&fn, &first_error, &error_mutex, w] {
            try {
                fn(w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

/// Split `count` items into `workers` contiguous chunks; returns the
/// half-open range handled by the given worker.
inline std::pair<std::uint64_t, std::uint64_t> worker_range(std::uint64_t count, int workers, int worker) {
    std::uint64_t per = count / static_cast<std::uint64_t>(workers);
    std::uint64_t extra = count % static_cast<std::uint64_t>(workers);
    std::uint64_t w = static_cast<std::uint64_t>(worker);
    std::uint64_t begin = w * per + (w < extra ? w : extra);
    std::uint64_t end = begin + per + (w < extra ? 1 : 0);
    return {begin, end};
}

} // namespace aoii
