#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace msd {

// Worker count: min(hardware, MSD_THREADS env if set), at least 1.
inline size_t worker_count() {
    size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MSD_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) n = std::min(n, static_cast<size_t>(cap));
    }
    return n;
}

// Static-partition parallel loop: worker w handles one contiguous index
// chunk, so the sample->worker assignment is a pure function of (n, workers)
// and results can be reduced in index order for bit-reproducibility.
inline void parallel_for(size_t n, const std::function<void(size_t)>& body) {
    if (n == 0) return;
    size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    size_t chunk = (n + workers - 1) / workers;
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (size_t w = 0; w < workers; ++w) {
        size_t lo = w * chunk;
        size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace msd
