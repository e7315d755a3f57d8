#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace diffad {

// Runs fn(i) for i in [0, n) across `jobs` threads. Work is split into fixed
// contiguous chunks independent of the thread count, and each index writes
// only its own output slot, so results are byte-identical for any --jobs.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    if (n == 0) return;
    const size_t workers = std::min<size_t>(std::max(jobs, 1), n);
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::mutex err_mu;
    std::exception_ptr first_err;
    const size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        const size_t lo = w * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&, lo, hi] {
            try {
                for (size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_err) first_err = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_err) std::rethrow_exception(first_err);
}

// Parallel map-reduce with a deterministic reduction order. fn(c, lo, hi)
// fills partials[c] for the fixed chunk [lo, hi); reduce(c) is then invoked
// sequentially in ascending chunk index, so floating-point accumulation order
// does not depend on the thread count. n_chunks is fixed by the caller.
template <typename MapFn, typename ReduceFn>
void parallel_chunks(size_t n, size_t n_chunks, int jobs, MapFn&& fn,
                     ReduceFn&& reduce) {
    if (n == 0 || n_chunks == 0) return;
    n_chunks = std::min(n_chunks, n);
    const size_t chunk = (n + n_chunks - 1) / n_chunks;
    std::vector<std::pair<size_t, size_t>> ranges;
    for (size_t c = 0; c * chunk < n; ++c)
        ranges.emplace_back(c * chunk, std::min(n, (c + 1) * chunk));
    parallel_for(ranges.size(), jobs, [&](size_t c) {
        fn(c, ranges[c].first, ranges[c].second);
    });
    for (size_t c = 0; c < ranges.size(); ++c) reduce(c);
}

}  // namespace diffad
