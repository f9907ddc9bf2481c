#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lunarbound::detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out by
/// index; callers write results into per-index slots, so the outcome does not
/// depend on scheduling. The first exception is rethrown after all threads join.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
    const int nt = std::max(1, std::min(jobs, n));
    if (nt == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace lunarbound::detail
