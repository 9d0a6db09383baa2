#ifndef NSL_PARALLEL_HPP
#define NSL_PARALLEL_HPP

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace nsl {

// Runs fn(0..count-1) across up to `workers` threads. Tasks must be
// independent and must not throw; callers that can fail catch inside fn and
// record the failure in their own slot.
inline void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn) {
    if (count == 0) return;
    const size_t n_threads =
        std::min<size_t>(count, workers < 1 ? 1 : static_cast<size_t>(workers));
    if (n_threads == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace nsl

#endif  // NSL_PARALLEL_HPP
