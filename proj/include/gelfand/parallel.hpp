#ifndef GELFAND_PARALLEL_HPP
#define GELFAND_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gelfand {

// Worker pool width: hardware concurrency capped by GELFAND_THREADS.
int worker_count();

// Runs body(i) for i in [0, n) across the pool. Callers write results by
// index, which keeps batch outputs deterministic. The first exception is
// rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    int workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load(std::memory_order_relaxed)) return;
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int spawn = static_cast<int>(std::min<std::size_t>(workers, n));
    pool.reserve(spawn - 1);
    for (int t = 1; t < spawn; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failed) std::rethrow_exception(error);
}

}  // namespace gelfand

#endif
