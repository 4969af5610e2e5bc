#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mcsfb {

/// Thread count from MCSFB_THREADS, else 1.
inline int default_thread_count()
{
    if (const char* env = std::getenv("MCSFB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return 1;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn)
{
    threads = std::clamp(threads, 1, std::max(n, 1));
    if (threads == 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace mcsfb
