#include "mimo/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mimo {

unsigned thread_budget() {
    if (const char* env = std::getenv("MIMO_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return unsigned(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = std::min<std::size_t>(thread_budget(), n_chunks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_chunks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_chunks) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mimo
