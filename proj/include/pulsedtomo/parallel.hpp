#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pulsedtomo {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// out[i] = fn(i) for i in [0, n). Workers pull fixed-size chunks from a shared
/// counter; each result lands in its own slot, so the output does not depend on
/// the number of threads.
template <typename T, typename Fn>
std::vector<T> parallel_generate(std::size_t n, int threads, Fn&& fn, std::size_t chunk = 256) {
    std::vector<T> out(n);
    const int nt = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>((n + chunk - 1) / chunk)));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t begin = next.fetch_add(chunk);
                if (begin >= n) break;
                const std::size_t end = std::min(n, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) out[i] = fn(i);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(n);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

} // namespace pulsedtomo
