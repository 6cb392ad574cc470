#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace msfem {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. If several calls
/// throw, the exception of the smallest index is rethrown so failures are
/// reported deterministically.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const std::size_t nt = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    std::exception_ptr first;
    std::size_t first_index = n;
    std::mutex mu;
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (i < first_index) {
                first_index = i;
                first = std::current_exception();
            }
        }
    };
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(nt);
        for (std::size_t t = 0; t < nt; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace msfem
