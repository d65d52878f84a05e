#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace freebound {

/// Runs fn(i) for i in [0, n) on `workers` threads with a static
/// contiguous partition. Callers write into per-index slots and reduce in
/// index order afterwards, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, const Fn& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Mean and standard error of a sample.
struct MeanError {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanError mean_error(const std::vector<double>& xs) {
    MeanError out;
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double n = static_cast<double>(xs.size());
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
    return out;
}

}  // namespace freebound
