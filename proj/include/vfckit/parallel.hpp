#pragma once

#include <cstdlib>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace vfckit {

// VFCKIT_THREADS caps worker count; results are produced per fixed-size chunk
// and merged in index order, so the outcome is identical for any thread count.
inline int thread_cap() {
    const char* env = std::getenv("VFCKIT_THREADS");
    if (!env) return (int)std::thread::hardware_concurrency();
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}

template <typename T, typename Fn>
std::vector<T> parallel_map(int n, Fn&& fn) {
    std::vector<T> out(n);
    int workers = std::min(thread_cap(), std::max(1, n));
    if (workers <= 1 || n < 16) {
        for (int i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    int chunk = (n + workers - 1) / workers;
    std::vector<std::future<void>> tasks;
    for (int w = 0; w < workers; ++w) {
        int begin = w * chunk, end = std::min(n, begin + chunk);
        if (begin >= end) break;
        tasks.push_back(std::async(std::launch::async, [&, begin, end] {
            for (int i = begin; i < end; ++i) out[i] = fn(i);
        }));
    }
    for (auto& t : tasks) t.get();
    return out;
}

}  // namespace vfckit
