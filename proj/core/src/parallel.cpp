// parallel.cpp - Minimal static-partition parallel loop.

#include "tagflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace tagflow {

namespace {

std::atomic<unsigned> g_threads{0};

unsigned threads_from_env() {
    const char *env = std::getenv("TAGFLOW_THREADS");
    if (env == nullptr) {
        return 1;
    }
    try {
        const long n = std::stol(env);
        return n > 0 ? static_cast<unsigned>(n) : 1;
    } catch (const std::exception &) {
        return 1;
    }
}

} // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
    const unsigned n = g_threads.load();
    return n == 0 ? threads_from_env() : n;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)> &body) {
    const std::size_t nthreads = std::min<std::size_t>(thread_count(), std::max<std::size_t>(count / 1024, 1));
    if (nthreads <= 1) {
        body(0, count);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nthreads - 1);
    const std::size_t chunk = (count + nthreads - 1) / nthreads;
    for (std::size_t t = 1; t < nthreads; ++t) {
        const std::size_t b = std::min(count, t * chunk);
        const std::size_t e = std::min(count, b + chunk);
        workers.emplace_back([&body, b, e] { body(b, e); });
    }
    body(0, std::min(count, chunk));
    for (auto &w : workers) {
        w.join();
    }
}

} // namespace tagflow
