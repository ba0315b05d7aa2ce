#include "syncmatrix/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace syncmatrix::runtime {

namespace {
std::atomic<std::size_t> g_workers{0};

std::size_t default_workers() {
    std::size_t hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}
}  // namespace

void set_workers(std::size_t n) {
    g_workers.store(n == 0 ? default_workers() : n);
}

std::size_t workers() {
    std::size_t w = g_workers.load();
    return w == 0 ? default_workers() : w;
}

void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (count == 0) return;
    if (grain == 0) grain = 1;
    std::size_t max_threads = std::min(workers(), (count + grain - 1) / grain);
    if (max_threads <= 1) {
        fn(0, count);
        return;
    }
    std::size_t chunk = (count + max_threads - 1) / max_threads;
    std::vector<std::thread> pool;
    pool.reserve(max_threads - 1);
    std::size_t begin = chunk;  // chunk 0 runs on this thread
    for (std::size_t t = 1; t < max_threads && begin < count; ++t) {
        std::size_t end = std::min(begin + chunk, count);
        pool.emplace_back(fn, begin, end);
        begin = end;
    }
    fn(0, std::min(chunk, count));
    for (auto& th : pool) th.join();
}

}  // namespace syncmatrix::runtime
