#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fracheeger::par {

/// Worker count used by chunked loops. Defaults to the hardware concurrency
/// and can be overridden through set_thread_count() or the FRACHEEGER_THREADS
/// environment variable (read once at first use).
inline int& thread_count_ref() {
    static int count = [] {
        if (const char* env = std::getenv("FRACHEEGER_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? int(hc) : 1;
    }();
    return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

/// Runs body(chunk_index, begin, end) over a fixed decomposition of
/// [0, n_items) and then merge(chunk_index) sequentially in chunk order.
///
/// The decomposition depends only on n_items, and each chunk is processed
/// start to finish by a single worker, so results are bit-identical for any
/// thread count. Keep per-chunk state inside scratch buffers indexed by the
/// chunk and combine it in merge.
template <class Body, class Merge>
void chunked_for(std::size_t n_items, std::size_t n_chunks, Body&& body, Merge&& merge) {
    if (n_items == 0) return;
    if (n_chunks > n_items) n_chunks = n_items;
    if (n_chunks == 0) n_chunks = 1;

    auto chunk_range = [&](std::size_t c) {
        std::size_t b = c * n_items / n_chunks;
        std::size_t e = (c + 1) * n_items / n_chunks;
        return std::pair<std::size_t, std::size_t>(b, e);
    };

    const int workers = std::min<int>(thread_count(), int(n_chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            auto [b, e] = chunk_range(c);
            body(c, b, e);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto run = [&] {
            for (;;) {
                std::size_t c = next.fetch_add(1);
                if (c >= n_chunks) break;
                auto [b, e] = chunk_range(c);
                body(c, b, e);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(std::size_t(workers) - 1);
        for (int t = 1; t < workers; ++t) pool.emplace_back(run);
        run();
        for (auto& th : pool) th.join();
    }
    for (std::size_t c = 0; c < n_chunks; ++c) merge(c);
}

inline std::size_t default_chunks(std::size_t n_items) {
    return n_items < 64 ? (n_items == 0 ? 1 : n_items) : 64;
}

} // namespace fracheeger::par
