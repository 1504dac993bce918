#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sose {

/// Resolves a requested thread count: 0 means "all hardware threads".
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, count) into `threads` contiguous chunks and calls
/// body(chunk_index, begin, end) for each. Chunk boundaries depend only on
/// (count, threads), so reductions merged by chunk index are deterministic.
/// With threads <= 1 the body runs inline on the calling thread.
template <class Body>
void parallel_chunks(std::size_t count, int threads, Body&& body) {
    const std::size_t t = std::max<std::size_t>(
        1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
    if (t == 1) {
        body(std::size_t{0}, std::size_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    pool.reserve(t);
    for (std::size_t c = 0; c < t; ++c) {
        const std::size_t begin = count * c / t;
        const std::size_t end = count * (c + 1) / t;
        pool.emplace_back([&, c, begin, end] {
            try {
                body(c, begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Runs body(i) for every i in [0, count).
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
    parallel_chunks(count, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) body(i);
    });
}

inline std::size_t chunk_count(std::size_t count, int threads) {
    return std::max<std::size_t>(
        1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
}

}  // namespace sose
