#pragma once

/**
 * @file random.hpp
 * @brief Seed derivation and deterministic chunked Monte Carlo execution.
 *
 * Every Monte Carlo loop in the library is split into fixed-size chunks.
 * Chunk k draws from its own engine seeded by derive_seed(seed, k), so the
 * sample stream depends only on (seed, chunk size) and never on how many
 * worker threads process the chunks. Partial results are reduced in chunk
 * order, which makes reductions bit-identical for any worker count.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace hvsim {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates neighbouring seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
}

/// Uniform double in [0,1) with 53 random bits. Unlike
/// std::uniform_real_distribution the mapping is fixed across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline constexpr std::size_t kDefaultChunk = std::size_t{1} << 14;

/// Runs `fn(index)` for index in [0, count) on up to `workers` threads.
/// `fn` must only write to state owned by its index.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    const auto nthreads =
        static_cast<std::size_t>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1)));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += nthreads) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

struct ChunkRange {
    std::size_t index;
    std::size_t begin;
    std::size_t end;
};

/// Maps `fn(ChunkRange, Rng&) -> R` over the chunks of [0, n) and returns the
/// per-chunk results in chunk order.
template <class R, class Fn>
std::vector<R> map_chunks(std::size_t n, std::uint64_t seed, unsigned workers, Fn&& fn,
                          std::size_t chunk = kDefaultChunk) {
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<R> out(nchunks);
    parallel_for(nchunks, workers, [&](std::size_t c) {
        Rng rng = make_rng(seed, c);
        ChunkRange range{c, c * chunk, std::min(n, (c + 1) * chunk)};
        out[c] = fn(range, rng);
    });
    return out;
}

}  // namespace hvsim
