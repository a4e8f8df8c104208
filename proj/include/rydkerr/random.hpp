#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <thread>
#include <vector>

namespace rydkerr
{
    /// Engine for the substream identified by `path` under a master seed. Any
    /// task keyed by a fixed path draws the same numbers regardless of how work
    /// is scheduled.
    inline std::mt19937_64 substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    {
        std::vector<std::uint32_t> words;
        words.reserve(2 + 2 * path.size());
        const auto push = [&words](std::uint64_t v) {
            words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        };
        push(seed);
        for (auto p : path)
            push(p);
        std::seed_seq seq(words.begin(), words.end());
        return std::mt19937_64(seq);
    }

    /// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
    /// concurrency). Bodies must write only to their own slot.
    template <class Body>
    void parallel_for(std::size_t n, unsigned threads, Body&& body)
    {
        if (threads == 0)
            threads = std::max(1u, std::thread::hardware_concurrency());
        threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
        if (threads <= 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                body(i);
            return;
        }
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += threads)
                    body(i);
            });
    }
}
