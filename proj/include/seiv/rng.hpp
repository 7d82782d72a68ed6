#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace seiv {

using Rng = std::mt19937_64;

// Stream tags for derive_rng. Every consumer of randomness draws from its own
// stream so that adding draws in one place never shifts another.
enum class Stream : std::uint32_t {
    Graph = 1,
    InitialState = 2,
    Process = 3,
    Optimizer = 4,
    Bootstrap = 5,
    Instance = 6,
};

/// Child generator for (root, stream, path...). The root seed and every path
/// component are split into 32-bit words and fed through std::seed_seq, so
/// distinct paths give independent streams and identical paths identical ones.
inline Rng derive_rng(std::uint64_t root, Stream stream, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(3 + 2 * path.size());
    words.push_back(static_cast<std::uint32_t>(root));
    words.push_back(static_cast<std::uint32_t>(root >> 32));
    words.push_back(static_cast<std::uint32_t>(stream));
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

} // namespace seiv
