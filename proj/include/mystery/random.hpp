#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mystery {

/// Every randomized operation takes this engine explicitly. mt19937_64 output
/// is fully specified by the standard, and the helpers below avoid the
/// implementation-defined std distributions so results are identical across
/// standard libraries.
using Rng = std::mt19937_64;

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % n);
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    return draw % n;
}

/// Index drawn proportionally to integer weights. The total must be positive.
inline std::size_t weighted_index(Rng& rng, std::span<const std::uint64_t> weights) {
    std::uint64_t total = 0;
    for (auto w : weights) total += w;
    std::uint64_t target = uniform_index(rng, total);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (target < weights[i]) return i;
        target -= weights[i];
    }
    return weights.size() - 1;
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[uniform_index(rng, i)]);
    }
}

}  // namespace mystery
