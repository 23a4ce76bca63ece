#pragma once

#include <cstdint>
#include <random>

#include "hamprune/tensor.hpp"

namespace hamprune {

using Rng = std::mt19937_64;

/// splitmix64 step; derives independent sub-stream seeds from a base seed.
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Tensor uniform_tensor(std::vector<size_t> shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

inline Tensor normal_tensor(std::vector<size_t> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

}  // namespace hamprune
