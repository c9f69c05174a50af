#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sapp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

constexpr double kStochasticTol = 1e-12;

/// Derives an independent RNG stream from a root seed and a stream index.
/// splitmix64 scrambling so that nearby (seed, index) pairs decorrelate.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// FNV-1a over raw bytes; used for trace snapshot hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_vector(const Vec& v, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h);
}

/// Samples an index from a probability row using a single uniform draw.
template <typename Derived>
int sample_categorical(const Eigen::MatrixBase<Derived>& probs, double u) {
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        acc += probs(i);
        if (u < acc) return i;
    }
    return n - 1;  // guard against accumulated roundoff
}

template <typename Derived>
int sample_categorical(const Eigen::MatrixBase<Derived>& probs, Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return sample_categorical(probs, dist(rng));
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace sapp
