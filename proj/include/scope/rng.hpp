#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace scope {

/// Fixed stream ids. Every consumer of randomness draws from its own stream so
/// that changing one stage never perturbs another.
enum class Stream : std::uint64_t {
    kData = 1,
    kSplit = 2,
    kOutliers = 3,
    kInit = 4,
    kAugment = 5,
    kShuffle = 6,
};

/// SplitMix64 generator with 64-bit state. All derived quantities (uniforms,
/// normals, shuffles) are computed here rather than through <random>
/// distributions, whose output is implementation-defined, so identical seeds
/// reproduce bit-for-bit across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}
    Rng(std::uint64_t seed, Stream stream)
        : Rng(seed, static_cast<std::uint64_t>(stream)) {}
    Rng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix(seed) ^ mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL)) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). Unbiased (rejection sampling). n > 0.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (one value per call).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Independent child seed for the i-th sub-draw of this generator.
    std::uint64_t derive(std::uint64_t i) const;

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }
    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

    /// Sorted sample of `count` distinct indices from [0, n).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

    static std::uint64_t mix(std::uint64_t z);

private:
    std::uint64_t state_;
};

}  // namespace scope
