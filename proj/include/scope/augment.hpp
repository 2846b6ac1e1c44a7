#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scope/backbone.hpp"

namespace scope {

/// Strengths of the two stochastic augmentation branches for vector data.
/// Weak: Gaussian jitter. Strong: larger jitter followed by zeroing a random
/// subset of floor(strong_dropout_fraction * D) coordinates.
struct AugmentParams {
    double weak_jitter_sd = 0.0;
    double strong_jitter_sd = 0.0;
    double strong_dropout_fraction = 0.0;

    /// Defaults relative to the dataset's feature scale.
    static AugmentParams scaled(double feature_scale, double weak_rel = 0.02,
                                double strong_rel = 0.15, double dropout = 0.25);

    bool operator==(const AugmentParams&) const = default;
};

std::vector<double> weak(std::span<const double> x, const AugmentParams& params, std::uint64_t draw);
std::vector<double> strong(std::span<const double> x, const AugmentParams& params, std::uint64_t draw);

/// Row-wise application; row i uses a sub-draw derived from (draw, i).
Matrix weak_batch(const Matrix& x, const AugmentParams& params, std::uint64_t draw);
Matrix strong_batch(const Matrix& x, const AugmentParams& params, std::uint64_t draw);

}  // namespace scope
