#include "scope/augment.hpp"

#include <cmath>

#include "scope/error.hpp"
#include "scope/rng.hpp"

namespace scope {

namespace {

void check_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidInput("augmentation input must be finite");
}

void jitter(std::span<double> x, double sd, Rng& rng) {
    if (sd == 0.0) return;
    for (double& v : x) v += sd * rng.normal();
}

void strong_in_place(std::span<double> x, const AugmentParams& params, Rng& rng) {
    jitter(x, params.strong_jitter_sd, rng);
    const auto n_drop = static_cast<std::size_t>(
        std::floor(params.strong_dropout_fraction * static_cast<double>(x.size())));
    if (n_drop == 0) return;
    for (std::size_t j : rng.sample_indices(x.size(), n_drop)) x[j] = 0.0;
}

std::uint64_t row_draw(std::uint64_t draw, Eigen::Index row) {
    return Rng(draw, Stream::kAugment).derive(static_cast<std::uint64_t>(row));
}

}  // namespace

AugmentParams AugmentParams::scaled(double feature_scale, double weak_rel, double strong_rel,
                                    double dropout) {
    return {weak_rel * feature_scale, strong_rel * feature_scale, dropout};
}

std::vector<double> weak(std::span<const double> x, const AugmentParams& params, std::uint64_t draw) {
    check_finite(x);
    std::vector<double> out(x.begin(), x.end());
    Rng rng(draw);
    jitter(out, params.weak_jitter_sd, rng);
    return out;
}

std::vector<double> strong(std::span<const double> x, const AugmentParams& params, std::uint64_t draw) {
    check_finite(x);
    if (!(params.strong_dropout_fraction >= 0.0 && params.strong_dropout_fraction < 1.0))
        throw InvalidInput("strong_dropout_fraction must lie in [0, 1)");
    std::vector<double> out(x.begin(), x.end());
    Rng rng(draw);
    strong_in_place(out, params, rng);
    return out;
}

Matrix weak_batch(const Matrix& x, const AugmentParams& params, std::uint64_t draw) {
    if (!x.allFinite()) throw InvalidInput("augmentation input must be finite");
    Matrix out = x;
    if (params.weak_jitter_sd == 0.0) return out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Rng rng(row_draw(draw, i));
        for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) += params.weak_jitter_sd * rng.normal();
    }
    return out;
}

Matrix strong_batch(const Matrix& x, const AugmentParams& params, std::uint64_t draw) {
    if (!x.allFinite()) throw InvalidInput("augmentation input must be finite");
    if (!(params.strong_dropout_fraction >= 0.0 && params.strong_dropout_fraction < 1.0))
        throw InvalidInput("strong_dropout_fraction must lie in [0, 1)");
    Matrix out = x;
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        Rng rng(row_draw(draw, i));
        strong_in_place(row, params, rng);
        for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = row[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace scope
