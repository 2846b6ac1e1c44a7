#pragma once

#include <optional>
#include <span>
#include <vector>

#include "scope/backbone.hpp"

namespace scope {

/// Lower bound applied to every fitted standard deviation.
inline constexpr double kSigmaFloor = 1e-6;
/// Lower bound applied to the balloon-KDE bandwidth.
inline constexpr double kMinBandwidth = 1e-9;

/// Diagonal Gaussian fitted to the members of one class.
struct ClassStats {
    std::vector<double> mean;
    std::vector<double> sd;  // population sd, clamped to kSigmaFloor
    std::size_t count = 0;
};

/// Per-class statistics; nullopt for classes with fewer than two members.
struct GaussianClassStats {
    std::vector<std::optional<ClassStats>> per_class;
};

struct FilterVerdict {
    std::size_t index = 0;
    bool accepted = false;
    /// Log-density (Gaussian filter; NaN for pass-through classes) or
    /// neighbour count (kNN filter).
    double score = 0.0;
};

/// Mean and sd of the given rows. Throws StatsUndefined for fewer than two rows.
ClassStats fit_stats(const Matrix& vectors);

/// Fits a ClassStats for every class id in [0, num_classes). Classes with
/// fewer than two members are left undefined.
GaussianClassStats fit_class_stats(const Matrix& prob_vectors, std::span<const int> pseudo_classes,
                                   int num_classes);

/// Sum over coordinates of the univariate normal log-density.
double gaussian_log_density(std::span<const double> v, const ClassStats& stats);

/// Per-class diagonal-Gaussian outlier filter. Members scoring at or above
/// their class mean score are accepted; each refinement round refits on the
/// accepted members and rescores the whole class. Classes with fewer than two
/// members pass through.
std::vector<FilterVerdict> gaussian_filter(const Matrix& prob_vectors, std::span<const int> pseudo_classes,
                                           int refinement_rounds = 3);

/// Throws UndefinedSimilarity when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Contrastive nearest-neighbour filter: an unlabeled sample with pseudo-class
/// c is accepted iff at least k labeled samples of class c have cosine
/// similarity strictly greater than gamma with it. Zero-norm pairs never count.
std::vector<FilterVerdict> knn_filter(const Matrix& labeled_embeddings, std::span<const int> labeled_classes,
                                      const Matrix& unlabeled_embeddings, std::span<const int> pseudo_classes,
                                      double gamma, int k);

/// Variable-width balloon density estimate: bandwidth is the distance to the
/// k-th nearest reference (at least kMinBandwidth), kernel
/// K(z) = exp(-z^2/2) / (2 pi).
double balloon_kde(std::span<const double> query, const Matrix& references, int k);

}  // namespace scope
