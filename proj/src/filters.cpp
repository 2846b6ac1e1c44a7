#include "scope/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "scope/error.hpp"

namespace scope {

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index r, std::vector<double>& buf) {
    buf.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) buf[static_cast<std::size_t>(j)] = m(r, j);
    return buf;
}

// Members sorted lexicographically by content, so that every reduction over a
// class runs in an order independent of the input order.
std::vector<std::size_t> canonical_order(const Matrix& m, std::vector<std::size_t> rows) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double x = m(static_cast<Eigen::Index>(a), j);
            const double y = m(static_cast<Eigen::Index>(b), j);
            if (x != y) return x < y;
        }
        return false;
    });
    return rows;
}

ClassStats fit_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    if (rows.size() < 2)
        throw StatsUndefined("class has " + std::to_string(rows.size()) + " members, need at least 2");
    const auto dims = static_cast<std::size_t>(m.cols());
    const double n = static_cast<double>(rows.size());
    ClassStats s;
    s.count = rows.size();
    s.mean.assign(dims, 0.0);
    s.sd.assign(dims, 0.0);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < dims; ++j) s.mean[j] += m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    for (double& v : s.mean) v /= n;
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < dims; ++j) {
            const double d = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) - s.mean[j];
            s.sd[j] += d * d;
        }
    for (double& v : s.sd) v = std::max(std::sqrt(v / n), kSigmaFloor);
    return s;
}

// Mean of the scores in sorted order, clamped into [min, max] so that a class
// of equal scores has exactly that score as its mean.
double order_free_mean(std::vector<double> scores) {
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += s;
    return std::clamp(sum / static_cast<double>(scores.size()), scores.front(), scores.back());
}

}  // namespace

ClassStats fit_stats(const Matrix& vectors) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(vectors.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit_rows(vectors, canonical_order(vectors, std::move(rows)));
}

GaussianClassStats fit_class_stats(const Matrix& prob_vectors, std::span<const int> pseudo_classes,
                                   int num_classes) {
    if (static_cast<Eigen::Index>(pseudo_classes.size()) != prob_vectors.rows())
        throw InvalidInput("one pseudo-class per probability vector required");
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < pseudo_classes.size(); ++i) {
        if (pseudo_classes[i] < 0 || pseudo_classes[i] >= num_classes) throw InvalidInput("class id out of range");
        members[static_cast<std::size_t>(pseudo_classes[i])].push_back(i);
    }
    GaussianClassStats out;
    out.per_class.resize(members.size());
    for (std::size_t c = 0; c < members.size(); ++c)
        if (members[c].size() >= 2) out.per_class[c] = fit_rows(prob_vectors, canonical_order(prob_vectors, members[c]));
    return out;
}

double gaussian_log_density(std::span<const double> v, const ClassStats& stats) {
    if (v.size() != stats.mean.size()) throw InvalidInput("vector length does not match class stats");
    static const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double total = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double z = (v[j] - stats.mean[j]) / stats.sd[j];
        total += -half_log_2pi - std::log(stats.sd[j]) - 0.5 * z * z;
    }
    return total;
}

std::vector<FilterVerdict> gaussian_filter(const Matrix& prob_vectors, std::span<const int> pseudo_classes,
                                           int refinement_rounds) {
    const auto m = static_cast<std::size_t>(prob_vectors.rows());
    if (m < 1) throw InvalidInput("gaussian filter needs at least one sample");
    if (pseudo_classes.size() != m) throw InvalidInput("one pseudo-class per probability vector required");
    if (refinement_rounds < 0) throw InvalidInput("refinement_rounds must be non-negative");

    std::vector<FilterVerdict> verdicts(m);
    for (std::size_t i = 0; i < m; ++i)
        verdicts[i] = {i, true, std::numeric_limits<double>::quiet_NaN()};

    const int max_class = *std::max_element(pseudo_classes.begin(), pseudo_classes.end());
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_class + 1));
    for (std::size_t i = 0; i < m; ++i) {
        if (pseudo_classes[i] < 0) throw InvalidInput("class id out of range");
        members[static_cast<std::size_t>(pseudo_classes[i])].push_back(i);
    }

    std::vector<double> buf;
    for (auto& rows : members) {
        if (rows.size() < 2) continue;  // stats undefined: pass through
        rows = canonical_order(prob_vectors, rows);
        std::vector<std::size_t> fit_on = rows;
        std::vector<double> scores(rows.size());
        std::vector<bool> accepted(rows.size());
        for (int round = 0; round <= refinement_rounds; ++round) {
            if (fit_on.size() < 2) break;  // keep the previous round's verdicts
            const ClassStats stats = fit_rows(prob_vectors, fit_on);
            for (std::size_t r = 0; r < rows.size(); ++r)
                scores[r] = gaussian_log_density(row_span(prob_vectors, static_cast<Eigen::Index>(rows[r]), buf), stats);
            const double threshold = order_free_mean(scores);
            fit_on.clear();
            for (std::size_t r = 0; r < rows.size(); ++r) {
                accepted[r] = scores[r] >= threshold;
                if (accepted[r]) fit_on.push_back(rows[r]);
            }
        }
        for (std::size_t r = 0; r < rows.size(); ++r) verdicts[rows[r]] = {rows[r], accepted[r], scores[r]};
    }
    return verdicts;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("cosine similarity of vectors with different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    if (na == 0.0 || nb == 0.0) throw UndefinedSimilarity("cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<FilterVerdict> knn_filter(const Matrix& labeled_embeddings, std::span<const int> labeled_classes,
                                      const Matrix& unlabeled_embeddings, std::span<const int> pseudo_classes,
                                      double gamma, int k) {
    if (!(gamma > -1.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in (-1, 1)");
    if (k < 1) throw InvalidInput("k must be at least 1");
    if (static_cast<Eigen::Index>(labeled_classes.size()) != labeled_embeddings.rows() ||
        static_cast<Eigen::Index>(pseudo_classes.size()) != unlabeled_embeddings.rows())
        throw InvalidInput("one class id per embedding required");
    if (labeled_embeddings.rows() > 0 && labeled_embeddings.cols() != unlabeled_embeddings.cols())
        throw InvalidInput("labeled and unlabeled embeddings differ in width");

    const Vector labeled_norms = labeled_embeddings.rowwise().norm();
    std::vector<FilterVerdict> verdicts(pseudo_classes.size());
    for (Eigen::Index j = 0; j < unlabeled_embeddings.rows(); ++j) {
        const double u_norm = unlabeled_embeddings.row(j).norm();
        int count = 0;
        for (Eigen::Index i = 0; i < labeled_embeddings.rows(); ++i) {
            if (labeled_classes[static_cast<std::size_t>(i)] != pseudo_classes[static_cast<std::size_t>(j)]) continue;
            if (u_norm == 0.0 || labeled_norms[i] == 0.0) continue;
            const double cos = std::clamp(
                labeled_embeddings.row(i).dot(unlabeled_embeddings.row(j)) / (labeled_norms[i] * u_norm), -1.0, 1.0);
            if (cos > gamma) ++count;
        }
        const auto idx = static_cast<std::size_t>(j);
        verdicts[idx] = {idx, count >= k, static_cast<double>(count)};
    }
    return verdicts;
}

double balloon_kde(std::span<const double> query, const Matrix& references, int k) {
    const auto r = static_cast<std::size_t>(references.rows());
    if (k < 1 || r < static_cast<std::size_t>(k)) throw InvalidInput("balloon KDE needs R >= k >= 1");
    if (static_cast<Eigen::Index>(query.size()) != references.cols())
        throw InvalidInput("query width does not match references");
    std::vector<double> dist(r);
    for (std::size_t i = 0; i < r; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < query.size(); ++j) {
            const double d = query[j] - references(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            sq += d * d;
        }
        dist[i] = std::sqrt(sq);
    }
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
    const double h = std::max(sorted[static_cast<std::size_t>(k - 1)], kMinBandwidth);

    double kernel_sum = 0.0;
    for (double d : dist) {
        const double z = d / h;
        kernel_sum += std::exp(-0.5 * z * z) / (2.0 * std::numbers::pi);
    }
    const double log_norm = -std::log(static_cast<double>(r)) - static_cast<double>(query.size()) * std::log(h);
    return std::exp(log_norm) * kernel_sum;
}

}  // namespace scope
