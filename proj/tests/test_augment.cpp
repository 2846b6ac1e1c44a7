#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "scope/augment.hpp"

using namespace scope;

TEST_CASE("zero strength is the identity") {
    const std::vector<double> x{1.5, -2.0, 0.25, 3.0};
    const AugmentParams none{};
    CHECK(weak(x, none, 17) == x);
    CHECK(strong(x, none, 17) == x);
}

TEST_CASE("the same draw reproduces the same output") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    const AugmentParams p = AugmentParams::scaled(1.0);
    CHECK(weak(x, p, 3) == weak(x, p, 3));
    CHECK(strong(x, p, 3) == strong(x, p, 3));
    CHECK(weak(x, p, 3) != weak(x, p, 4));
}

TEST_CASE("weak jitter has the requested standard deviation") {
    const std::vector<double> x{0.5, -1.0, 2.0};
    const AugmentParams p{0.3, 1.0, 0.25};
    const int draws = 10000;
    std::vector<double> sum(3, 0.0), sum_sq(3, 0.0);
    for (int d = 0; d < draws; ++d) {
        const auto y = weak(x, p, static_cast<std::uint64_t>(d));
        for (std::size_t j = 0; j < 3; ++j) {
            const double e = y[j] - x[j];
            sum[j] += e;
            sum_sq[j] += e * e;
        }
    }
    for (std::size_t j = 0; j < 3; ++j) {
        const double mean = sum[j] / draws;
        const double sd = std::sqrt(sum_sq[j] / draws - mean * mean);
        CHECK(std::abs(sd - 0.3) / 0.3 < 0.05);
    }
}

TEST_CASE("strong augmentation zeroes floor(fraction * D) coordinates") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
    const AugmentParams p{0.0, 0.0, 0.25};
    for (std::uint64_t d = 0; d < 50; ++d) {
        const auto y = strong(x, p, d);
        int zeros = 0;
        for (std::size_t j = 0; j < 8; ++j) {
            if (y[j] == 0.0)
                ++zeros;
            else
                CHECK(y[j] == x[j]);
        }
        CHECK(zeros == 2);
    }
}

TEST_CASE("strong displaces more than weak on average") {
    const std::vector<double> x{0.3, -0.7, 1.1, 0.0, 2.0, -1.5, 0.9, 0.4};
    const AugmentParams p = AugmentParams::scaled(1.0);
    double ws = 0.0, ss = 0.0;
    for (std::uint64_t d = 0; d < 1000; ++d) {
        const auto w = weak(x, p, d);
        const auto s = strong(x, p, d);
        for (std::size_t j = 0; j < x.size(); ++j) {
            ws += (w[j] - x[j]) * (w[j] - x[j]);
            ss += (s[j] - x[j]) * (s[j] - x[j]);
        }
    }
    CHECK(ss > ws);
}

TEST_CASE("batch rows use independent draws") {
    Matrix x = Matrix::Zero(3, 4);
    const AugmentParams p{0.5, 1.0, 0.25};
    const Matrix w = weak_batch(x, p, 8);
    CHECK(w == weak_batch(x, p, 8));
    CHECK(w.row(0) != w.row(1));
    CHECK(strong_batch(x, p, 8).rows() == 3);
}
