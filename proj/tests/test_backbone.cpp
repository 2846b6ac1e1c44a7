#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "scope/backbone.hpp"
#include "scope/error.hpp"

using namespace scope;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
    return m;
}

std::vector<int> random_classes(Rng& rng, int n, int classes) {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int& c : out) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return out;
}

// Scalar-loop forward pass, written independently of the Eigen path.
std::vector<std::vector<double>> oracle_probs(const ModelParams& p, const Matrix& batch) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index n = 0; n < batch.rows(); ++n) {
        std::vector<double> act(static_cast<std::size_t>(batch.cols()));
        for (Eigen::Index j = 0; j < batch.cols(); ++j) act[static_cast<std::size_t>(j)] = batch(n, j);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            const auto& L = p.layers[l];
            std::vector<double> z(static_cast<std::size_t>(L.weights.rows()));
            for (Eigen::Index o = 0; o < L.weights.rows(); ++o) {
                double s = L.bias[o];
                for (Eigen::Index i = 0; i < L.weights.cols(); ++i) s += L.weights(o, i) * act[static_cast<std::size_t>(i)];
                z[static_cast<std::size_t>(o)] = s;
            }
            if (l + 1 < p.layers.size())
                for (double& v : z) v = std::tanh(v);
            act = z;
        }
        double mx = act[0];
        for (double v : act) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : act) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : act) v /= sum;
        out.push_back(act);
    }
    return out;
}

double oracle_loss(const ModelParams& p, const Matrix& batch, const std::vector<int>& classes,
                   const std::vector<double>& weights) {
    const auto probs = oracle_probs(p, batch);
    double total = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        total += weights[i] * std::log(probs[i][static_cast<std::size_t>(classes[i])]);
        wsum += weights[i];
    }
    return -total / wsum;
}

ModelParams seeded_net(std::uint64_t seed, const std::vector<int>& dims) {
    Rng rng(seed, Stream::kInit);
    return ModelParams::glorot(dims, rng);
}

}  // namespace

TEST_CASE("zero-weight network predicts the uniform distribution") {
    const ModelParams p = ModelParams::zeros({5, 7, 4});
    Rng rng(3);
    const auto fwd = forward(p, random_matrix(rng, 6, 5));
    for (Eigen::Index i = 0; i < fwd.probabilities.size(); ++i)
        CHECK(fwd.probabilities.data()[i] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(fwd.penultimate.cols() == 7);
}

TEST_CASE("softmax rows sum to one for arbitrary finite inputs") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(6));
        const int c = 2 + static_cast<int>(rng.below(8));
        ModelParams p = ModelParams::zeros({d, 9, c});
        for (auto& layer : p.layers) layer.weights = random_matrix(rng, static_cast<int>(layer.weights.rows()),
                                                                   static_cast<int>(layer.weights.cols()), 20.0);
        const auto fwd = forward(p, random_matrix(rng, 5, d, 50.0));
        for (Eigen::Index i = 0; i < fwd.probabilities.rows(); ++i) {
            CHECK(std::abs(fwd.probabilities.row(i).sum() - 1.0) <= 1e-9);
            CHECK(fwd.probabilities.row(i).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("forward pass matches a scalar-loop oracle") {
    const ModelParams p = seeded_net(0, {3, 6, 4});
    Rng rng(0);
    const Matrix x = random_matrix(rng, 5, 3);
    const auto fwd = forward(p, x);
    const auto expected = oracle_probs(p, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < 4; ++c)
            CHECK(std::abs(fwd.probabilities(i, c) - expected[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]) < 1e-13);
}

TEST_CASE("forward rejects a batch of the wrong width") {
    const ModelParams p = ModelParams::zeros({3, 4, 2});
    CHECK_THROWS_AS(forward(p, Matrix::Zero(2, 4)), InvalidInput);
}

TEST_CASE("cross-entropy limits") {
    SUBCASE("uniform prediction over 10 classes costs ln 10") {
        const ModelParams p = ModelParams::zeros({2, 10});
        const auto lg = loss_and_grad(p, Matrix::Ones(3, 2), one_hot({0, 4, 9}, 10), Vector::Ones(3));
        CHECK(lg.loss == doctest::Approx(std::log(10.0)).epsilon(1e-14));
        CHECK(lg.loss == doctest::Approx(2.302585).epsilon(1e-6));
    }
    SUBCASE("confident correct prediction costs nothing") {
        ModelParams p = ModelParams::zeros({2, 3});
        p.layers[0].bias << 60.0, 0.0, 0.0;
        const auto lg = loss_and_grad(p, Matrix::Ones(2, 2), one_hot({0, 0}, 3), Vector::Ones(2));
        CHECK(lg.loss < 1e-20);
    }
}

TEST_CASE("analytic gradients match an independent finite-difference oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(4));
        const int c = 2 + static_cast<int>(rng.below(3));
        const ModelParams p = seeded_net(100 + static_cast<std::uint64_t>(trial), {d, 5, 4, c});
        const Matrix x = random_matrix(rng, 4, d);
        const auto cls = random_classes(rng, 4, c);
        const std::vector<double> w{1.0, 0.5, 0.0, 2.0};
        Vector wv(4);
        wv << 1.0, 0.5, 0.0, 2.0;
        const auto lg = loss_and_grad(p, x, one_hot(cls, c), wv);
        CHECK(lg.loss == doctest::Approx(oracle_loss(p, x, cls, w)).epsilon(1e-12));

        const double h = 1e-5;
        std::vector<double> analytic;
        lg.grads.for_each([&](double g) { analytic.push_back(g); });
        ModelParams probe = p;
        std::size_t idx = 0;
        double worst = 0.0;
        probe.for_each([&](double& theta) {
            const double saved = theta;
            theta = saved + h;
            const double up = oracle_loss(probe, x, cls, w);
            theta = saved - h;
            const double down = oracle_loss(probe, x, cls, w);
            theta = saved;
            const double numeric = (up - down) / (2 * h);
            const double a = analytic[idx++];
            worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12}));
        });
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("unit weights reproduce the unweighted loss") {
    const ModelParams p = seeded_net(5, {3, 8, 3});
    Rng rng(5);
    const Matrix x = random_matrix(rng, 7, 3);
    const auto cls = random_classes(rng, 7, 3);
    const auto lg = loss_and_grad(p, x, one_hot(cls, 3), Vector::Ones(7));
    CHECK(lg.loss == doctest::Approx(oracle_loss(p, x, cls, std::vector<double>(7, 1.0))).epsilon(1e-13));
}

TEST_CASE("a zero-weight sample is equivalent to removing it") {
    const ModelParams p = seeded_net(8, {4, 6, 6, 3});
    Rng rng(8);
    const Matrix x = random_matrix(rng, 6, 4);
    const auto cls = random_classes(rng, 6, 3);
    Vector w = Vector::Ones(6);
    w[2] = 0.0;
    w[5] = 0.0;
    const auto masked = loss_and_grad(p, x, one_hot(cls, 3), w);

    Matrix kept(4, 4);
    std::vector<int> kept_cls;
    int r = 0;
    for (int i = 0; i < 6; ++i) {
        if (w[i] == 0.0) continue;
        kept.row(r++) = x.row(i);
        kept_cls.push_back(cls[static_cast<std::size_t>(i)]);
    }
    const auto removed = loss_and_grad(p, kept, one_hot(kept_cls, 3), Vector::Ones(4));
    CHECK(std::abs(masked.loss - removed.loss) <= 1e-12);
    std::vector<double> a, b;
    masked.grads.for_each([&](double g) { a.push_back(g); });
    removed.grads.for_each([&](double g) { b.push_back(g); });
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("all-zero sample weights are a degenerate batch") {
    const ModelParams p = ModelParams::zeros({2, 3});
    CHECK_THROWS_AS(loss_and_grad(p, Matrix::Ones(2, 2), one_hot({0, 1}, 3), Vector::Zero(2)), DegenerateBatch);
}

TEST_CASE("sgd_step") {
    const ModelParams p = seeded_net(2, {3, 4, 2});
    SUBCASE("zero gradient leaves parameters unchanged") {
        CHECK(sgd_step(p, ModelParams::zeros(p.dims()), 0.1) == p);
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        Rng rng(2);
        const auto lg = loss_and_grad(p, random_matrix(rng, 3, 3), one_hot({0, 1, 1}, 2), Vector::Ones(3));
        CHECK(sgd_step(p, lg.grads, 0.0) == p);
    }
    SUBCASE("one step on a one-sample logistic problem lowers the loss") {
        const ModelParams lin = seeded_net(4, {2, 2});
        Matrix x(1, 2);
        x << 0.7, -1.3;
        const Matrix y = one_hot({1}, 2);
        const auto before = loss_and_grad(lin, x, y, Vector::Ones(1));
        const auto after = loss_only(sgd_step(lin, before.grads, 0.1), x, y, Vector::Ones(1));
        CHECK(after < before.loss);
    }
    SUBCASE("non-finite gradient diverges") {
        ModelParams g = ModelParams::zeros(p.dims());
        g.layers[0].weights(0, 0) = std::nan("");
        CHECK_THROWS_AS(sgd_step(p, g, 0.1), TrainingDiverged);
    }
}

TEST_CASE("grad_check") {
    Rng rng(9);
    const ModelParams p = seeded_net(9, {3, 6, 5, 3});
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix y = one_hot(random_classes(rng, 4, 3), 3);

    CHECK(grad_check(p, x, y, 1e-5) < 1e-4);

    SUBCASE("a doubled gradient entry is detected") {
        ModelParams corrupted = loss_and_grad(p, x, y, Vector::Ones(4)).grads;
        corrupted.layers[1].weights(2, 3) *= 2.0;
        CHECK(max_relative_error(corrupted, numeric_gradient(p, x, y, 1e-5)) > 1e-2);
    }
    SUBCASE("zero batch through a zero network") {
        const ModelParams z = ModelParams::zeros({3, 4, 2});
        CHECK(grad_check(z, Matrix::Zero(2, 3), one_hot({0, 1}, 2), 1e-5) == 0.0);
    }
    SUBCASE("eps outside [1e-7, 1e-3] is rejected") {
        CHECK_THROWS_AS(grad_check(p, x, y, 1e-2), InvalidInput);
    }
}

TEST_CASE("model params survive a JSON round trip") {
    const ModelParams p = seeded_net(6, {3, 5, 2});
    const auto doc = to_json(p);
    CHECK(doc["dims"] == nlohmann::json({3, 5, 2}));
    CHECK(params_from_json(nlohmann::json::parse(doc.dump())) == p);

    auto bad = doc;
    bad["layers"][0]["b"].push_back(1.0);
    CHECK_THROWS_AS(params_from_json(bad), ParseError);
}
