#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scope/rng.hpp"

namespace scope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One affine layer. `weights` is out x in, `bias` has `out` entries.
struct DenseLayer {
    Matrix weights;
    Vector bias;

    bool operator==(const DenseLayer& other) const {
        return weights == other.weights && bias == other.bias;
    }
};

/// Parameters of a feed-forward classifier: tanh on every hidden layer,
/// softmax on the output layer.
struct ModelParams {
    std::vector<DenseLayer> layers;

    /// Zero-initialised network for dims = {D, H1, ..., HL, C}.
    static ModelParams zeros(const std::vector<int>& dims);
    /// Glorot-uniform weights, zero biases.
    static ModelParams glorot(const std::vector<int>& dims, Rng& rng);

    std::vector<int> dims() const;
    int input_dim() const;
    int num_classes() const;
    std::size_t num_parameters() const;
    bool all_finite() const;

    /// Visit every scalar parameter in a fixed order (layer, weights
    /// column-major, then bias).
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& layer : layers) {
            for (Eigen::Index i = 0; i < layer.weights.size(); ++i) fn(layer.weights.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias.data()[i]);
        }
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& layer : layers) {
            for (Eigen::Index i = 0; i < layer.weights.size(); ++i) fn(layer.weights.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias.data()[i]);
        }
    }

    bool operator==(const ModelParams& other) const { return layers == other.layers; }
};

/// Per-sample outputs: softmax probabilities (N x C) and the last hidden
/// activation (N x H_L; the input itself when there is no hidden layer).
struct ForwardResult {
    Matrix probabilities;
    Matrix penultimate;
};

ForwardResult forward(const ModelParams& params, const Matrix& batch);

/// Predicted class (argmax of probabilities) for every row of `batch`.
std::vector<int> predict(const ModelParams& params, const Matrix& batch);

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grads;
};

/// Weighted cross-entropy  -(1/sum w) sum_i w_i sum_c Y_ic log p_ic  and its
/// exact gradient. Throws DegenerateBatch if every weight is zero.
LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& batch,
                          const Matrix& targets, const Vector& sample_weights);

/// Same loss without the gradient pass.
double loss_only(const ModelParams& params, const Matrix& batch, const Matrix& targets,
                 const Vector& sample_weights);

/// params - learning_rate * grads. Throws TrainingDiverged on non-finite grads.
ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, double learning_rate);

/// Central-difference gradient of the unit-weighted loss.
ModelParams numeric_gradient(const ModelParams& params, const Matrix& batch, const Matrix& targets, double eps);

/// max over parameters of |a - n| / max(|a|, |n|, 1e-12).
double max_relative_error(const ModelParams& analytic, const ModelParams& numeric);

/// Max relative error between analytic and central-difference gradients
/// (unit sample weights). eps must lie in [1e-7, 1e-3].
double grad_check(const ModelParams& params, const Matrix& batch, const Matrix& targets,
                  double eps);

/// One-hot targets (N x C) from class ids.
Matrix one_hot(const std::vector<int>& classes, int num_classes);

nlohmann::json to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& doc);

}  // namespace scope
