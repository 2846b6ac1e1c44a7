#include "scope/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scope/error.hpp"

namespace scope {

namespace {

void check_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) throw InvalidInput("network needs at least input and output dims");
    for (int d : dims)
        if (d < 1) throw InvalidInput("network dims must be positive");
}

// Row-wise log-softmax of logits, stabilised by the row max.
Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

struct Activations {
    std::vector<Matrix> hidden;  // post-tanh activation of each hidden layer
    Matrix log_probs;
};

Activations run_layers(const ModelParams& params, const Matrix& batch) {
    if (params.layers.empty()) throw InvalidInput("network has no layers");
    if (batch.cols() != params.input_dim())
        throw InvalidInput("batch has " + std::to_string(batch.cols()) +
                           " columns, network expects " + std::to_string(params.input_dim()));
    Activations acts;
    const Matrix* input = &batch;
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Matrix z = (*input) * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        acts.hidden.push_back(z.array().tanh().matrix());
        input = &acts.hidden.back();
    }
    const auto& out = params.layers.back();
    Matrix logits = (*input) * out.weights.transpose();
    logits.rowwise() += out.bias.transpose();
    acts.log_probs = log_softmax(logits);
    return acts;
}

void check_targets(const ModelParams& params, const Matrix& batch, const Matrix& targets,
                   const Vector& weights) {
    if (targets.rows() != batch.rows() || targets.cols() != params.num_classes())
        throw InvalidInput("targets must be N x C");
    if (weights.size() != batch.rows()) throw InvalidInput("sample_weights must have N entries");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw InvalidInput("sample_weights must be finite and non-negative");
}

double weighted_loss(const Matrix& log_probs, const Matrix& targets, const Vector& weights,
                     double weight_sum) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
        if (weights[i] == 0.0) continue;
        double row = 0.0;
        for (Eigen::Index c = 0; c < log_probs.cols(); ++c)
            if (targets(i, c) != 0.0) row += targets(i, c) * log_probs(i, c);
        total += weights[i] * row;
    }
    return -total / weight_sum;
}

}  // namespace

ModelParams ModelParams::zeros(const std::vector<int>& dims) {
    check_dims(dims);
    ModelParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        p.layers.push_back({Matrix::Zero(dims[l + 1], dims[l]), Vector::Zero(dims[l + 1])});
    return p;
}

ModelParams ModelParams::glorot(const std::vector<int>& dims, Rng& rng) {
    ModelParams p = zeros(dims);
    for (auto& layer : p.layers) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
            layer.weights.data()[i] = rng.uniform(-limit, limit);
    }
    return p;
}

std::vector<int> ModelParams::dims() const {
    std::vector<int> d;
    if (layers.empty()) return d;
    d.push_back(static_cast<int>(layers.front().weights.cols()));
    for (const auto& layer : layers) d.push_back(static_cast<int>(layer.weights.rows()));
    return d;
}

int ModelParams::input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int ModelParams::num_classes() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

std::size_t ModelParams::num_parameters() const {
    std::size_t n = 0;
    for (const auto& layer : layers)
        n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    return n;
}

bool ModelParams::all_finite() const {
    for (const auto& layer : layers)
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    return true;
}

ForwardResult forward(const ModelParams& params, const Matrix& batch) {
    Activations acts = run_layers(params, batch);
    ForwardResult result;
    result.probabilities = acts.log_probs.array().exp().matrix();
    // exp of a log-softmax can drift from 1 by a few ulps; renormalise.
    for (Eigen::Index i = 0; i < result.probabilities.rows(); ++i)
        result.probabilities.row(i) /= result.probabilities.row(i).sum();
    result.penultimate = acts.hidden.empty() ? batch : std::move(acts.hidden.back());
    return result;
}

std::vector<int> predict(const ModelParams& params, const Matrix& batch) {
    const Activations acts = run_layers(params, batch);
    std::vector<int> out(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        Eigen::Index arg = 0;
        acts.log_probs.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

double loss_only(const ModelParams& params, const Matrix& batch, const Matrix& targets,
                 const Vector& sample_weights) {
    check_targets(params, batch, targets, sample_weights);
    const double wsum = sample_weights.sum();
    if (wsum <= 0.0) throw DegenerateBatch("all sample weights are zero");
    const Activations acts = run_layers(params, batch);
    return weighted_loss(acts.log_probs, targets, sample_weights, wsum);
}

LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& batch, const Matrix& targets,
                          const Vector& sample_weights) {
    check_targets(params, batch, targets, sample_weights);
    const double wsum = sample_weights.sum();
    if (wsum <= 0.0) throw DegenerateBatch("all sample weights are zero");

    const Activations acts = run_layers(params, batch);
    LossAndGrad out;
    out.loss = weighted_loss(acts.log_probs, targets, sample_weights, wsum);

    // dL/dlogits_i = (w_i / sum w) * (p_i * sum_c Y_ic - Y_i)
    const Matrix probs = acts.log_probs.array().exp().matrix();
    Matrix delta(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double scale = sample_weights[i] / wsum;
        if (scale == 0.0) {
            delta.row(i).setZero();
            continue;
        }
        delta.row(i) = scale * (probs.row(i) * targets.row(i).sum() - targets.row(i));
    }

    const std::size_t n_layers = params.layers.size();
    out.grads.layers.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& input = (l == 0) ? batch : acts.hidden[l - 1];
        out.grads.layers[l].weights = delta.transpose() * input;
        out.grads.layers[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            const Matrix& a = acts.hidden[l - 1];
            delta = ((delta * params.layers[l].weights).array() * (1.0 - a.array().square()))
                        .matrix();
        }
    }
    return out;
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, double learning_rate) {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw InvalidInput("learning rate must be finite and non-negative");
    if (grads.layers.size() != params.layers.size())
        throw InvalidInput("gradient structure does not match parameters");
    if (!grads.all_finite()) throw TrainingDiverged("non-finite gradient");
    ModelParams next = params;
    for (std::size_t l = 0; l < next.layers.size(); ++l) {
        next.layers[l].weights -= learning_rate * grads.layers[l].weights;
        next.layers[l].bias -= learning_rate * grads.layers[l].bias;
    }
    return next;
}

ModelParams numeric_gradient(const ModelParams& params, const Matrix& batch, const Matrix& targets, double eps) {
    const Vector weights = Vector::Ones(batch.rows());
    ModelParams probe = params;
    ModelParams numeric = ModelParams::zeros(params.dims());
    std::vector<double*> slots;
    numeric.for_each([&](double& g) { slots.push_back(&g); });
    std::size_t idx = 0;
    probe.for_each([&](double& theta) {
        const double saved = theta;
        theta = saved + eps;
        const double up = loss_only(probe, batch, targets, weights);
        theta = saved - eps;
        const double down = loss_only(probe, batch, targets, weights);
        theta = saved;
        *slots[idx++] = (up - down) / (2.0 * eps);
    });
    return numeric;
}

double max_relative_error(const ModelParams& analytic, const ModelParams& numeric) {
    if (analytic.dims() != numeric.dims()) throw InvalidInput("gradient structures differ");
    std::vector<double> a_flat;
    analytic.for_each([&](double g) { a_flat.push_back(g); });
    std::size_t idx = 0;
    double worst = 0.0;
    numeric.for_each([&](double n) {
        const double a = a_flat[idx++];
        const double denom = std::max({std::abs(a), std::abs(n), 1e-12});
        worst = std::max(worst, std::abs(a - n) / denom);
    });
    return worst;
}

double grad_check(const ModelParams& params, const Matrix& batch, const Matrix& targets, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw InvalidInput("eps must lie in [1e-7, 1e-3]");
    const LossAndGrad analytic = loss_and_grad(params, batch, targets, Vector::Ones(batch.rows()));
    return max_relative_error(analytic.grads, numeric_gradient(params, batch, targets, eps));
}

Matrix one_hot(const std::vector<int>& classes, int num_classes) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), num_classes);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0 || classes[i] >= num_classes) throw InvalidInput("class id out of range");
        m(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
    }
    return m;
}

nlohmann::json to_json(const ModelParams& params) {
    nlohmann::json doc;
    doc["dims"] = params.dims();
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& layer : params.layers) {
        nlohmann::json w = nlohmann::json::array();
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(layer.weights.cols()));
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                row[static_cast<std::size_t>(c)] = layer.weights(r, c);
            w.push_back(row);
        }
        std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
        layers.push_back({{"w", std::move(w)}, {"b", std::move(b)}});
    }
    return doc;
}

ModelParams params_from_json(const nlohmann::json& doc) {
    try {
        const auto dims = doc.at("dims").get<std::vector<int>>();
        ModelParams p = ModelParams::zeros(dims);
        const auto& layers = doc.at("layers");
        if (layers.size() != p.layers.size()) throw ParseError("layer count does not match dims");
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            const auto w = layers[l].at("w").get<std::vector<std::vector<double>>>();
            const auto b = layers[l].at("b").get<std::vector<double>>();
            auto& layer = p.layers[l];
            if (static_cast<Eigen::Index>(w.size()) != layer.weights.rows() ||
                static_cast<Eigen::Index>(b.size()) != layer.bias.size())
                throw ParseError("layer " + std::to_string(l) + " shape does not match dims");
            for (std::size_t r = 0; r < w.size(); ++r) {
                if (static_cast<Eigen::Index>(w[r].size()) != layer.weights.cols())
                    throw ParseError("layer " + std::to_string(l) + " row width does not match dims");
                for (std::size_t c = 0; c < w[r].size(); ++c)
                    layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r][c];
            }
            for (std::size_t i = 0; i < b.size(); ++i) layer.bias[static_cast<Eigen::Index>(i)] = b[i];
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model params: ") + e.what());
    }
}

}  // namespace scope
