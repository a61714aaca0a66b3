#pragma once

// Small feed-forward classifier with hand-derived gradients.
//
// Inputs are passed column-wise: a batch is a (input_dim x B) matrix and
// soft targets are (num_classes x B). The last layer is linear followed by a
// softmax; every earlier layer applies its own activation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sslpoison/errors.hpp"

namespace sslpoison::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probabilities are clamped to this floor before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

enum class Activation { tanh, relu, identity };

enum class LossKind {
    cross_entropy,  ///< -sum t log p
    squared_error,  ///< sum (p - t)^2 over classes
    kl_divergence,  ///< sum t (log t - log p)
    entropy,        ///< -sum p log p; the target is ignored
};

inline std::string to_string(LossKind kind) {
    switch (kind) {
    case LossKind::cross_entropy: return "cross-entropy";
    case LossKind::squared_error: return "squared-error";
    case LossKind::kl_divergence: return "kl-divergence";
    case LossKind::entropy: return "entropy";
    }
    return "?";
}

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + s + "'");
}

struct Architecture {
    int input_dim = 2;
    std::vector<int> hidden{64, 64};
    int num_classes = 2;
    Activation activation = Activation::tanh;
};

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::identity;

    bool operator==(const Layer& o) const {
        return activation == o.activation && weight.rows() == o.weight.rows() &&
               weight.cols() == o.weight.cols() && bias.size() == o.bias.size() && weight == o.weight &&
               bias == o.bias;
    }
};

/// Weights and biases of every layer. Gradients use the same type.
struct ModelParams {
    std::vector<Layer> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    int num_classes() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    bool same_shape(const ModelParams& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& a = layers[i];
            const auto& b = o.layers[i];
            if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
                a.bias.size() != b.bias.size())
                return false;
        }
        return true;
    }

    /// Layer sizes are consistent with one another.
    bool well_formed() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].bias.size() != layers[i].weight.rows()) return false;
            if (i > 0 && layers[i].weight.cols() != layers[i - 1].weight.rows()) return false;
        }
        return !layers.empty();
    }

    ModelParams zeros_like() const {
        ModelParams z = *this;
        for (auto& l : z.layers) {
            l.weight.setZero();
            l.bias.setZero();
        }
        return z;
    }

    /// this += scale * other
    void add_scaled(const ModelParams& other, double scale) {
        require_same_shape(other);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight += scale * other.layers[i].weight;
            layers[i].bias += scale * other.layers[i].bias;
        }
    }

    void scale(double s) {
        for (auto& l : layers) {
            l.weight *= s;
            l.bias *= s;
        }
    }

    /// Visits every scalar parameter in a fixed order (layer, weight col-major, bias).
    template <typename F>
    void for_each(F&& f) {
        for (auto& l : layers) {
            for (Eigen::Index k = 0; k < l.weight.size(); ++k) f(l.weight.data()[k]);
            for (Eigen::Index k = 0; k < l.bias.size(); ++k) f(l.bias.data()[k]);
        }
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& l : layers) {
            for (Eigen::Index k = 0; k < l.weight.size(); ++k) f(l.weight.data()[k]);
            for (Eigen::Index k = 0; k < l.bias.size(); ++k) f(l.bias.data()[k]);
        }
    }

    bool operator==(const ModelParams& o) const { return layers == o.layers; }

    void require_same_shape(const ModelParams& other) const {
        if (!same_shape(other)) throw ShapeError("parameter sets have different layer shapes");
    }
};

/// Glorot-uniform weights, zero biases. Same seed and architecture give identical parameters.
inline ModelParams make_model(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim <= 0 || arch.num_classes <= 0) throw ConfigError("architecture needs positive sizes");
    std::mt19937_64 rng(seed);
    ModelParams p;
    int fan_in = arch.input_dim;
    std::vector<int> widths = arch.hidden;
    widths.push_back(arch.num_classes);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const int fan_out = widths[i];
        if (fan_out <= 0) throw ConfigError("hidden widths must be positive");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Layer layer;
        layer.weight.resize(fan_out, fan_in);
        for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = u(rng);
        layer.bias = Vector::Zero(fan_out);
        layer.activation = (i + 1 == widths.size()) ? Activation::identity : arch.activation;
        p.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return p;
}

namespace detail {

inline void apply_activation(Matrix& m, Activation a) {
    switch (a) {
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::identity: break;
    }
}

/// Multiplies `grad` in place by the activation derivative, expressed via the activation output.
inline void activation_backward(Matrix& grad, const Matrix& out, Activation a) {
    switch (a) {
    case Activation::tanh: grad.array() *= (1.0 - out.array().square()); break;
    case Activation::relu: grad.array() *= (out.array() > 0.0).cast<double>(); break;
    case Activation::identity: break;
    }
}

inline void softmax_columns(Matrix& z) {
    for (Eigen::Index b = 0; b < z.cols(); ++b) {
        auto col = z.col(b);
        const double mx = col.maxCoeff();
        col = (col.array() - mx).exp().matrix();
        col /= col.sum();
    }
}

} // namespace detail

/// Per-layer outputs of a batch forward pass; `outputs.back()` holds probabilities.
struct ForwardCache {
    std::vector<Matrix> outputs;  // outputs[0] is the input batch
    const Matrix& probabilities() const { return outputs.back(); }
};

inline ForwardCache forward_cached(const ModelParams& params, const Matrix& inputs) {
    if (!params.well_formed()) throw ShapeError("malformed model parameters");
    if (inputs.rows() != params.input_dim())
        throw ShapeError("input has dimension " + std::to_string(inputs.rows()) + ", model expects " +
                         std::to_string(params.input_dim()));
    ForwardCache cache;
    cache.outputs.reserve(params.layers.size() + 1);
    cache.outputs.push_back(inputs);
    for (const auto& layer : params.layers) {
        Matrix z = layer.weight * cache.outputs.back();
        z.colwise() += layer.bias;
        detail::apply_activation(z, layer.activation);
        cache.outputs.push_back(std::move(z));
    }
    detail::softmax_columns(cache.outputs.back());
    return cache;
}

/// Class probabilities for each column of `inputs`, floored at kProbabilityFloor.
inline Matrix forward_batch(const ModelParams& params, const Matrix& inputs) {
    Matrix p = std::move(forward_cached(params, inputs).outputs.back());
    return p.cwiseMax(kProbabilityFloor);
}

inline Vector forward(const ModelParams& params, const Vector& x) {
    if (x.size() != params.input_dim())
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(params.input_dim()));
    return forward_batch(params, Matrix(x)).col(0);
}

inline int argmax(const Vector& p) {
    Eigen::Index i = 0;
    p.maxCoeff(&i);
    return static_cast<int>(i);
}

inline int predict_class(const ModelParams& params, const Vector& x) { return argmax(forward(params, x)); }

/// A batch of inputs with soft targets and optional per-example weights (empty = all ones).
struct Batch {
    Matrix inputs;           // d x B
    Matrix targets;          // C x B
    Vector example_weights;  // B, or empty
};

inline Matrix one_hot(const std::vector<int>& labels, int num_classes) {
    Matrix t = Matrix::Zero(num_classes, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t b = 0; b < labels.size(); ++b) {
        if (labels[b] < 0 || labels[b] >= num_classes) throw ContractError("label out of range");
        t(labels[b], static_cast<Eigen::Index>(b)) = 1.0;
    }
    return t;
}

namespace detail {

/// Per-example losses and d(loss_b)/d(logits_b), given softmax output `p`.
inline Vector loss_and_logit_grad(const Matrix& p, const Matrix& t, LossKind kind, Matrix& dlogits) {
    const Eigen::Index B = p.cols();
    Vector losses(B);
    dlogits.resize(p.rows(), B);
    const Matrix logp = p.cwiseMax(kProbabilityFloor).array().log().matrix();
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto pc = p.col(b);
        const auto tc = t.col(b);
        switch (kind) {
        case LossKind::cross_entropy:
        case LossKind::kl_divergence: {
            double l = -tc.dot(logp.col(b));
            if (kind == LossKind::kl_divergence) {
                for (Eigen::Index c = 0; c < tc.size(); ++c)
                    if (tc(c) > 0.0) l += tc(c) * std::log(tc(c));
            }
            losses(b) = l;
            dlogits.col(b) = pc * tc.sum() - tc;
            break;
        }
        case LossKind::squared_error: {
            const Vector diff = pc - tc;
            losses(b) = diff.squaredNorm();
            const Vector g = 2.0 * diff;
            dlogits.col(b) = pc.cwiseProduct((g.array() - pc.dot(g)).matrix());
            break;
        }
        case LossKind::entropy: {
            const double h = -pc.dot(logp.col(b));
            losses(b) = h;
            dlogits.col(b) = -pc.cwiseProduct((logp.col(b).array() + h).matrix());
            break;
        }
        }
    }
    return losses;
}

/// Backpropagates d(loss)/d(logits) through the network. Fills `grad` if non-null
/// and returns d(loss)/d(inputs).
inline Matrix backward(const ModelParams& params, const ForwardCache& cache, Matrix delta, ModelParams* grad) {
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        if (li + 1 != params.layers.size()) detail::activation_backward(delta, cache.outputs[li + 1], layer.activation);
        if (grad) {
            grad->layers[li].weight.noalias() = delta * cache.outputs[li].transpose();
            grad->layers[li].bias = delta.rowwise().sum();
        }
        delta = layer.weight.transpose() * delta;
    }
    return delta;
}

inline void check_batch(const ModelParams& params, const Batch& batch, LossKind kind) {
    if (batch.inputs.cols() == 0) throw ContractError("empty batch");
    if (batch.inputs.rows() != params.input_dim()) throw ShapeError("batch input dimension mismatch");
    if (kind != LossKind::entropy &&
        (batch.targets.cols() != batch.inputs.cols() || batch.targets.rows() != params.num_classes()))
        throw ShapeError("batch targets must be num_classes x batch_size");
    if (batch.example_weights.size() != 0 && batch.example_weights.size() != batch.inputs.cols())
        throw ShapeError("example weights must have one entry per example");
}

} // namespace detail

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grad;
};

/// Mean per-example loss (optionally reweighted per example) times `weight`, and its gradient.
inline LossAndGrad loss_and_grad(const ModelParams& params, const Batch& batch, LossKind kind, double weight = 1.0) {
    detail::check_batch(params, batch, kind);
    const auto cache = forward_cached(params, batch.inputs);
    const Eigen::Index B = batch.inputs.cols();
    Matrix targets = kind == LossKind::entropy ? Matrix::Zero(params.num_classes(), B) : batch.targets;
    Matrix dlogits;
    Vector losses = detail::loss_and_logit_grad(cache.probabilities(), targets, kind, dlogits);
    Vector w = batch.example_weights.size() ? batch.example_weights : Vector::Ones(B);
    const double scale = weight / static_cast<double>(B);
    LossAndGrad out;
    out.loss = scale * losses.dot(w);
    dlogits = dlogits * (w * scale).asDiagonal();
    out.grad = params.zeros_like();
    detail::backward(params, cache, std::move(dlogits), &out.grad);
    return out;
}

/// d(loss_b)/d(x_b) for every column, with loss_b the unweighted per-example loss.
inline Matrix input_gradient(const ModelParams& params, const Matrix& inputs, const Matrix& targets, LossKind kind) {
    Batch b{inputs, targets, {}};
    detail::check_batch(params, b, kind);
    const auto cache = forward_cached(params, inputs);
    Matrix t = kind == LossKind::entropy ? Matrix::Zero(params.num_classes(), inputs.cols()) : targets;
    Matrix dlogits;
    detail::loss_and_logit_grad(cache.probabilities(), t, kind, dlogits);
    return detail::backward(params, cache, std::move(dlogits), nullptr);
}

/// Gradient with respect to x of sum_c w_c * log p_c(x), where `logit_weights`
/// sums to zero (so it equals the same combination of logits).
inline Vector logit_input_gradient(const ModelParams& params, const Vector& x, const Vector& logit_weights) {
    if (x.size() != params.input_dim()) throw ShapeError("input dimension mismatch");
    if (logit_weights.size() != params.num_classes()) throw ShapeError("logit weights need one entry per class");
    const auto cache = forward_cached(params, Matrix(x));
    return detail::backward(params, cache, Matrix(logit_weights), nullptr).col(0);
}

/// params - lr * grad
inline ModelParams sgd_step(const ModelParams& params, const ModelParams& grad, double lr) {
    if (lr < 0.0) throw ContractError("learning rate must be nonnegative");
    params.require_same_shape(grad);
    ModelParams next = params;
    next.add_scaled(grad, -lr);
    return next;
}

/// SGD with classical momentum; momentum 0 reduces to sgd_step.
class SgdOptimizer {
public:
    SgdOptimizer(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {
        if (lr < 0.0) throw ContractError("learning rate must be nonnegative");
        if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must be in [0,1)");
    }

    void step(ModelParams& params, const ModelParams& grad) {
        params.require_same_shape(grad);
        if (momentum_ == 0.0) {
            params.add_scaled(grad, -lr_);
            return;
        }
        if (!velocity_.same_shape(params)) velocity_ = params.zeros_like();
        velocity_.scale(momentum_);
        velocity_.add_scaled(grad, 1.0);
        params.add_scaled(velocity_, -lr_);
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_;
    double momentum_;
    ModelParams velocity_;
};

/// Shadow weights tracking a model by exponential moving average.
struct EmaParams {
    ModelParams shadow;
    double decay = 0.999;
};

inline EmaParams make_ema(const ModelParams& params, double decay) {
    if (decay < 0.0 || decay > 1.0) throw ContractError("EMA decay must be in [0,1]");
    return EmaParams{params, decay};
}

/// shadow <- decay * shadow + (1 - decay) * params
inline EmaParams ema_update(EmaParams ema, const ModelParams& params) {
    ema.shadow.require_same_shape(params);
    ema.shadow.scale(ema.decay);
    ema.shadow.add_scaled(params, 1.0 - ema.decay);
    return ema;
}

} // namespace sslpoison::nn
