#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/models/model.hpp"

namespace evalxai {

struct LogRegConfig {
    double learning_rate = 0.5;
    std::size_t epochs = 500;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
};

class LogisticRegressionModel {
public:
    LogisticRegressionModel() = default;
    LogisticRegressionModel(std::vector<double> weights, double intercept, LogRegConfig config = {})
        : weights_(std::move(weights)), intercept_(intercept), config_(config) {}

    double logit(std::span<const double> x) const {
        double z = intercept_;
        for (std::size_t f = 0; f < weights_.size(); ++f) z += weights_[f] * x[f];
        return z;
    }
    double risk(std::span<const double> x) const { return sigmoid(logit(x)); }

    const std::vector<double>& weights() const { return weights_; }
    double intercept() const { return intercept_; }
    const LogRegConfig& config() const { return config_; }

private:
    std::vector<double> weights_;
    double intercept_ = 0.0;
    LogRegConfig config_;
};

namespace detail {

// Mean logistic loss plus (l2/2)|w|^2 over a row-major matrix.
inline double logreg_loss(std::span<const double> x, std::span<const int> y, std::size_t d,
                          std::span<const double> w, double b, double l2) {
    const std::size_t n = y.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t f = 0; f < d; ++f) z += w[f] * x[i * d + f];
        // log(1 + e^z) - y z, evaluated without overflow
        loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y[i] * z;
    }
    double reg = 0.0;
    for (double wf : w) reg += wf * wf;
    return loss / static_cast<double>(n) + 0.5 * l2 * reg;
}

// Gradient of logreg_loss; the last entry is the intercept component.
inline std::vector<double> logreg_gradient(std::span<const double> x, std::span<const int> y,
                                           std::size_t d, std::span<const double> w, double b,
                                           double l2) {
    const std::size_t n = y.size();
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t f = 0; f < d; ++f) z += w[f] * x[i * d + f];
        const double r = sigmoid(z) - y[i];
        for (std::size_t f = 0; f < d; ++f) g[f] += r * x[i * d + f];
        g[d] += r;
    }
    for (auto& v : g) v /= static_cast<double>(n);
    for (std::size_t f = 0; f < d; ++f) g[f] += l2 * w[f];
    return g;
}

} // namespace detail

/// Full-batch gradient descent on the L2-regularized logistic loss. Features
/// are standardized internally and the scaling is folded back into the
/// returned weights, so the model consumes raw feature units. The L2 term is
/// applied as a proximal shrink, which stays stable for any penalty strength.
inline LogisticRegressionModel train_logreg(const Dataset& train, const LogRegConfig& config = {}) {
    if (train.empty()) throw DataError("logistic regression needs a nonempty training set");
    if (train.count_label(0) == 0 || train.count_label(1) == 0) {
        throw DataError("logistic regression needs both classes in the training set");
    }
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (config.l2 < 0.0) throw ConfigError("l2 must be nonnegative");

    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    std::vector<double> mu(d, 0.0), sd(d, 1.0);
    for (std::size_t f = 0; f < d; ++f) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += train.at(i, f);
        mu[f] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (train.at(i, f) - mu[f]) * (train.at(i, f) - mu[f]);
        const double v = std::sqrt(ss / static_cast<double>(n));
        sd[f] = v > 0.0 ? v : 1.0;
    }
    std::vector<double> xs(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < d; ++f) xs[i * d + f] = (train.at(i, f) - mu[f]) / sd[f];
    }

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    const double shrink = 1.0 / (1.0 + config.learning_rate * config.l2);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto g = detail::logreg_gradient(xs, train.labels(), d, w, b, 0.0);
        for (std::size_t f = 0; f < d; ++f) w[f] = (w[f] - config.learning_rate * g[f]) * shrink;
        b -= config.learning_rate * g[d];
    }
    const double loss = detail::logreg_loss(xs, train.labels(), d, w, b, config.l2);
    if (!std::isfinite(loss)) throw Error("logistic regression diverged (non-finite loss)");

    std::vector<double> raw(d);
    double intercept = b;
    for (std::size_t f = 0; f < d; ++f) {
        raw[f] = w[f] / sd[f];
        intercept -= raw[f] * mu[f];
    }
    return LogisticRegressionModel(std::move(raw), intercept, config);
}

} // namespace evalxai
