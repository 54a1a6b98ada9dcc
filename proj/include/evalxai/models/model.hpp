#pragma once

#include <concepts>
#include <functional>
#include <optional>
#include <span>
#include <utility>

namespace evalxai {

/// A trained binary classifier seen as a prediction oracle: risk(x) is the
/// positive-class probability in [0, 1]. Anything satisfying this concept can
/// be evaluated, including models trained outside this library.
template <class M>
concept ProbabilityModel = requires(const M& m, std::span<const double> x) {
    { m.risk(x) } -> std::convertible_to<double>;
};

inline constexpr double kDecisionThreshold = 0.5;

inline int class_of(double risk) { return risk >= kDecisionThreshold ? 1 : 0; }

template <ProbabilityModel M>
int classify(const M& model, std::span<const double> x) {
    return class_of(model.risk(x));
}

/// Adapts any callable to the ProbabilityModel concept.
class FunctionModel {
public:
    explicit FunctionModel(std::function<double(std::span<const double>)> fn) : fn_(std::move(fn)) {}
    double risk(std::span<const double> x) const { return fn_(x); }

private:
    std::function<double(std::span<const double>)> fn_;
};

struct ModelScore {
    double accuracy = 0.0;
    double f1 = 0.0;            // positive class
    std::optional<double> auc;  // absent when the test set has a single class
};

} // namespace evalxai
