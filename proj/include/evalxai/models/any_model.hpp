#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <variant>

#include "evalxai/error.hpp"
#include "evalxai/models/forest.hpp"
#include "evalxai/models/logreg.hpp"
#include "evalxai/models/tree.hpp"

namespace evalxai {

using ModelConfig = std::variant<LogRegConfig, TreeConfig, ForestConfig>;

/// Closed set of the reference model kinds, usable wherever a
/// ProbabilityModel is expected.
class AnyModel {
public:
    using Variant = std::variant<LogisticRegressionModel, DecisionTreeModel, RandomForestModel>;

    AnyModel() = default;
    template <class M>
        requires std::constructible_from<Variant, M&&>
    AnyModel(M&& m) : model_(std::forward<M>(m)) {}

    double risk(std::span<const double> x) const {
        return std::visit([&](const auto& m) { return m.risk(x); }, model_);
    }

    const Variant& get() const { return model_; }

    template <class M>
    const M* as() const { return std::get_if<M>(&model_); }

private:
    Variant model_;
};

inline std::string_view kind_name(const ModelConfig& c) {
    switch (c.index()) {
    case 0: return "logistic_regression";
    case 1: return "decision_tree";
    default: return "random_forest";
    }
}

inline std::string_view kind_name(const AnyModel& m) {
    switch (m.get().index()) {
    case 0: return "logistic_regression";
    case 1: return "decision_tree";
    default: return "random_forest";
    }
}

/// Accepts the full kind names plus the usual abbreviations lr/dt/rf.
inline ModelConfig default_config(std::string_view kind) {
    if (kind == "logistic_regression" || kind == "lr") return LogRegConfig{};
    if (kind == "decision_tree" || kind == "dt") return TreeConfig{};
    if (kind == "random_forest" || kind == "rf") return ForestConfig{};
    throw ConfigError("unknown model kind '" + std::string(kind) + "'");
}

inline void set_seed(ModelConfig& c, std::uint64_t seed) {
    std::visit([&](auto& cfg) { cfg.seed = seed; }, c);
}

namespace detail {

inline std::size_t as_count(std::string_view name, double v) {
    if (!(v >= 0.0) || v != std::floor(v)) {
        throw ConfigError("parameter '" + std::string(name) + "' must be a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

inline void set_tree_param(TreeConfig& c, std::string_view name, double v) {
    if (name == "max_depth") c.max_depth = as_count(name, v);
    else if (name == "min_samples_split") c.min_samples_split = as_count(name, v);
    else if (name == "min_samples_leaf") c.min_samples_leaf = as_count(name, v);
    else throw ConfigError("unknown decision tree parameter '" + std::string(name) + "'");
}

} // namespace detail

/// Numeric hyperparameter assignment by name, shared by config parsing and
/// hyperparameter search. For forests, max_features = 0 means sqrt.
inline void set_param(ModelConfig& config, std::string_view name, double v) {
    if (auto* lr = std::get_if<LogRegConfig>(&config)) {
        if (name == "learning_rate") lr->learning_rate = v;
        else if (name == "epochs") lr->epochs = detail::as_count(name, v);
        else if (name == "l2") lr->l2 = v;
        else throw ConfigError("unknown logistic regression parameter '" + std::string(name) + "'");
    } else if (auto* dt = std::get_if<TreeConfig>(&config)) {
        if (name == "max_features") {
            const auto m = detail::as_count(name, v);
            dt->max_features = m == 0 ? std::nullopt : std::optional<std::size_t>(m);
        } else {
            detail::set_tree_param(*dt, name, v);
        }
    } else {
        auto& rf = std::get<ForestConfig>(config);
        if (name == "n_estimators") rf.n_estimators = detail::as_count(name, v);
        else if (name == "bootstrap") rf.bootstrap = v != 0.0;
        else if (name == "max_features") {
            const auto m = detail::as_count(name, v);
            rf.max_features = m == 0 ? MaxFeatures{} : MaxFeatures{MaxFeatures::Kind::Count, m};
        } else detail::set_tree_param(rf.tree, name, v);
    }
}

inline AnyModel train_model(const ModelConfig& config, const Dataset& train) {
    return std::visit(
        [&](const auto& cfg) -> AnyModel {
            using C = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<C, LogRegConfig>) return train_logreg(train, cfg);
            else if constexpr (std::is_same_v<C, TreeConfig>) return train_tree(train, cfg);
            else return train_forest(train, cfg);
        },
        config);
}

} // namespace evalxai
