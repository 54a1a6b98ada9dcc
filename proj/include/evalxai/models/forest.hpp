#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/random.hpp"
#include "evalxai/models/model.hpp"
#include "evalxai/models/tree.hpp"

namespace evalxai {

struct MaxFeatures {
    enum class Kind { Sqrt, All, Count };
    Kind kind = Kind::Sqrt;
    std::size_t count = 0;

    std::size_t resolve(std::size_t n_features) const {
        switch (kind) {
        case Kind::Sqrt:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))));
        case Kind::All:
            return n_features;
        case Kind::Count:
            return std::clamp<std::size_t>(count, 1, n_features);
        }
        return n_features;
    }
    bool operator==(const MaxFeatures&) const = default;
};

struct ForestConfig {
    std::size_t n_estimators = 100;
    MaxFeatures max_features;
    bool bootstrap = true;
    TreeConfig tree{.max_depth = 10, .min_samples_split = 10, .min_samples_leaf = 2};
    std::uint64_t seed = 0;
};

class RandomForestModel {
public:
    RandomForestModel() = default;
    RandomForestModel(std::vector<DecisionTreeModel> trees, ForestConfig config)
        : trees_(std::move(trees)), config_(config) {}

    double risk(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& t : trees_) s += t.risk(x);
        return s / static_cast<double>(trees_.size());
    }

    const std::vector<DecisionTreeModel>& trees() const { return trees_; }
    const ForestConfig& config() const { return config_; }

private:
    std::vector<DecisionTreeModel> trees_;
    ForestConfig config_;
};

/// Bagged CART trees with per-split feature subsampling. Tree t uses seed
/// derive_seed(config.seed, t, 0) both for its bootstrap draw and for its
/// feature subsampling.
inline RandomForestModel train_forest(const Dataset& train, const ForestConfig& config = {}) {
    if (config.n_estimators == 0) throw ConfigError("random forest needs n_estimators >= 1");
    if (train.empty()) throw DataError("random forest needs a nonempty training set");

    const std::size_t n = train.rows();
    std::vector<DecisionTreeModel> trees;
    trees.reserve(config.n_estimators);
    for (std::size_t t = 0; t < config.n_estimators; ++t) {
        const std::uint64_t tree_seed = derive_seed(config.seed, t, 0);
        TreeConfig tc = config.tree;
        tc.max_features = config.max_features.resolve(train.cols());
        tc.seed = splitmix64(tree_seed);

        std::vector<std::size_t> rows(n);
        if (config.bootstrap) {
            Rng rng(tree_seed);
            for (auto& r : rows) r = rng.below(n);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees.push_back(train_tree_on_rows(train, std::move(rows), tc));
    }
    return RandomForestModel(std::move(trees), config);
}

} // namespace evalxai
