#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/random.hpp"
#include "evalxai/models/model.hpp"

namespace evalxai {

struct TreeConfig {
    std::size_t max_depth = 15;
    std::size_t min_samples_split = 10;
    std::size_t min_samples_leaf = 15;
    // Features examined per split; nullopt examines all of them.
    std::optional<std::size_t> max_features;
    std::uint64_t seed = 0;
};

struct TreeNode {
    static constexpr int kLeaf = -1;

    int feature = kLeaf;
    double threshold = 0.0; // rows with x[feature] <= threshold go left
    std::size_t left = 0;
    std::size_t right = 0;
    double value = 0.0;     // positive-class fraction of the training rows here
    std::size_t samples = 0;

    bool is_leaf() const { return feature == kLeaf; }
    bool operator==(const TreeNode&) const = default;
};

class DecisionTreeModel {
public:
    DecisionTreeModel() = default;
    DecisionTreeModel(std::vector<TreeNode> nodes, TreeConfig config)
        : nodes_(std::move(nodes)), config_(config) {}

    double risk(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes_[i].value;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeConfig& config() const { return config_; }

    std::size_t depth() const { return depth_from(0); }

private:
    std::size_t depth_from(std::size_t i) const {
        if (nodes_[i].is_leaf()) return 0;
        return 1 + std::max(depth_from(nodes_[i].left), depth_from(nodes_[i].right));
    }

    std::vector<TreeNode> nodes_;
    TreeConfig config_;
};

namespace detail {

inline double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& ds, const TreeConfig& config)
        : ds_(ds), config_(config), rng_(config.seed) {}

    std::vector<TreeNode> build(std::vector<std::size_t> rows) {
        grow(rows, 0);
        return std::move(nodes_);
    }

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
        const std::size_t n = rows.size();
        std::size_t pos = 0;
        for (auto r : rows) pos += static_cast<std::size_t>(ds_.label(r));

        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        nodes_[id].samples = n;
        nodes_[id].value = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;

        const bool pure = pos == 0 || pos == n;
        if (pure || depth >= config_.max_depth || n < config_.min_samples_split ||
            n < 2 * config_.min_samples_leaf) {
            return id;
        }
        auto split = best_split(rows, pos);
        if (!split) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (ds_.at(r, split->feature) <= split->threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const std::size_t l = grow(left, depth + 1);
        const std::size_t r = grow(right, depth + 1);
        nodes_[id].feature = static_cast<int>(split->feature);
        nodes_[id].threshold = split->threshold;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> all(ds_.cols());
        std::iota(all.begin(), all.end(), std::size_t{0});
        if (!config_.max_features || *config_.max_features >= all.size()) return all;
        const std::size_t m = std::max<std::size_t>(1, *config_.max_features);
        // partial Fisher-Yates
        for (std::size_t i = 0; i < m; ++i) std::swap(all[i], all[i + rng_.below(all.size() - i)]);
        all.resize(m);
        std::sort(all.begin(), all.end());
        return all;
    }

    std::optional<Split> best_split(const std::vector<std::size_t>& rows, std::size_t pos) {
        const std::size_t n = rows.size();
        const double parent = gini(pos, n);
        std::optional<Split> best;
        double best_impurity = parent;

        std::vector<std::pair<double, int>> sorted(n);
        for (std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < n; ++i) sorted[i] = {ds_.at(rows[i], f), ds_.label(rows[i])};
            std::sort(sorted.begin(), sorted.end());
            std::size_t left_pos = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_pos += static_cast<std::size_t>(sorted[i].second);
                if (sorted[i].first == sorted[i + 1].first) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < config_.min_samples_leaf || nr < config_.min_samples_leaf) continue;
                const double imp = (static_cast<double>(nl) * gini(left_pos, nl) +
                                    static_cast<double>(nr) * gini(pos - left_pos, nr)) /
                                   static_cast<double>(n);
                if (imp < best_impurity - 1e-12) {
                    const double lo = sorted[i].first;
                    const double hi = sorted[i + 1].first;
                    double mid = lo + (hi - lo) / 2.0;
                    if (!(mid < hi)) mid = lo;
                    best_impurity = imp;
                    best = Split{f, mid, imp};
                }
            }
        }
        return best;
    }

    const Dataset& ds_;
    TreeConfig config_;
    Rng rng_;
    std::vector<TreeNode> nodes_;
};

} // namespace detail

/// CART with weighted Gini impurity and midpoint thresholds between sorted
/// distinct values. A node becomes a leaf when it is pure, at max_depth,
/// below min_samples_split, or when no split keeps min_samples_leaf rows on
/// both sides while lowering impurity. Ties keep the first candidate found.
inline DecisionTreeModel train_tree(const Dataset& train, const TreeConfig& config = {}) {
    if (train.empty()) throw DataError("decision tree needs a nonempty training set");
    std::vector<std::size_t> rows(train.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    detail::TreeBuilder builder(train, config);
    return DecisionTreeModel(builder.build(std::move(rows)), config);
}

inline DecisionTreeModel train_tree_on_rows(const Dataset& train, std::vector<std::size_t> rows,
                                            const TreeConfig& config) {
    if (rows.empty()) throw DataError("decision tree needs a nonempty training set");
    detail::TreeBuilder builder(train, config);
    return DecisionTreeModel(builder.build(std::move(rows)), config);
}

} // namespace evalxai
