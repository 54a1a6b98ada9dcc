#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/format.hpp"
#include "evalxai/random.hpp"
#include "evalxai/models/any_model.hpp"
#include "evalxai/models/model.hpp"

namespace evalxai {

/// Mann-Whitney AUC with average ranks for tied risks.
inline std::optional<double> auc_from_risks(std::span<const double> risks, std::span<const int> labels) {
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y);
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const auto ranks = average_ranks(risks);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) rank_sum += ranks[i];
    }
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline ModelScore score_risks(std::span<const double> risks, std::span<const int> labels) {
    if (risks.empty()) throw DataError("scoring needs a nonempty test set");
    std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        const int p = class_of(risks[i]);
        correct += p == labels[i];
        tp += p == 1 && labels[i] == 1;
        fp += p == 1 && labels[i] == 0;
        fn += p == 0 && labels[i] == 1;
    }
    ModelScore s;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(risks.size());
    const std::size_t denom = 2 * tp + fp + fn;
    s.f1 = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    s.auc = auc_from_risks(risks, labels);
    return s;
}

template <ProbabilityModel M>
std::vector<double> predict_risks(const M& model, const Dataset& ds) {
    std::vector<double> r(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) r[i] = model.risk(ds.row(i));
    return r;
}

template <ProbabilityModel M>
ModelScore score_model(const M& model, const Dataset& test) {
    return score_risks(predict_risks(model, test), test.labels());
}

/// Stratified fold assignment: each class is shuffled and the concatenation
/// dealt round-robin, so fold sizes differ by at most one overall and per class.
inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                              std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2");
    if (k > labels.size()) throw ConfigError("cross-validation needs k <= row count");
    Rng rng(seed);
    std::vector<std::size_t> order;
    for (int c = 1; c >= 0; --c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) members.push_back(i);
        }
        rng.shuffle(members);
        order.insert(order.end(), members.begin(), members.end());
    }
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

/// Mean per-fold score. AUC is averaged over the folds where it is defined.
template <class Trainer>
    requires std::invocable<Trainer&, const Dataset&>
ModelScore k_fold_cv(Trainer&& train, const Dataset& ds, std::size_t k, std::uint64_t seed) {
    const auto folds = stratified_folds(ds.labels(), k, seed);
    ModelScore mean;
    double auc_sum = 0.0;
    std::size_t auc_count = 0;
    std::vector<char> in_fold(ds.rows());
    for (const auto& fold : folds) {
        std::fill(in_fold.begin(), in_fold.end(), 0);
        for (auto i : fold) in_fold[i] = 1;
        std::vector<std::size_t> train_idx;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            if (!in_fold[i]) train_idx.push_back(i);
        }
        const Dataset tr = ds.subset(train_idx);
        if (tr.count_label(0) == 0 || tr.count_label(1) == 0) {
            throw DataError("class absent from a cross-validation training fold");
        }
        const Dataset te = ds.subset(fold);
        const auto model = train(tr);
        const auto s = score_model(model, te);
        mean.accuracy += s.accuracy;
        mean.f1 += s.f1;
        if (s.auc) {
            auc_sum += *s.auc;
            ++auc_count;
        }
    }
    mean.accuracy /= static_cast<double>(k);
    mean.f1 /= static_cast<double>(k);
    if (auc_count) mean.auc = auc_sum / static_cast<double>(auc_count);
    return mean;
}

inline ModelScore k_fold_cv(const ModelConfig& config, const Dataset& ds, std::size_t k, std::uint64_t seed) {
    return k_fold_cv([&](const Dataset& tr) { return train_model(config, tr); }, ds, k, seed);
}

// ---------------------------------------------------------------------------
// Hyperparameter search

/// Either an explicit list of values (usable by grid and random search) or a
/// closed interval sampled uniformly by random search.
struct ParamDomain {
    std::vector<double> values;
    std::optional<std::pair<double, double>> range;
    bool integer = false;
};

using SearchSpace = std::vector<std::pair<std::string, ParamDomain>>;
using ParamSet = std::vector<std::pair<std::string, double>>;

enum class SearchStrategy { Grid, Random };

struct SearchTrial {
    ParamSet params;
    std::optional<ModelScore> score;
    std::string error;
};

struct SearchResult {
    SearchStrategy strategy = SearchStrategy::Grid;
    std::string kind;
    ModelConfig best;
    ParamSet best_params;
    ModelScore best_score;
    std::vector<SearchTrial> trials;

    // e.g. "Grid search (logistic_regression): AUC 0.6979, l2: 0.01, epochs: 500"
    std::string describe() const {
        std::ostringstream os;
        os << (strategy == SearchStrategy::Grid ? "Grid search" : "Random search") << " (" << kind
           << "): AUC ";
        if (best_score.auc) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", *best_score.auc);
            os << buf;
        } else {
            os << "n/a";
        }
        for (const auto& [name, v] : best_params) os << ", " << name << ": " << format_double(v);
        return os.str();
    }
};

namespace detail {

inline std::vector<ParamSet> grid_points(const SearchSpace& space) {
    std::vector<ParamSet> points{{}};
    for (const auto& [name, dom] : space) {
        if (dom.values.empty()) {
            throw ConfigError("grid search needs explicit values for parameter '" + name + "'");
        }
        std::vector<ParamSet> next;
        for (const auto& p : points) {
            for (double v : dom.values) {
                auto q = p;
                q.emplace_back(name, v);
                next.push_back(std::move(q));
            }
        }
        points = std::move(next);
    }
    return points;
}

inline std::vector<ParamSet> random_points(const SearchSpace& space, std::size_t budget, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ParamSet> points;
    for (std::size_t t = 0; t < budget; ++t) {
        ParamSet p;
        for (const auto& [name, dom] : space) {
            double v;
            if (dom.range) {
                const auto [lo, hi] = *dom.range;
                if (dom.integer) {
                    const auto a = static_cast<long long>(std::ceil(lo));
                    const auto b = static_cast<long long>(std::floor(hi));
                    if (b < a) throw ConfigError("empty integer range for parameter '" + name + "'");
                    v = static_cast<double>(a + static_cast<long long>(rng.below(static_cast<std::uint64_t>(b - a + 1))));
                } else {
                    v = rng.uniform(lo, hi);
                }
            } else if (!dom.values.empty()) {
                v = dom.values[rng.below(dom.values.size())];
            } else {
                throw ConfigError("parameter '" + name + "' has neither values nor range");
            }
            p.emplace_back(name, v);
        }
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace detail

/// Picks the configuration with the best cross-validated AUC. Ties keep the
/// earlier point; trials whose training throws are recorded and skipped.
inline SearchResult search_hyperparams(const ModelConfig& base, const SearchSpace& space,
                                       SearchStrategy strategy, std::size_t budget, const Dataset& ds,
                                       std::size_t cv_folds, std::uint64_t seed) {
    if (space.empty()) throw ConfigError("hyperparameter search needs a nonempty space");
    if (strategy == SearchStrategy::Random && budget == 0) {
        throw ConfigError("random search needs budget >= 1");
    }
    const auto points = strategy == SearchStrategy::Grid ? detail::grid_points(space)
                                                         : detail::random_points(space, budget, seed);
    SearchResult result;
    result.strategy = strategy;
    result.kind = std::string(kind_name(base));
    double best_auc = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& p : points) {
        SearchTrial trial{p, std::nullopt, {}};
        try {
            ModelConfig cfg = base;
            for (const auto& [name, v] : p) set_param(cfg, name, v);
            const auto s = k_fold_cv(cfg, ds, cv_folds, seed);
            trial.score = s;
            const double auc = s.auc.value_or(-std::numeric_limits<double>::infinity());
            if (!found || auc > best_auc) {
                found = true;
                best_auc = auc;
                result.best = cfg;
                result.best_params = p;
                result.best_score = s;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            trial.error = e.what();
        }
        result.trials.push_back(std::move(trial));
    }
    if (!found) throw Error("hyperparameter search: every trial failed to train");
    return result;
}

} // namespace evalxai
