#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/random.hpp"
#include "evalxai/models/logreg.hpp"
#include "evalxai/models/model.hpp"

namespace evalxai {

enum class Orientation { LessThan, MoreThan };

inline Orientation opposite(Orientation o) {
    return o == Orientation::LessThan ? Orientation::MoreThan : Orientation::LessThan;
}

inline std::string_view orientation_token(Orientation o) { return o == Orientation::LessThan ? "lt" : "gt"; }

/// One-sided threshold condition: feature < threshold or feature > threshold.
struct Rule {
    std::string feature;
    Orientation orientation = Orientation::LessThan;
    double threshold = 0.0;

    bool operator==(const Rule&) const = default;
};

/// A rule-based local explanation. An empty rule list means the explainer
/// failed to produce an explanation for this instance.
struct Explanation {
    std::string instance_id;
    int predicted_class = 0; // 1 = positive
    double risk_score = 0.0;
    std::vector<Rule> rules;
    std::string explainer_id;
    std::uint64_t run_seed = 0;

    bool failed() const { return rules.empty(); }
    bool operator==(const Explanation&) const = default;
};

inline void check_unique_features(const Explanation& e) {
    std::unordered_set<std::string_view> seen;
    for (const auto& r : e.rules) {
        if (!seen.insert(r.feature).second) {
            throw DataError("explanation for instance '" + e.instance_id + "' has two rules on feature '" +
                            r.feature + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in explainers

struct SurrogateConfig {
    std::size_t num_samples = 1000;
    std::size_t top_k = 5;
    // Defaults to 0.75 * sqrt(feature count) when absent.
    std::optional<double> kernel_width;
    double ridge_l2 = 1.0;
    std::size_t quantile_bins = 4;

    void validate() const {
        if (top_k == 0) throw ConfigError("surrogate top_k must be >= 1");
        if (num_samples < 10 * top_k) throw ConfigError("surrogate num_samples must be >= 10 * top_k");
        if (quantile_bins < 2) throw ConfigError("surrogate quantile_bins must be >= 2");
        if (kernel_width && !(*kernel_width > 0.0)) throw ConfigError("surrogate kernel_width must be positive");
        if (ridge_l2 < 0.0) throw ConfigError("surrogate ridge_l2 must be nonnegative");
    }
};

inline constexpr double kCoefficientTolerance = 1e-6;

/// Percentile with linear interpolation between closest ranks; `sorted`
/// must be ascending and nonempty.
inline double percentile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

struct FeatureBins {
    std::vector<double> edges; // ascending, edges.front() = min, edges.back() = max
    bool degenerate = false;

    std::size_t bins() const { return edges.size() - 1; }

    std::size_t bin_of(double x) const {
        for (std::size_t b = 0; b + 1 < bins(); ++b) {
            if (x <= edges[b + 1]) return b;
        }
        return bins() - 1;
    }
};

inline FeatureBins quantile_bins(std::vector<double> column, std::size_t n_bins) {
    std::sort(column.begin(), column.end());
    FeatureBins fb;
    fb.edges.push_back(column.front());
    for (std::size_t j = 1; j < n_bins; ++j) {
        const double e = percentile_sorted(column, static_cast<double>(j) / static_cast<double>(n_bins));
        if (e > fb.edges.back()) fb.edges.push_back(e);
    }
    if (column.back() > fb.edges.back() || fb.edges.size() == 1) fb.edges.push_back(column.back());
    // fewer than two bins carries no contrast (constant or near-constant column)
    fb.degenerate = fb.edges.size() < 3;
    return fb;
}

} // namespace detail

/// LIME-style local surrogate producing one-sided rules.
///
/// Features are discretized into background quantile bins, perturbations are
/// drawn bin-by-bin, weighted by an exponential kernel on standardized
/// distance, and a weighted ridge regression of model risk on the indicators
/// "same bin as the instance" is fitted. The top_k coefficients above
/// kCoefficientTolerance become rules anchored at a boundary of the
/// instance's bin:
///   - edge bins use their single interior boundary;
///   - interior bins use the lower boundary for a positive coefficient and
///     the upper boundary for a negative one.
/// The orientation points into the instance's bin when bin membership
/// supports the predicted class (coefficient sign agrees with the class) and
/// out of it otherwise. No surviving coefficient yields an empty rule list.
template <ProbabilityModel M>
Explanation surrogate_explain(const M& model, std::span<const double> instance, const Dataset& background,
                              const SurrogateConfig& config, std::uint64_t seed,
                              std::string instance_id = {}) {
    config.validate();
    if (background.empty()) throw DataError("surrogate explainer needs a nonempty background set");
    const std::size_t d = background.cols();
    if (instance.size() != d) throw DataError("instance width does not match the background set");

    Explanation out;
    out.instance_id = std::move(instance_id);
    out.risk_score = model.risk(instance);
    out.predicted_class = class_of(out.risk_score);
    out.explainer_id = "surrogate";
    out.run_seed = seed;

    std::vector<detail::FeatureBins> bins(d);
    std::vector<double> scale(d, 1.0);
    std::vector<std::size_t> candidates;
    for (std::size_t f = 0; f < d; ++f) {
        auto col = background.column(f);
        bins[f] = detail::quantile_bins(col, config.quantile_bins);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        const double sd = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1)) : 0.0;
        if (sd > 0.0) scale[f] = sd;
        if (!bins[f].degenerate) candidates.push_back(f);
    }
    if (candidates.empty()) return out;

    std::vector<std::size_t> instance_bin(d);
    for (std::size_t f = 0; f < d; ++f) instance_bin[f] = bins[f].bin_of(instance[f]);

    const double width = config.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(d)));
    const std::size_t n = config.num_samples;
    const std::size_t p = candidates.size();

    Rng rng(seed);
    Eigen::MatrixXd z(n, p);
    Eigen::VectorXd y(n), w(n);
    std::vector<double> sample(d);
    for (std::size_t s = 0; s < n; ++s) {
        if (s == 0) {
            sample.assign(instance.begin(), instance.end());
        } else {
            for (std::size_t f = 0; f < d; ++f) {
                if (bins[f].degenerate) {
                    sample[f] = instance[f];
                    continue;
                }
                const std::size_t b = rng.below(bins[f].bins());
                sample[f] = rng.uniform(bins[f].edges[b], bins[f].edges[b + 1]);
            }
        }
        double dist2 = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
            const double dz = (sample[f] - instance[f]) / scale[f];
            dist2 += dz * dz;
        }
        w(static_cast<Eigen::Index>(s)) = std::exp(-dist2 / (width * width));
        y(static_cast<Eigen::Index>(s)) = model.risk(sample);
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t f = candidates[j];
            z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) =
                bins[f].bin_of(sample[f]) == instance_bin[f] ? 1.0 : 0.0;
        }
    }

    // Weighted ridge with an unpenalized intercept, solved on weighted-centred data.
    const double wsum = w.sum();
    const Eigen::RowVectorXd zmean = (w.transpose() * z) / wsum;
    const double ymean = w.dot(y) / wsum;
    const Eigen::MatrixXd zc = z.rowwise() - zmean;
    const Eigen::VectorXd yc = y.array() - ymean;
    Eigen::MatrixXd gram = zc.transpose() * w.asDiagonal() * zc;
    gram.diagonal().array() += config.ridge_l2;
    const Eigen::VectorXd rhs = zc.transpose() * w.asDiagonal() * yc;
    const Eigen::VectorXd coef = gram.ldlt().solve(rhs);

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return std::abs(coef(static_cast<Eigen::Index>(a))) > std::abs(coef(static_cast<Eigen::Index>(b)));
    });

    const int class_sign = out.predicted_class == 1 ? 1 : -1;
    for (std::size_t r = 0; r < std::min(config.top_k, p); ++r) {
        const double c = coef(static_cast<Eigen::Index>(order[r]));
        if (!(std::abs(c) > kCoefficientTolerance)) break;
        const std::size_t f = candidates[order[r]];
        const auto& fb = bins[f];
        const std::size_t b = instance_bin[f];
        const bool supports = (c > 0.0 ? 1 : -1) == class_sign;

        double threshold;
        Orientation inward;
        if (b == 0) {
            threshold = fb.edges[1];
            inward = Orientation::LessThan;
        } else if (b == fb.bins() - 1) {
            threshold = fb.edges[b];
            inward = Orientation::MoreThan;
        } else if (c > 0.0) {
            threshold = fb.edges[b];
            inward = Orientation::MoreThan;
        } else {
            threshold = fb.edges[b + 1];
            inward = Orientation::LessThan;
        }
        out.rules.push_back({background.features()[f].name, supports ? inward : opposite(inward), threshold});
    }
    return out;
}

/// Exact explainer for logistic regression: the top_k features by |weight|
/// with thresholds at the instance's own values, oriented so that each rule
/// supports the predicted class. Zero weights never produce rules.
inline Explanation linear_oracle_explain(const LogisticRegressionModel& model, std::span<const double> instance,
                                         std::span<const FeatureSpec> features, std::size_t top_k,
                                         std::string instance_id = {}) {
    if (top_k == 0) throw ConfigError("oracle explainer needs top_k >= 1");
    const auto& w = model.weights();
    if (w.size() != features.size() || instance.size() != features.size()) {
        throw DataError("oracle explainer: model and instance widths differ");
    }
    std::vector<std::size_t> order;
    for (std::size_t f = 0; f < w.size(); ++f) {
        if (w[f] != 0.0) order.push_back(f);
    }
    if (order.empty()) throw DataError("oracle explainer: all model weights are zero");
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(w[a]) > std::abs(w[b]); });

    Explanation out;
    out.instance_id = std::move(instance_id);
    out.risk_score = model.risk(instance);
    out.predicted_class = class_of(out.risk_score);
    out.explainer_id = "linear_oracle";
    const bool negative = out.predicted_class == 0;
    for (std::size_t r = 0; r < std::min(top_k, order.size()); ++r) {
        const std::size_t f = order[r];
        const bool more = (w[f] > 0.0) != negative;
        out.rules.push_back({features[f].name, more ? Orientation::MoreThan : Orientation::LessThan, instance[f]});
    }
    return out;
}

/// Converts an interval rule lower < x < upper into one one-sided rule: the
/// bound nearer the instance value (lower on ties), oriented into the interval.
inline Rule normalize_two_sided(std::optional<double> lower, std::optional<double> upper, std::string feature,
                                double instance_value) {
    if (!lower && !upper) throw DataError("interval rule on '" + feature + "' has no bounds");
    if (lower && upper && !(*lower < *upper)) {
        throw DataError("interval rule on '" + feature + "' needs lower < upper");
    }
    bool use_lower = lower.has_value();
    if (lower && upper) {
        use_lower = std::abs(instance_value - *lower) <= std::abs(*upper - instance_value);
    }
    if (use_lower) return {std::move(feature), Orientation::MoreThan, *lower};
    return {std::move(feature), Orientation::LessThan, *upper};
}

// ---------------------------------------------------------------------------
// Exchange format

inline constexpr int kExplanationFormatVersion = 1;

inline nlohmann::ordered_json explanations_to_json(std::span<const Explanation> list) {
    nlohmann::ordered_json doc;
    doc["version"] = kExplanationFormatVersion;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : list) {
        nlohmann::ordered_json j;
        j["instance_id"] = e.instance_id;
        j["predicted_class"] = e.predicted_class == 1 ? "positive" : "negative";
        j["risk_score"] = e.risk_score;
        j["explainer_id"] = e.explainer_id;
        j["run_seed"] = e.run_seed;
        auto rules = nlohmann::ordered_json::array();
        for (const auto& r : e.rules) {
            rules.push_back({{"feature", r.feature},
                             {"op", std::string(orientation_token(r.orientation))},
                             {"threshold", r.threshold}});
        }
        j["rules"] = std::move(rules);
        arr.push_back(std::move(j));
    }
    doc["explanations"] = std::move(arr);
    return doc;
}

inline std::string export_explanations(std::span<const Explanation> list) {
    return explanations_to_json(list).dump(2) + "\n";
}

/// Parses and validates an exchange document against the dataset schema.
inline std::vector<Explanation> import_explanations(std::string_view document, std::span<const FeatureSpec> schema) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("explanation document is not valid JSON: ") + e.what());
    }
    std::unordered_set<std::string_view> known;
    for (const auto& f : schema) known.insert(f.name);

    std::vector<Explanation> out;
    try {
        if (doc.at("version").get<int>() != kExplanationFormatVersion) {
            throw DataError("explanation document: unsupported version");
        }
        for (const auto& j : doc.at("explanations")) {
            Explanation e;
            e.instance_id = j.at("instance_id").get<std::string>();
            const auto cls = j.at("predicted_class").get<std::string>();
            if (cls == "positive") e.predicted_class = 1;
            else if (cls == "negative") e.predicted_class = 0;
            else throw DataError("explanation document: predicted_class must be positive or negative, got '" + cls + "'");
            e.risk_score = j.at("risk_score").get<double>();
            if (!(e.risk_score >= 0.0 && e.risk_score <= 1.0)) {
                throw DataError("explanation document: risk_score outside [0, 1] for instance '" + e.instance_id + "'");
            }
            e.explainer_id = j.at("explainer_id").get<std::string>();
            e.run_seed = j.at("run_seed").get<std::uint64_t>();
            for (const auto& r : j.at("rules")) {
                Rule rule;
                rule.feature = r.at("feature").get<std::string>();
                if (!known.contains(rule.feature)) {
                    throw DataError("explanation document: unknown feature '" + rule.feature + "'");
                }
                const auto op = r.at("op").get<std::string>();
                if (op == "lt") rule.orientation = Orientation::LessThan;
                else if (op == "gt") rule.orientation = Orientation::MoreThan;
                else throw DataError("explanation document: rule op must be lt or gt, got '" + op + "'");
                rule.threshold = r.at("threshold").get<double>();
                if (!std::isfinite(rule.threshold)) throw DataError("explanation document: non-finite threshold");
                e.rules.push_back(std::move(rule));
            }
            check_unique_features(e);
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("explanation document: ") + e.what());
    }
    return out;
}

} // namespace evalxai
