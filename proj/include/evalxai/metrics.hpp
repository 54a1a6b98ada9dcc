#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/explain.hpp"
#include "evalxai/models/model.hpp"
#include "evalxai/simulate.hpp"

namespace evalxai {

/// Model behaviour on one test instance and its two simulated variants.
struct InstanceOutcome {
    std::string instance_id;
    int true_label = 0;
    int predicted_class = 0;
    double original_risk = 0.0;
    // Absent when the explanation failed.
    std::optional<double> green_risk;
    std::optional<double> red_risk;
    bool explanation_failed = false;
    std::size_t clamp_events = 0;

    bool correct() const { return predicted_class == true_label; }
    int green_class() const { return class_of(green_risk.value_or(original_risk)); }
    int red_class() const { return class_of(red_risk.value_or(original_risk)); }

    // Risk of the variant expected to flip the prediction.
    std::optional<double> flip_risk() const { return predicted_class == 1 ? green_risk : red_risk; }

    bool operator==(const InstanceOutcome&) const = default;
};

/// Evaluates `model` on each test row and on its GreenWard and RedWard
/// simulated variants. explanations[i] belongs to test row i; failed
/// explanations produce flagged outcomes without variant risks.
template <ProbabilityModel M>
std::vector<InstanceOutcome> build_outcomes(const M& model, const Dataset& test,
                                            std::span<const Explanation> explanations, const FeatureStats& stats,
                                            const SimulationConfig& config) {
    if (explanations.size() != test.rows()) {
        throw DataError("build_outcomes needs one explanation per test instance");
    }
    std::vector<InstanceOutcome> out;
    out.reserve(test.rows());
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto& e = explanations[i];
        InstanceOutcome o;
        o.instance_id = e.instance_id.empty() ? std::to_string(test.id(i)) : e.instance_id;
        o.true_label = test.label(i);
        o.original_risk = model.risk(test.row(i));
        o.predicted_class = class_of(o.original_risk);
        if (e.failed()) {
            o.explanation_failed = true;
        } else {
            // Rule orientations are read relative to the class the explanation claims.
            const auto green = simulate(test.row(i), e, test.features(), stats, Direction::GreenWard, config);
            const auto red = simulate(test.row(i), e, test.features(), stats, Direction::RedWard, config);
            o.green_risk = model.risk(green.values);
            o.red_risk = model.risk(red.values);
            o.clamp_events = green.clamp_events + red.clamp_events;
        }
        out.push_back(std::move(o));
    }
    return out;
}

enum class Partition { All, Correct, Wrong };

inline constexpr Partition kPartitions[] = {Partition::All, Partition::Correct, Partition::Wrong};

inline std::string_view partition_name(Partition p) {
    switch (p) {
    case Partition::All: return "all";
    case Partition::Correct: return "correct";
    default: return "wrong";
    }
}

inline bool in_partition(const InstanceOutcome& o, Partition p) {
    return p == Partition::All || (p == Partition::Correct) == o.correct();
}

/// Whether X_p / X_c are formed from the predicted class or the true label.
enum class ClassBasis { Predicted, TrueLabel };

/// hits / denominator, as a percentage; absent when the denominator is zero.
struct Fraction {
    std::size_t hits = 0;
    std::size_t denominator = 0;

    std::optional<double> percent() const {
        if (denominator == 0) return std::nullopt;
        return 100.0 * static_cast<double>(hits) / static_cast<double>(denominator);
    }
    bool operator==(const Fraction&) const = default;
};

/// Share of non-failed outcomes in the partition whose flip variant changes
/// the predicted class. Correctness partitions compare prediction to label.
inline Fraction reversed_fraction(std::span<const InstanceOutcome> outcomes, Partition partition) {
    Fraction f;
    for (const auto& o : outcomes) {
        if (o.explanation_failed || !in_partition(o, partition)) continue;
        ++f.denominator;
        f.hits += class_of(*o.flip_risk()) != o.predicted_class;
    }
    return f;
}

inline std::optional<double> percent_reversed(std::span<const InstanceOutcome> outcomes, Partition partition) {
    return reversed_fraction(outcomes, partition).percent();
}

struct SeriesSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Quartile summary with linear-interpolation percentiles.
inline std::optional<SeriesSummary> summarize(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    SeriesSummary s;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    s.min = v.front();
    s.max = v.back();
    s.q1 = percentile_sorted(v, 0.25);
    s.median = percentile_sorted(v, 0.5);
    s.q3 = percentile_sorted(v, 0.75);
    return s;
}

using KeyedSeries = std::vector<std::pair<std::string, double>>;

struct ProbDiff {
    KeyedSeries values;       // per non-failed instance, in outcome order
    std::size_t negative_count = 0; // reliability violations
    std::optional<SeriesSummary> summary;
};

/// Signed probability change oriented so the ideal value is positive:
/// original - flip for predicted positives, flip - original for negatives.
inline double signed_prob_diff(const InstanceOutcome& o) {
    const double flip = *o.flip_risk();
    return o.predicted_class == 1 ? o.original_risk - flip : flip - o.original_risk;
}

inline ProbDiff prob_diff(std::span<const InstanceOutcome> outcomes, Partition partition = Partition::All) {
    ProbDiff pd;
    std::vector<double> raw;
    for (const auto& o : outcomes) {
        if (o.explanation_failed || !in_partition(o, partition)) continue;
        const double v = signed_prob_diff(o);
        pd.values.emplace_back(o.instance_id, v);
        raw.push_back(v);
        pd.negative_count += v < 0.0;
    }
    pd.summary = summarize(std::move(raw));
    return pd;
}

enum class GranularMetric { PCPD, PCPI, NCPD, NCPI };

inline constexpr GranularMetric kGranularMetrics[] = {GranularMetric::PCPD, GranularMetric::PCPI,
                                                      GranularMetric::NCPD, GranularMetric::NCPI};

inline std::string_view metric_name(GranularMetric m) {
    switch (m) {
    case GranularMetric::PCPD: return "PCPD";
    case GranularMetric::PCPI: return "PCPI";
    case GranularMetric::NCPD: return "NCPD";
    default: return "NCPI";
    }
}

/// Strict-inequality check for one outcome; ties are failures.
inline bool granular_hit(const InstanceOutcome& o, GranularMetric m) {
    const bool decrease = m == GranularMetric::PCPD || m == GranularMetric::NCPD;
    return decrease ? *o.green_risk < o.original_risk : *o.red_risk > o.original_risk;
}

inline Fraction granular_fraction(std::span<const InstanceOutcome> outcomes, GranularMetric m, Partition partition,
                                  ClassBasis basis = ClassBasis::Predicted) {
    const int cls = (m == GranularMetric::PCPD || m == GranularMetric::PCPI) ? 1 : 0;
    Fraction f;
    for (const auto& o : outcomes) {
        if (o.explanation_failed || !in_partition(o, partition)) continue;
        const int c = basis == ClassBasis::Predicted ? o.predicted_class : o.true_label;
        if (c != cls) continue;
        ++f.denominator;
        f.hits += granular_hit(o, m);
    }
    return f;
}

struct GranularMetrics {
    // [metric][partition], indexed like kGranularMetrics and kPartitions
    Fraction values[4][3];

    const Fraction& at(GranularMetric m, Partition p) const {
        return values[static_cast<int>(m)][static_cast<int>(p)];
    }
};

inline GranularMetrics granular(std::span<const InstanceOutcome> outcomes, ClassBasis basis = ClassBasis::Predicted) {
    GranularMetrics g;
    for (auto m : kGranularMetrics) {
        for (auto p : kPartitions) {
            g.values[static_cast<int>(m)][static_cast<int>(p)] = granular_fraction(outcomes, m, p, basis);
        }
    }
    return g;
}

/// All six metrics for one (model, alpha, run).
struct MetricReport {
    std::string model;
    double alpha = 1.0;
    std::size_t run = 0;
    std::size_t outcomes = 0;
    std::size_t failures = 0;
    std::size_t clamp_events = 0;
    Fraction reversed[3]; // indexed like kPartitions
    ProbDiff prob_diff_all;
    std::optional<SeriesSummary> prob_diff_summary[3];
    std::size_t prob_diff_negative[3] = {0, 0, 0};
    GranularMetrics granular;
};

inline MetricReport metric_report(std::span<const InstanceOutcome> outcomes, std::string model, double alpha,
                                  std::size_t run, ClassBasis basis = ClassBasis::Predicted) {
    MetricReport r;
    r.model = std::move(model);
    r.alpha = alpha;
    r.run = run;
    r.outcomes = outcomes.size();
    for (const auto& o : outcomes) {
        r.failures += o.explanation_failed;
        r.clamp_events += o.clamp_events;
    }
    for (auto p : kPartitions) {
        const int i = static_cast<int>(p);
        r.reversed[i] = reversed_fraction(outcomes, p);
        auto pd = prob_diff(outcomes, p);
        r.prob_diff_summary[i] = pd.summary;
        r.prob_diff_negative[i] = pd.negative_count;
        if (p == Partition::All) r.prob_diff_all = std::move(pd);
    }
    r.granular = granular(outcomes, basis);
    return r;
}

} // namespace evalxai
