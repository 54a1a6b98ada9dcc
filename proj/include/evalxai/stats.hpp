#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/metrics.hpp"

namespace evalxai {

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

inline constexpr std::size_t kWilcoxonExactLimit = 20;

struct WilcoxonResult {
    enum class Method { Exact, NormalApproximation };

    double w_statistic = 0.0; // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    std::size_t n_effective = 0; // nonzero differences
    double p_value = 1.0;        // two-sided
    Method method = Method::Exact;
    bool all_zero = false;
};

inline std::string_view method_name(WilcoxonResult::Method m) {
    return m == WilcoxonResult::Method::Exact ? "exact" : "normal";
}

namespace detail {

struct SignedRanks {
    std::vector<double> ranks; // average ranks of |d|, zeros dropped
    std::vector<char> positive;
    double w_plus = 0.0;
    double w_minus = 0.0;
    double tie_term = 0.0; // sum over tie groups of t^3 - t
};

inline SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("Wilcoxon test needs series of equal length");
    std::vector<double> mag;
    SignedRanks sr;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        mag.push_back(std::abs(d));
        sr.positive.push_back(d > 0.0);
    }
    sr.ranks = average_ranks(mag);
    for (std::size_t i = 0; i < mag.size(); ++i) (sr.positive[i] ? sr.w_plus : sr.w_minus) += sr.ranks[i];

    std::vector<double> sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        sr.tie_term += t * t * t - t;
        i = j;
    }
    return sr;
}

} // namespace detail

/// P(T+ <= w) * 2 under the null, where T+ is the signed-rank sum. Average
/// ranks are half-integers, so the null distribution is built exactly over
/// doubled ranks with a subset-sum count.
inline double wilcoxon_exact_p(std::span<const double> ranks, double w) {
    std::vector<std::size_t> doubled;
    std::size_t total = 0;
    for (double r : ranks) {
        doubled.push_back(static_cast<std::size_t>(std::llround(2.0 * r)));
        total += doubled.back();
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : doubled) {
        for (std::size_t s = reach + 1; s-- > 0;) {
            if (count[s] != 0.0) count[s + r] += count[s];
        }
        reach += r;
    }
    const auto limit = static_cast<std::size_t>(std::llround(2.0 * w));
    double tail = 0.0;
    for (std::size_t s = 0; s <= std::min(limit, total); ++s) tail += count[s];
    const double p = 2.0 * tail / std::ldexp(1.0, static_cast<int>(ranks.size()));
    return std::min(1.0, p);
}

/// Normal approximation with continuity and tie corrections.
inline double wilcoxon_normal_p(std::size_t n, double w, double tie_term) {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) return 1.0;
    const double z = (w - mean + 0.5) / std::sqrt(var);
    const double p = std::erfc(-z / std::numbers::sqrt2); // 2 * Phi(z)
    return std::min(1.0, p);
}

/// Two-sided paired Wilcoxon signed-rank test on a - b. Zero differences are
/// dropped; exact when at most kWilcoxonExactLimit remain, otherwise normal.
/// All-zero input reports p = 1.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    const auto sr = detail::signed_ranks(a, b);
    WilcoxonResult r;
    r.n_effective = sr.ranks.size();
    r.w_plus = sr.w_plus;
    r.w_minus = sr.w_minus;
    r.w_statistic = std::min(sr.w_plus, sr.w_minus);
    if (r.n_effective == 0) {
        r.all_zero = true;
        r.p_value = 1.0;
        r.method = WilcoxonResult::Method::Exact;
        return r;
    }
    if (r.n_effective <= kWilcoxonExactLimit) {
        r.method = WilcoxonResult::Method::Exact;
        r.p_value = wilcoxon_exact_p(sr.ranks, r.w_statistic);
    } else {
        r.method = WilcoxonResult::Method::NormalApproximation;
        r.p_value = wilcoxon_normal_p(r.n_effective, r.w_statistic, sr.tie_term);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Cliff's delta

enum class Magnitude { Negligible, Small, Medium, Large };

inline std::string_view magnitude_name(Magnitude m) {
    switch (m) {
    case Magnitude::Negligible: return "negligible";
    case Magnitude::Small: return "small";
    case Magnitude::Medium: return "medium";
    default: return "large";
    }
}

inline Magnitude magnitude_of(double delta) {
    const double d = std::abs(delta);
    if (d < 0.147) return Magnitude::Negligible;
    if (d < 0.33) return Magnitude::Small;
    if (d < 0.474) return Magnitude::Medium;
    return Magnitude::Large;
}

struct EffectSize {
    double delta = 0.0;
    Magnitude magnitude = Magnitude::Negligible;
};

/// delta = (#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|), counted by binary search
/// over the sorted b.
inline EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DataError("Cliff's delta needs two nonempty series");
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sb.begin(), sb.end());
    long long greater = 0, less = 0;
    for (double x : a) {
        less += sb.end() - std::upper_bound(sb.begin(), sb.end(), x);
        greater += std::lower_bound(sb.begin(), sb.end(), x) - sb.begin();
    }
    EffectSize e;
    e.delta = static_cast<double>(greater - less) /
              (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    e.magnitude = magnitude_of(e.delta);
    return e;
}

// ---------------------------------------------------------------------------
// Consistency across repeated explainer runs

/// One run's %Prob_diff series per alpha, keyed by instance id.
struct RunSeries {
    std::string label;
    std::vector<std::pair<double, KeyedSeries>> by_alpha;
};

struct PairVerdict {
    std::string group; // e.g. model name, or model/dataset
    double alpha = 0.0;
    std::string run_a;
    std::string run_b;
    WilcoxonResult wilcoxon;
    EffectSize effect;
    bool inconsistent = false;
};

struct ConsistencyReport {
    double significance = 0.05;
    std::vector<PairVerdict> rows;
    std::size_t inconsistent = 0;

    std::size_t total() const { return rows.size(); }
    double percentage() const {
        return rows.empty() ? 0.0 : 100.0 * static_cast<double>(inconsistent) / static_cast<double>(rows.size());
    }

    void append(const ConsistencyReport& other) {
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
        inconsistent += other.inconsistent;
    }
};

namespace detail {

inline std::vector<std::pair<std::string, double>> sorted_by_id(const KeyedSeries& s) {
    std::vector<std::pair<std::string, double>> v(s.begin(), s.end());
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i].first == v[i - 1].first) throw DataError("duplicate instance id '" + v[i].first + "' in series");
    }
    return v;
}

} // namespace detail

/// Every unordered pair of runs is compared at every alpha with a paired
/// Wilcoxon test (instances matched by id) and Cliff's |delta|. A comparison
/// is inconsistent when p < significance. Rows are ordered by alpha, then
/// pair (i, j) with i < j.
inline ConsistencyReport consistency(std::span<const RunSeries> runs, double significance,
                                     std::string_view group = {}) {
    if (runs.size() < 2) throw ConfigError("consistency needs at least two runs");
    if (!(significance > 0.0 && significance < 1.0)) throw ConfigError("significance must be in (0, 1)");
    const auto& first = runs.front().by_alpha;
    for (const auto& r : runs) {
        if (r.by_alpha.size() != first.size()) throw DataError("runs disagree on the alpha list");
        for (std::size_t k = 0; k < first.size(); ++k) {
            if (r.by_alpha[k].first != first[k].first) throw DataError("runs disagree on the alpha list");
        }
    }

    ConsistencyReport report;
    report.significance = significance;
    for (std::size_t k = 0; k < first.size(); ++k) {
        std::vector<std::vector<std::pair<std::string, double>>> aligned;
        for (const auto& r : runs) aligned.push_back(detail::sorted_by_id(r.by_alpha[k].second));
        for (std::size_t i = 0; i < runs.size(); ++i) {
            for (std::size_t j = i + 1; j < runs.size(); ++j) {
                const auto& sa = aligned[i];
                const auto& sb = aligned[j];
                if (sa.size() != sb.size()) throw DataError("misaligned instance ids between runs");
                std::vector<double> va, vb;
                for (std::size_t t = 0; t < sa.size(); ++t) {
                    if (sa[t].first != sb[t].first) {
                        throw DataError("misaligned instance ids between runs ('" + sa[t].first + "' vs '" +
                                        sb[t].first + "')");
                    }
                    va.push_back(sa[t].second);
                    vb.push_back(sb[t].second);
                }
                PairVerdict v;
                v.group = std::string(group);
                v.alpha = first[k].first;
                v.run_a = runs[i].label;
                v.run_b = runs[j].label;
                v.wilcoxon = wilcoxon_signed_rank(va, vb);
                if (!va.empty()) {
                    v.effect = cliffs_delta(va, vb);
                    v.effect.delta = std::abs(v.effect.delta);
                }
                v.inconsistent = v.wilcoxon.p_value < significance;
                report.inconsistent += v.inconsistent;
                report.rows.push_back(std::move(v));
            }
        }
    }
    return report;
}

} // namespace evalxai
