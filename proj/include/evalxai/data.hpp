#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "evalxai/error.hpp"
#include "evalxai/format.hpp"
#include "evalxai/random.hpp"

namespace evalxai {

struct FeatureSpec {
    std::string name;
    // Negative values are physically invalid (e.g. lines of code).
    bool non_negative = false;

    bool operator==(const FeatureSpec&) const = default;
};

/// Row-major feature matrix with binary labels (1 = positive class).
///
/// Every row also carries a stable id: its index in the source file, or a
/// fresh id past the largest source index for rows synthesized by SMOTE.
/// Ids survive splitting and resampling so outcomes can be traced back to
/// the input.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::vector<FeatureSpec> features, std::vector<double> values,
            std::vector<int> labels, std::vector<std::size_t> ids = {})
        : features_(std::move(features)), values_(std::move(values)),
          labels_(std::move(labels)), ids_(std::move(ids)) {
        if (ids_.empty()) {
            ids_.resize(labels_.size());
            std::iota(ids_.begin(), ids_.end(), std::size_t{0});
        }
        validate();
    }

    std::size_t rows() const { return labels_.size(); }
    std::size_t cols() const { return features_.size(); }
    bool empty() const { return labels_.empty(); }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * cols(), cols()};
    }
    double at(std::size_t i, std::size_t f) const { return values_[i * cols() + f]; }
    int label(std::size_t i) const { return labels_[i]; }
    std::size_t id(std::size_t i) const { return ids_[i]; }

    const std::vector<FeatureSpec>& features() const { return features_; }
    std::vector<FeatureSpec>& features() { return features_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<std::size_t>& ids() const { return ids_; }

    std::optional<std::size_t> feature_index(std::string_view name) const {
        for (std::size_t f = 0; f < features_.size(); ++f) {
            if (features_[f].name == name) return f;
        }
        return std::nullopt;
    }

    std::vector<double> column(std::size_t f) const {
        std::vector<double> out(rows());
        for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, f);
        return out;
    }

    std::size_t count_label(int y) const {
        return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), y));
    }

    Dataset subset(std::span<const std::size_t> indices) const {
        std::vector<double> v;
        v.reserve(indices.size() * cols());
        std::vector<int> y;
        std::vector<std::size_t> ids;
        y.reserve(indices.size());
        ids.reserve(indices.size());
        for (std::size_t i : indices) {
            auto r = row(i);
            v.insert(v.end(), r.begin(), r.end());
            y.push_back(labels_[i]);
            ids.push_back(ids_[i]);
        }
        return Dataset(features_, std::move(v), std::move(y), std::move(ids));
    }

    Dataset select_features(std::span<const std::size_t> keep) const {
        std::vector<FeatureSpec> fs;
        for (std::size_t f : keep) fs.push_back(features_[f]);
        std::vector<double> v;
        v.reserve(rows() * keep.size());
        for (std::size_t i = 0; i < rows(); ++i) {
            for (std::size_t f : keep) v.push_back(at(i, f));
        }
        return Dataset(std::move(fs), std::move(v), labels_, ids_);
    }

    bool operator==(const Dataset&) const = default;

private:
    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& f : features_) {
            if (f.name.empty()) throw DataError("feature name must be nonempty");
            if (!seen.insert(f.name).second) throw DataError("duplicate feature name '" + f.name + "'");
        }
        if (values_.size() != labels_.size() * features_.size()) {
            throw DataError("feature matrix shape does not match row count");
        }
        if (ids_.size() != labels_.size()) throw DataError("row id count does not match row count");
        for (double v : values_) {
            if (!std::isfinite(v)) throw DataError("non-finite feature value");
        }
        for (int y : labels_) {
            if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
        }
    }

    std::vector<FeatureSpec> features_;
    std::vector<double> values_;
    std::vector<int> labels_;
    std::vector<std::size_t> ids_;
};

struct FeatureSummary {
    std::string name;
    double mean = 0.0;
    double std = 0.0; // sample (n-1) standard deviation
    double min = 0.0;
    double max = 0.0;
};

struct FeatureStats {
    std::vector<FeatureSummary> features;

    const FeatureSummary* find(std::string_view name) const {
        for (const auto& f : features) {
            if (f.name == name) return &f;
        }
        return nullptr;
    }
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Reads a comma-separated file with a header row. `label_column` is removed
/// from the features; its cells equal to `positive_label` become 1, all
/// others 0. Every other cell must be a plain decimal number.
inline Dataset load_csv(std::istream& in, std::string_view label_column,
                        std::string_view positive_label) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset: missing header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // BOM

    std::vector<std::string> header;
    for (auto cell : detail::split_commas(line)) header.emplace_back(detail::trim(cell));

    std::optional<std::size_t> label_at;
    std::vector<FeatureSpec> features;
    {
        std::unordered_set<std::string> seen;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (!seen.insert(header[c]).second) {
                throw DataError("duplicate header name '" + header[c] + "'");
            }
            if (header[c] == label_column) {
                label_at = c;
            } else {
                features.push_back({header[c], false});
            }
        }
    }
    if (!label_at) throw DataError("missing label column '" + std::string(label_column) + "'");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_commas(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto cell = detail::trim(cells[c]);
            if (c == *label_at) {
                labels.push_back(cell == positive_label ? 1 : 0);
                continue;
            }
            auto v = parse_double(cell);
            if (!v) {
                throw DataError("row " + std::to_string(line_no) + ", column '" + header[c] +
                                "': non-numeric cell '" + std::string(cell) + "'");
            }
            values.push_back(*v);
        }
    }
    if (labels.empty()) throw DataError("empty dataset: no data rows");
    return Dataset(std::move(features), std::move(values), std::move(labels));
}

inline Dataset load_csv_string(std::string_view text, std::string_view label_column,
                               std::string_view positive_label) {
    std::istringstream in{std::string(text)};
    return load_csv(in, label_column, positive_label);
}

/// Inverse of load_csv with labels written as 1/0.
inline void write_csv(std::ostream& out, const Dataset& ds, std::string_view label_column = "label") {
    for (const auto& f : ds.features()) out << f.name << ',';
    out << label_column << '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        for (double v : ds.row(i)) out << format_double(v) << ',';
        out << ds.label(i) << '\n';
    }
}

inline void mark_non_negative(Dataset& ds, std::span<const std::string> names) {
    for (const auto& n : names) {
        auto f = ds.feature_index(n);
        if (!f) throw ConfigError("unknown non-negative feature '" + n + "'");
        ds.features()[*f].non_negative = true;
    }
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Standard-normal features f1..fd with logistic labels
/// P(y=1) = sigmoid(w.x + b), each label flipped with probability `label_noise`.
inline Dataset generate_synthetic(std::size_t n_rows, std::span<const double> coefficients,
                                  double intercept, double label_noise, std::uint64_t seed) {
    if (coefficients.empty()) throw ConfigError("synthetic data needs at least one coefficient");
    if (n_rows == 0) throw ConfigError("synthetic data needs n_rows > 0");
    if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("label_noise must be in [0, 0.5)");

    const std::size_t d = coefficients.size();
    std::vector<FeatureSpec> features;
    for (std::size_t f = 0; f < d; ++f) features.push_back({"f" + std::to_string(f + 1), false});

    Rng rng(seed);
    std::vector<double> values(n_rows * d);
    std::vector<int> labels(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        double z = intercept;
        for (std::size_t f = 0; f < d; ++f) {
            const double x = rng.normal();
            values[i * d + f] = x;
            z += coefficients[f] * x;
        }
        int y = rng.uniform() < sigmoid(z) ? 1 : 0;
        if (rng.uniform() < label_noise) y = 1 - y;
        labels[i] = y;
    }
    return Dataset(std::move(features), std::move(values), std::move(labels));
}

/// Partitions `ds` into (train, test). Rows keep their original relative order.
/// When stratified, the test quota is apportioned across classes by largest
/// remainder, so each class is within one row of its exact share.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                                    bool stratified, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    const std::size_t n = ds.rows();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test >= n) throw DataError("split fraction yields an empty partition");

    Rng rng(seed);
    std::vector<char> in_test(n, 0);
    if (!stratified) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx);
        for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = 1;
    } else {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) by_class[ds.label(i)].push_back(i);
        if (by_class[0].empty() || by_class[1].empty()) {
            throw DataError("stratified split needs both classes present");
        }
        std::size_t quota[2];
        double remainder[2];
        for (int c = 0; c < 2; ++c) {
            const double exact = static_cast<double>(by_class[c].size()) * static_cast<double>(n_test) /
                                 static_cast<double>(n);
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            remainder[c] = exact - static_cast<double>(quota[c]);
        }
        std::size_t assigned = quota[0] + quota[1];
        while (assigned < n_test) {
            int c = remainder[1] > remainder[0] ? 1 : 0;
            if (quota[c] >= by_class[c].size()) c = 1 - c;
            ++quota[c];
            remainder[c] = -1.0;
            ++assigned;
        }
        for (int c = 0; c < 2; ++c) {
            rng.shuffle(by_class[c]);
            for (std::size_t i = 0; i < quota[c]; ++i) in_test[by_class[c][i]] = 1;
        }
    }

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test_idx : train_idx).push_back(i);
    return {ds.subset(train_idx), ds.subset(test_idx)};
}

/// Oversamples the minority class to the majority count by interpolating
/// between a minority row and one of its k nearest minority neighbours.
/// Synthetic rows are appended after the original rows.
inline Dataset smote(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ConfigError("smote needs k >= 1");
    const std::size_t n0 = ds.count_label(0);
    const std::size_t n1 = ds.count_label(1);
    if (n0 == n1) return ds;
    const int minority = n1 < n0 ? 1 : 0;
    const std::size_t deficit = (n1 < n0 ? n0 : n1) - (n1 < n0 ? n1 : n0);

    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.label(i) == minority) members.push_back(i);
    }
    if (members.size() < 2) throw DataError("smote needs at least two minority-class rows");

    const std::size_t m = members.size();
    const std::size_t kk = std::min(k, m - 1);
    const std::size_t d = ds.cols();

    // k nearest same-class neighbours per minority row; ties broken by position.
    std::vector<std::vector<std::size_t>> neighbours(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t a = 0; a < m; ++a) {
        dist.clear();
        auto ra = ds.row(members[a]);
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            auto rb = ds.row(members[b]);
            double s = 0.0;
            for (std::size_t f = 0; f < d; ++f) s += (ra[f] - rb[f]) * (ra[f] - rb[f]);
            dist.emplace_back(s, b);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        for (std::size_t j = 0; j < kk; ++j) neighbours[a].push_back(dist[j].second);
    }

    std::size_t next_id = 0;
    for (auto id : ds.ids()) next_id = std::max(next_id, id + 1);

    Rng rng(seed);
    std::vector<double> values = ds.values();
    std::vector<int> labels = ds.labels();
    std::vector<std::size_t> ids = ds.ids();
    values.reserve(values.size() + deficit * d);
    for (std::size_t s = 0; s < deficit; ++s) {
        const std::size_t a = rng.below(m);
        const std::size_t b = neighbours[a][rng.below(kk)];
        const double u = rng.uniform();
        auto ra = ds.row(members[a]);
        auto rb = ds.row(members[b]);
        for (std::size_t f = 0; f < d; ++f) values.push_back(ra[f] + u * (rb[f] - ra[f]));
        labels.push_back(minority);
        ids.push_back(next_id++);
    }
    return Dataset(ds.features(), std::move(values), std::move(labels), std::move(ids));
}

inline FeatureStats feature_stats(const Dataset& ds) {
    if (ds.rows() < 2) throw DataError("feature statistics need at least two rows");
    FeatureStats stats;
    const double n = static_cast<double>(ds.rows());
    for (std::size_t f = 0; f < ds.cols(); ++f) {
        FeatureSummary s;
        s.name = ds.features()[f].name;
        s.min = s.max = ds.at(0, f);
        double sum = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const double v = ds.at(i, f);
            sum += v;
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
        }
        s.mean = sum / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const double dv = ds.at(i, f) - s.mean;
            ss += dv * dv;
        }
        s.std = std::sqrt(ss / (n - 1.0));
        // Rounding in the mean can push it a hair outside [min, max].
        s.mean = std::clamp(s.mean, s.min, s.max);
        stats.features.push_back(std::move(s));
    }
    return stats;
}

/// 1-based ranks with ties given their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    auto ra = average_ranks(a);
    auto rb = average_ranks(b);
    return pearson(ra, rb);
}

/// Greedy collinearity filter: while some retained pair has |rho| above the
/// threshold, take the most correlated such pair and drop whichever member has
/// the higher mean |rho| against the other retained features (later feature
/// on ties).
inline Dataset spearman_filter(const Dataset& ds, double rho_threshold) {
    if (!(rho_threshold > 0.0 && rho_threshold <= 1.0)) {
        throw ConfigError("rho_threshold must be in (0, 1]");
    }
    const std::size_t d = ds.cols();
    std::vector<std::vector<double>> ranks;
    for (std::size_t f = 0; f < d; ++f) ranks.push_back(average_ranks(ds.column(f)));
    std::vector<std::vector<double>> rho(d, std::vector<double>(d, 1.0));
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a + 1; b < d; ++b) {
            rho[a][b] = rho[b][a] = std::abs(pearson(ranks[a], ranks[b]));
        }
    }

    std::vector<char> kept(d, 1);
    auto mean_abs = [&](std::size_t f) {
        double s = 0.0;
        std::size_t cnt = 0;
        for (std::size_t g = 0; g < d; ++g) {
            if (g == f || !kept[g]) continue;
            s += rho[f][g];
            ++cnt;
        }
        return cnt ? s / static_cast<double>(cnt) : 0.0;
    };
    while (true) {
        double worst = rho_threshold;
        std::optional<std::pair<std::size_t, std::size_t>> pair;
        for (std::size_t a = 0; a < d; ++a) {
            if (!kept[a]) continue;
            for (std::size_t b = a + 1; b < d; ++b) {
                if (kept[b] && rho[a][b] > worst) {
                    worst = rho[a][b];
                    pair = {a, b};
                }
            }
        }
        if (!pair) break;
        const auto [a, b] = *pair;
        kept[mean_abs(a) > mean_abs(b) ? a : b] = 0;
    }

    std::vector<std::size_t> keep;
    for (std::size_t f = 0; f < d; ++f) {
        if (kept[f]) keep.push_back(f);
    }
    if (keep.size() == d) return ds;
    return ds.select_features(keep);
}

/// Random undersampling of the majority class down to the minority count.
inline Dataset balance_test_set(const Dataset& ds, std::uint64_t seed) {
    const std::size_t n0 = ds.count_label(0);
    const std::size_t n1 = ds.count_label(1);
    if (n0 == 0 || n1 == 0) throw DataError("balancing needs both classes present");
    if (n0 == n1) return ds;
    const int majority = n0 > n1 ? 0 : 1;
    const std::size_t target = std::min(n0, n1);

    std::vector<std::size_t> major;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.label(i) == majority) major.push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(major);
    std::vector<char> keep(ds.rows(), 1);
    for (std::size_t j = target; j < major.size(); ++j) keep[major[j]] = 0;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (keep[i]) idx.push_back(i);
    }
    return ds.subset(idx);
}

} // namespace evalxai
