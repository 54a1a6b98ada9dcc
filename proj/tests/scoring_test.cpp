#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "evalxai/models/scoring.hpp"

using namespace evalxai;

namespace {

// Brute-force AUC: fraction of (positive, negative) pairs ranked correctly,
// ties worth one half.
double pair_auc(const std::vector<double>& r, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            pairs += 1.0;
            wins += r[i] > r[j] ? 1.0 : (r[i] == r[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

} // namespace

TEST(Score, PerfectSeparation) {
    const std::vector<double> r{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> y{0, 0, 1, 1};
    const auto s = score_risks(r, y);
    EXPECT_EQ(s.accuracy, 1.0);
    EXPECT_EQ(s.f1, 1.0);
    EXPECT_EQ(s.auc, 1.0);
}

TEST(Score, ConstantRisksGiveHalfAuc) {
    const std::vector<double> r(6, 0.3);
    const std::vector<int> y{0, 1, 0, 1, 1, 0};
    EXPECT_EQ(score_risks(r, y).auc, 0.5);
}

TEST(Score, FourPointExample) {
    const std::vector<double> r{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_EQ(pair_auc(r, y), 0.75);
    EXPECT_EQ(score_risks(r, y).auc, 0.75);
}

TEST(Score, SingleClassHasNoAuc) {
    const std::vector<double> r{0.1, 0.9};
    const std::vector<int> y{1, 1};
    const auto s = score_risks(r, y);
    EXPECT_FALSE(s.auc.has_value());
    EXPECT_EQ(s.accuracy, 0.5);
}

TEST(Score, F1ZeroWithoutPositives) {
    const std::vector<double> r{0.1, 0.2};
    const std::vector<int> y{0, 0};
    EXPECT_EQ(score_risks(r, y).f1, 0.0);
}

TEST(Score, AucEqualsPairCountingExactly) {
    Rng rng(17);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> r(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces many ties
            r[i] = static_cast<double>(rng.below(t % 2 ? 5 : 1000)) / 10.0;
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 0;
        y[1] = 1;
        ASSERT_EQ(*score_risks(r, y).auc, pair_auc(r, y)) << "trial " << t;
    }
}

TEST(Score, ClassifyMatchesThreshold) {
    FunctionModel m([](std::span<const double> x) { return x[0]; });
    for (double v : {0.0, 0.49999999, 0.5, 0.7, 1.0}) {
        const std::vector<double> x{v};
        EXPECT_EQ(classify(m, x), v >= 0.5 ? 1 : 0);
    }
}

TEST(CrossValidation, LeaveOneOutFolds) {
    const std::vector<int> y{0, 1, 0, 1};
    const auto folds = stratified_folds(y, 4, 1);
    ASSERT_EQ(folds.size(), 4u);
    for (const auto& f : folds) EXPECT_EQ(f.size(), 1u);
}

TEST(CrossValidation, FoldSizesDifferByAtMostOne) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 10 + rng.below(200);
        std::vector<int> y(n);
        for (auto& v : y) v = rng.bernoulli(0.3);
        const std::size_t k = 2 + rng.below(9);
        const auto folds = stratified_folds(y, k, t);
        std::size_t lo = n, hi = 0, total = 0;
        for (const auto& f : folds) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            total += f.size();
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_EQ(total, n);
    }
    EXPECT_THROW(stratified_folds(std::vector<int>{0, 1}, 1, 0), ConfigError);
}

TEST(CrossValidation, DuplicatedDataMatchesFullTrainAccuracy) {
    const auto half = generate_synthetic(300, std::vector<double>{1.5, -1.0, 0.5}, 0.0, 0.0, 21);
    std::vector<double> v = half.values();
    v.insert(v.end(), half.values().begin(), half.values().end());
    std::vector<int> y = half.labels();
    y.insert(y.end(), half.labels().begin(), half.labels().end());
    const Dataset ds(half.features(), v, y);
    const ModelConfig cfg = LogRegConfig{};
    const auto cv = k_fold_cv(cfg, ds, 10, 3);
    const auto full = score_model(train_model(cfg, ds), ds);
    EXPECT_NEAR(cv.accuracy, full.accuracy, 0.05);
    ASSERT_TRUE(cv.auc.has_value());
}

TEST(CrossValidation, MissingClassInTrainingFoldIsAnError) {
    const Dataset ds({{"x", false}}, {1, 2, 3}, {0, 0, 1});
    EXPECT_THROW(k_fold_cv(ModelConfig{LogRegConfig{}}, ds, 3, 0), DataError);
}

TEST(Search, SinglePointSpace) {
    const auto ds = generate_synthetic(200, std::vector<double>{1.0, -1.0}, 0.0, 0.05, 3);
    const SearchSpace space{{"max_depth", {{3}}}};
    const auto r = search_hyperparams(TreeConfig{}, space, SearchStrategy::Grid, 0, ds, 5, 1);
    ASSERT_EQ(r.trials.size(), 1u);
    EXPECT_EQ(std::get<TreeConfig>(r.best).max_depth, 3u);
}

TEST(Search, UntrainedModelLoses) {
    const auto ds = generate_synthetic(400, std::vector<double>{2.0, -1.5, 1.0}, 0.0, 0.0, 5);
    // zero epochs leave every weight at zero, so every risk ties and AUC is 0.5
    const SearchSpace space{{"epochs", {{0, 300}}}};
    const auto r = search_hyperparams(LogRegConfig{}, space, SearchStrategy::Grid, 0, ds, 5, 1);
    EXPECT_EQ(std::get<LogRegConfig>(r.best).epochs, 300u);
    ASSERT_EQ(r.trials.size(), 2u);
    EXPECT_EQ(r.trials[0].score->auc, 0.5);
    // the winner is the first trial holding the maximal AUC
    std::size_t first_max = 0;
    for (std::size_t i = 1; i < r.trials.size(); ++i) {
        if (*r.trials[i].score->auc > *r.trials[first_max].score->auc) first_max = i;
    }
    EXPECT_EQ(r.best_params, r.trials[first_max].params);
}

TEST(Search, HugeL2ShrinksWeights) {
    const auto ds = generate_synthetic(400, std::vector<double>{2.0, -1.5, 1.0}, 0.0, 0.0, 5);
    const auto strong = train_logreg(ds, {.l2 = 1e6});
    for (double w : strong.weights()) EXPECT_LT(std::abs(w), 1e-4);
}

TEST(Search, GridEnumeratesCrossProductAndReports) {
    const auto ds = generate_synthetic(200, std::vector<double>{1.0, -1.0}, 0.0, 0.05, 3);
    const SearchSpace space{{"l2", {{0.1, 0.01}}}, {"epochs", {{50, 100, 200}}}};
    const auto r = search_hyperparams(LogRegConfig{}, space, SearchStrategy::Grid, 0, ds, 5, 1);
    ASSERT_EQ(r.trials.size(), 6u);
    EXPECT_EQ(r.trials[1].params[1].second, 100.0);
    EXPECT_EQ(r.trials[3].params[0].second, 0.01);
    const auto text = r.describe();
    EXPECT_EQ(text.rfind("Grid search (logistic_regression): AUC 0.", 0), 0u) << text;
    EXPECT_NE(text.find(", l2: "), std::string::npos);
    EXPECT_NE(text.find(", epochs: "), std::string::npos);
}

TEST(Search, RandomRespectsBudgetAndRange) {
    const auto ds = generate_synthetic(200, std::vector<double>{1.0, -1.0}, 0.0, 0.05, 3);
    ParamDomain depth;
    depth.range = {{2.0, 5.0}};
    depth.integer = true;
    const SearchSpace space{{"max_depth", depth}};
    const auto r = search_hyperparams(TreeConfig{}, space, SearchStrategy::Random, 7, ds, 3, 9);
    ASSERT_EQ(r.trials.size(), 7u);
    for (const auto& t : r.trials) {
        EXPECT_GE(t.params[0].second, 2.0);
        EXPECT_LE(t.params[0].second, 5.0);
        EXPECT_EQ(t.params[0].second, std::floor(t.params[0].second));
    }
}

TEST(Search, FailedTrialsAreSkipped) {
    const auto ds = generate_synthetic(100, std::vector<double>{1.0}, 0.0, 0.0, 3);
    const SearchSpace space{{"learning_rate", {{1e308, 0.5}}}, {"l2", {{0.0}}}};
    const auto r = search_hyperparams(LogRegConfig{.epochs = 50}, space, SearchStrategy::Grid, 0, ds, 3, 1);
    EXPECT_FALSE(r.trials[0].error.empty());
    EXPECT_EQ(std::get<LogRegConfig>(r.best).learning_rate, 0.5);

    const SearchSpace bad{{"learning_rate", {{1e308}}}, {"l2", {{0.0}}}};
    EXPECT_THROW(search_hyperparams(LogRegConfig{.epochs = 50}, bad, SearchStrategy::Grid, 0, ds, 3, 1), Error);
}
