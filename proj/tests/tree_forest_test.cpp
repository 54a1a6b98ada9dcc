#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "evalxai/models/forest.hpp"
#include "evalxai/models/scoring.hpp"
#include "evalxai/models/serialize.hpp"
#include "evalxai/models/tree.hpp"

using namespace evalxai;

namespace {

Dataset one_d(std::vector<double> xs, std::vector<int> ys) { return Dataset({{"x", false}}, xs, ys); }

std::vector<std::vector<double>> probes(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (auto& p : out) {
        for (auto& v : p) v = 2.0 * rng.normal();
    }
    return out;
}

void check_structure(const DecisionTreeModel& t, std::size_t max_depth) {
    EXPECT_LE(t.depth(), max_depth);
    for (const auto& n : t.nodes()) {
        EXPECT_GE(n.value, 0.0);
        EXPECT_LE(n.value, 1.0);
        if (!n.is_leaf()) {
            EXPECT_LT(n.left, t.nodes().size());
            EXPECT_LT(n.right, t.nodes().size());
        }
    }
}

} // namespace

TEST(Tree, PureDataIsOneLeaf) {
    const auto t = train_tree(one_d({1, 2, 3}, {1, 1, 1}));
    ASSERT_EQ(t.nodes().size(), 1u);
    EXPECT_EQ(t.nodes()[0].value, 1.0);
    const auto t0 = train_tree(one_d({1, 2, 3}, {0, 0, 0}));
    EXPECT_EQ(t0.nodes()[0].value, 0.0);
}

TEST(Tree, StepFunctionSplitsInTheGap) {
    // label = x > 3; the only impurity-reducing cut that separates the
    // classes lies between 3 and 4, and its midpoint is 3.5.
    const auto ds = one_d({1, 2, 3, 4, 5, 6}, {0, 0, 0, 1, 1, 1});
    const auto t = train_tree(ds, {.min_samples_split = 2, .min_samples_leaf = 1});
    EXPECT_EQ(t.depth(), 1u);
    EXPECT_EQ(t.nodes()[0].feature, 0);
    EXPECT_EQ(t.nodes()[0].threshold, 3.5);
    EXPECT_EQ(score_model(t, ds).accuracy, 1.0);
}

TEST(Tree, DepthZeroIsClassPrior) {
    const auto ds = one_d({1, 2, 3, 4}, {0, 1, 1, 1});
    const auto t = train_tree(ds, {.max_depth = 0});
    ASSERT_EQ(t.nodes().size(), 1u);
    EXPECT_EQ(t.nodes()[0].value, 0.75);
}

TEST(Tree, RespectsStructuralLimits) {
    const auto ds = generate_synthetic(500, std::vector<double>{1, -1, 0.5}, 0.0, 0.1, 3);
    for (std::size_t depth : {1u, 3u, 6u}) {
        const auto t = train_tree(ds, {.max_depth = depth, .min_samples_split = 10, .min_samples_leaf = 5});
        check_structure(t, depth);
        for (const auto& n : t.nodes()) {
            if (n.is_leaf()) EXPECT_GE(n.samples, 5u);
            else EXPECT_GE(n.samples, 10u);
        }
    }
}

TEST(Tree, ReproducibleWithSeed) {
    const auto ds = generate_synthetic(400, std::vector<double>{1, -1, 0.5, 0.2}, 0.0, 0.1, 3);
    const TreeConfig cfg{.max_depth = 6, .max_features = 2, .seed = 77};
    const auto a = train_tree(ds, cfg);
    const auto b = train_tree(ds, cfg);
    for (const auto& p : probes(1000, 4, 1)) ASSERT_EQ(a.risk(p), b.risk(p));
}

TEST(Forest, SingleTreeReduction) {
    const auto ds = generate_synthetic(300, std::vector<double>{1, -1, 0.5}, 0.0, 0.1, 4);
    ForestConfig fc;
    fc.n_estimators = 1;
    fc.bootstrap = false;
    fc.max_features = {MaxFeatures::Kind::All, 0};
    const auto forest = train_forest(ds, fc);
    const auto tree = train_tree(ds, fc.tree);
    for (const auto& p : probes(200, 3, 2)) ASSERT_EQ(forest.risk(p), tree.risk(p));
}

TEST(Forest, RiskWithinTreeRange) {
    const auto ds = generate_synthetic(300, std::vector<double>{1, -1, 0.5}, 0.0, 0.1, 4);
    const auto f = train_forest(ds, {.n_estimators = 15, .seed = 3});
    for (const auto& p : probes(200, 3, 5)) {
        double lo = 1.0, hi = 0.0;
        for (const auto& t : f.trees()) {
            lo = std::min(lo, t.risk(p));
            hi = std::max(hi, t.risk(p));
        }
        const double r = f.risk(p);
        EXPECT_GE(r, lo - 1e-15);
        EXPECT_LE(r, hi + 1e-15);
        EXPECT_EQ(classify(f, p), r >= 0.5 ? 1 : 0);
    }
}

TEST(Forest, ReproducibleWithSeed) {
    const auto ds = generate_synthetic(300, std::vector<double>{1, -1, 0.5, 0.3}, 0.0, 0.1, 4);
    const ForestConfig cfg{.n_estimators = 10, .seed = 42};
    const auto a = train_forest(ds, cfg);
    const auto b = train_forest(ds, cfg);
    for (const auto& p : probes(1000, 4, 6)) ASSERT_EQ(a.risk(p), b.risk(p));
    EXPECT_THROW(train_forest(ds, {.n_estimators = 0}), ConfigError);
}

TEST(Serialization, ModelsRoundTrip) {
    const auto ds = generate_synthetic(200, std::vector<double>{1, -1, 0.5}, 0.0, 0.1, 4);
    const std::vector<std::string> names{"f1", "f2", "f3"};
    const std::vector<AnyModel> models{train_logreg(ds), train_tree(ds), train_forest(ds, {.n_estimators = 5})};
    for (const auto& m : models) {
        const auto doc = model_to_json({"m", names, m}).dump();
        const auto back = model_from_json(ordered_json::parse(doc));
        EXPECT_EQ(back.features, names);
        EXPECT_EQ(kind_name(back.model), kind_name(m));
        EXPECT_EQ(model_to_json(back).dump(), doc);
        for (const auto& p : probes(100, 3, 8)) ASSERT_EQ(back.model.risk(p), m.risk(p));
    }
    EXPECT_THROW(model_from_json(ordered_json::parse(R"({"version":2})")), DataError);
    EXPECT_THROW(model_from_json(ordered_json::parse(R"({"version":1,"features":[],"kind":"mlp","config":{}})")),
                 DataError);
}
