#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "evalxai/models/logreg.hpp"
#include "evalxai/models/scoring.hpp"

using namespace evalxai;

namespace {

Dataset one_d(std::vector<double> xs, std::vector<int> ys) {
    return Dataset({{"x", false}}, xs, ys);
}

} // namespace

TEST(LogReg, SeparableSign) {
    const auto ds = one_d({-1, -1, -1, 1, 1, 1}, {0, 0, 0, 1, 1, 1});
    const auto m = train_logreg(ds);
    EXPECT_GT(m.weights()[0], 0.0);
    EXPECT_EQ(score_model(m, ds).accuracy, 1.0);
}

TEST(LogReg, ZeroEpochsIsInitialization) {
    const auto ds = generate_synthetic(50, std::vector<double>{1.0, 2.0}, 0.0, 0.0, 1);
    const auto m = train_logreg(ds, {.learning_rate = 0.1, .epochs = 0, .l2 = 0.0, .seed = 0});
    for (double w : m.weights()) EXPECT_EQ(w, 0.0);
    for (std::size_t i = 0; i < ds.rows(); ++i) EXPECT_EQ(m.risk(ds.row(i)), 0.5);
}

TEST(LogReg, AnalyticGradientMatchesFiniteDifferences) {
    const auto ds = generate_synthetic(200, std::vector<double>{1.0, -0.5, 0.25}, 0.3, 0.05, 2);
    const std::size_t d = ds.cols();
    const double l2 = 0.01;
    // at a few arbitrary points and at the trained optimum (standardization
    // is irrelevant here: the loss is checked on raw features)
    std::vector<std::vector<double>> points{{0.1, -0.2, 0.3, 0.05}, {1.5, 0.7, -2.0, -0.4}};
    const auto trained = train_logreg(ds, {.learning_rate = 0.5, .epochs = 3000, .l2 = 0.0, .seed = 0});
    auto tw = trained.weights();
    tw.push_back(trained.intercept());
    points.push_back(tw);
    for (const auto& p : points) {
        std::vector<double> w(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d));
        const double b = p[d];
        const auto g = detail::logreg_gradient(ds.values(), ds.labels(), d, w, b, l2);
        for (std::size_t k = 0; k <= d; ++k) {
            const double h = 1e-6;
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (k < d) {
                wp[k] += h;
                wm[k] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd = (detail::logreg_loss(ds.values(), ds.labels(), d, wp, bp, l2) -
                               detail::logreg_loss(ds.values(), ds.labels(), d, wm, bm, l2)) / (2 * h);
            EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "component " << k;
        }
    }
    // unregularized optimum: gradient close to zero
    std::vector<double> w(tw.begin(), tw.begin() + static_cast<std::ptrdiff_t>(d));
    const auto g0 = detail::logreg_gradient(ds.values(), ds.labels(), d, w, tw[d], 0.0);
    for (double v : g0) EXPECT_NEAR(v, 0.0, 1e-4);
}

TEST(LogReg, RiskIsExactSigmoid) {
    LogisticRegressionModel m({2.0, -1.0}, 0.5);
    const std::vector<double> x{0.3, 1.2};
    EXPECT_EQ(m.risk(x), sigmoid(0.5 + 2.0 * 0.3 + -1.0 * 1.2));
}

TEST(LogReg, MonotoneInEveryFeature) {
    const auto ds = generate_synthetic(300, std::vector<double>{1.0, -1.0, 0.5, 0.0}, 0.0, 0.1, 5);
    const auto m = train_logreg(ds);
    for (std::size_t f = 0; f < ds.cols(); ++f) {
        if (m.weights()[f] == 0.0) continue;
        std::vector<double> x(ds.cols(), 0.1);
        double prev = -1.0;
        for (int k = -20; k <= 20; ++k) {
            x[f] = 0.25 * k;
            const double r = m.risk(x);
            if (k > -20) {
                if (m.weights()[f] > 0) EXPECT_GT(r, prev);
                else EXPECT_LT(r, prev);
            }
            prev = r;
        }
    }
}

TEST(LogReg, DivergenceIsReported) {
    const auto ds = one_d({-1, 1, -2, 2}, {0, 1, 0, 1});
    EXPECT_THROW(train_logreg(ds, {.learning_rate = 1e308, .epochs = 50, .l2 = 0.0, .seed = 0}), Error);
}

TEST(LogReg, NeedsBothClasses) {
    EXPECT_THROW(train_logreg(one_d({1, 2}, {1, 1})), DataError);
}
