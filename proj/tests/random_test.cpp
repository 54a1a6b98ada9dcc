#include <gtest/gtest.h>

#include <set>

#include "evalxai/random.hpp"

using namespace evalxai;

TEST(DeriveSeed, IsPure) {
    for (std::uint64_t s : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
        EXPECT_EQ(derive_seed(s, 7, 2), derive_seed(s, 7, 2));
    }
}

TEST(DeriveSeed, FrozenValues) {
    // Pinned so that reports stay reproducible across builds.
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(derive_seed(0, 0, 0), derive_seed(0, 0, 0));
    EXPECT_NE(derive_seed(0, 0, 0), 0ULL);
}

TEST(DeriveSeed, InstanceAndRunAreNotSymmetric) {
    Rng rng(123);
    for (int t = 0; t < 10000; ++t) {
        const auto s = rng.next();
        ASSERT_NE(derive_seed(s, 0, 1), derive_seed(s, 1, 0)) << "master " << s;
    }
}

TEST(DeriveSeed, MasterSeedAvalanche) {
    Rng rng(7);
    std::size_t changed = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto i = rng.below(100000);
        const auto r = rng.below(16);
        changed += derive_seed(1, i, r) != derive_seed(2, i, r);
    }
    EXPECT_GE(changed, 990u);
}

TEST(DeriveSeed, DistinctAcrossGrid) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 500; ++i) {
        for (std::uint64_t r = 0; r < 10; ++r) seen.insert(derive_seed(99, i, r));
    }
    EXPECT_EQ(seen.size(), 5000u);
}

TEST(Rng, UniformRangeAndBelow) {
    Rng rng(5);
    for (int t = 0; t < 10000; ++t) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.below(7), 7u);
    }
}

TEST(Rng, NormalMoments) {
    Rng rng(11);
    double s = 0, ss = 0;
    const int n = 200000;
    for (int t = 0; t < n; ++t) {
        const double x = rng.normal();
        s += x;
        ss += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(ss / n, 1.0, 0.02);
}
