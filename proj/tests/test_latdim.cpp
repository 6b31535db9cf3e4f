#include <gtest/gtest.h>

#include <algorithm>

#include "adis/bench/signals.hpp"
#include "adis/latdim.hpp"
#include "adis/random.hpp"

using namespace adis;
using bench::SourceFamily;

namespace {
Matrix centered_mixture(SourceFamily f, int p, int q, int n, double ratio, std::uint64_t seed) {
    return center(bench::noisy_mixture(f, p, q, n, ratio, seed).X).data;
}
}  // namespace

TEST(LatDim, WhiteNoiseLowerBoundCalibration) {
    // Stated calibration: q_l in {0, 1, 2} in at least 95 of 100 runs.
    int small = 0;
    for (int r = 0; r < 100; ++r) {
        Rng rng(split_seed(500, r));
        const Matrix X = center(rng.normal_matrix(50, 1000), false).data;
        if (permute_lower_bound(X, split_seed(501, r)).q_l <= 2) ++small;
    }
    EXPECT_GE(small, 95) << "white-noise runs with q_l <= 2";
}

TEST(LatDim, LowerBoundOnModelData) {
    int at_least_8 = 0;
    const int runs = 50;
    for (int r = 0; r < runs; ++r) {
        const Matrix X = centered_mixture(SourceFamily::Gaussian, 50, 10, 1000, 2.0, split_seed(600, r));
        const int ql = permute_lower_bound(X, split_seed(601, r)).q_l;
        EXPECT_LE(ql, 10) << r;
        if (ql >= 8) ++at_least_8;
    }
    EXPECT_GE(at_least_8, 0.9 * runs);
}

TEST(LatDim, GiantRankOneComponent) {
    Rng rng(7);
    Matrix X = 0.1 * rng.normal_matrix(12, 400);
    X += 10.0 * rng.normal_matrix(12, 1) * rng.normal_matrix(1, 400);
    const LowerBound lb = permute_lower_bound(center(X).data, 3);
    ASSERT_GE(lb.lambda[0], 100 * lb.lambda[1]);
    EXPECT_GE(lb.q_l, 1);
}

TEST(LatDim, CvProfileConstantTail) {
    Vector lam(9);
    lam << 9, 7, 3, 3, 3, 3, 3, 3, 0;
    const CvPoint c = cv_profile(lam, 2);
    EXPECT_EQ(c.e_bar, 0.0);
    EXPECT_EQ(c.var_e, 0.0);
}

TEST(LatDim, CvProfileHandComputed) {
    // Tail (2,1,1,1,1): E = (1, 1/16, 1/16, 1/16, 1/16).
    Vector lam(8);
    lam << 10, 5, 2, 1, 1, 1, 1, 0;
    const CvPoint c = cv_profile(lam, 2);
    EXPECT_NEAR(c.e_bar, 0.25, 1e-15);
    const double pop_var = ((0.75 * 0.75) + 4 * (0.1875 * 0.1875)) / 5;
    EXPECT_NEAR(c.var_e, pop_var / 5, 1e-15);
    EXPECT_THROW(cv_profile(lam, 6), ArgumentError);
    EXPECT_THROW(cv_profile(lam, -1), ArgumentError);
}

TEST(LatDim, CvProfileNonNegative) {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        Vector lam = rng.uniform_matrix(15, 1, 0.0, 5.0);
        std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
        for (int q = 0; q <= 12; ++q) ASSERT_GE(cv_profile(lam, q).e_bar, 0.0);
    }
}

TEST(LatDim, NoiselessRankQIsRecovered) {
    Rng rng(9);
    for (int q : {1, 4, 9}) {
        const Matrix X = rng.normal_matrix(20, q) * rng.normal_matrix(q, 500);
        const LatDimSummary s = estimate_q(center(X).data, 10);
        EXPECT_EQ(s.q_hat, q);
    }
}

TEST(LatDim, LowSnrGaussianThirtyFiveSources) {
    // Gaussian sources, q = 35, p = 100, n = 1000, sigma_min(A)/sigma = 0.75:
    // delta peaks at 34 and q_hat = 35.
    const Matrix X = centered_mixture(SourceFamily::Gaussian, 100, 35, 1000, 0.75, 1);
    const LatDimSummary s = estimate_q(X, 2);
    const auto peak = std::max_element(s.delta.begin(), s.delta.end()) - s.delta.begin();
    EXPECT_EQ(s.q_grid[peak], 34);
    EXPECT_EQ(s.q_hat, 35);
}

TEST(LatDim, SummaryInvariants) {
    for (int r = 0; r < 10; ++r) {
        const Matrix X = centered_mixture(SourceFamily::Uniform, 30, 3 + r, 600, 1.5, split_seed(700, r));
        const LatDimSummary s = estimate_q(X, split_seed(701, r));
        ASSERT_FALSE(s.degenerate);
        EXPECT_LE(s.q_l, s.q_hat);
        EXPECT_LE(s.q_hat, 30 - 3);
        int total = 0;
        for (int g : s.g) total += g;
        EXPECT_EQ(total, static_cast<int>(s.q_grid.size()));
        EXPECT_EQ(s.q_grid.back(), 30 - 4);
        EXPECT_EQ(s.f.size(), s.q_grid.size());
        EXPECT_EQ(s.e_bar.size(), s.q_grid.size() + 1);
        for (std::size_t i = 1; i < s.f.size(); ++i) EXPECT_GE(s.f[i], s.f[i - 1]);
    }
}

TEST(LatDim, Determinism) {
    const Matrix X = centered_mixture(SourceFamily::Gamma, 40, 6, 800, 1.0, 11);
    const auto a = to_json(estimate_q(X, 99));
    const auto b = to_json(estimate_q(X, 99));
    EXPECT_EQ(a.dump(), b.dump());
}

TEST(LatDim, ScaleInvariance) {
    const Matrix X = centered_mixture(SourceFamily::Gaussian, 40, 8, 800, 1.25, 12);
    const LatDimSummary a = estimate_q(X, 5);
    const LatDimSummary b = estimate_q(3.7 * X, 5);
    EXPECT_EQ(a.q_l, b.q_l);
    EXPECT_EQ(a.q_hat, b.q_hat);
    EXPECT_EQ(a.f, b.f);
    EXPECT_EQ(a.g, b.g);
    ASSERT_EQ(a.delta.size(), b.delta.size());
    for (std::size_t i = 0; i < a.delta.size(); ++i)
        EXPECT_NEAR(a.delta[i], b.delta[i], 1e-8 * (1 + std::abs(a.delta[i])));
}

TEST(LatDim, PermutationKeepsColumnMultisets) {
    Rng data(13), rng(14);
    const Matrix X = data.normal_matrix(6, 9);
    const Matrix P = permute_columns(X, rng);
    bool moved = false;
    for (int j = 0; j < 9; ++j) {
        std::vector<double> a(X.col(j).data(), X.col(j).data() + 6);
        std::vector<double> b(P.col(j).data(), P.col(j).data() + 6);
        moved = moved || a != b;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b) << j;
    }
    EXPECT_TRUE(moved);
}

TEST(LatDim, DegenerateProfileIsFlagged) {
    const LatDimSummary s = estimate_q(Matrix::Zero(10, 50), 1);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.q_hat, 1);
}

TEST(LatDim, TooFewChannels) {
    Rng rng(15);
    EXPECT_THROW(estimate_q(rng.normal_matrix(7, 100), 1), ArgumentError);
    EXPECT_THROW(permute_lower_bound(rng.normal_matrix(10, 100), 1, 0), ArgumentError);
}

TEST(LatDim, ProfileCsv) {
    const LatDimSummary s = estimate_q(centered_mixture(SourceFamily::Gaussian, 12, 2, 300, 2.0, 16), 3);
    const std::string csv = profile_csv(s);
    EXPECT_EQ(csv.rfind("q,e_bar,var_e,delta\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), s.q_grid.size() + 1);
}
