#include <gtest/gtest.h>

#include "adis/random.hpp"
#include "adis/whiten.hpp"

using namespace adis;

namespace {

// p x n data with covariance exactly V diag(s2) V', V an orthonormal basis
// of the sum-zero subspace, so both centering steps leave it unchanged.
Matrix exact_spectrum(const Vector& s2, int n, std::uint64_t seed) {
    const int p = static_cast<int>(s2.size()) + 1;
    Rng rng(seed);
    Matrix B(p, p);
    B.col(0).setOnes();
    B.rightCols(p - 1) = rng.normal_matrix(p, p - 1);
    const Matrix V = Eigen::HouseholderQR<Matrix>(B).householderQ() * Matrix::Identity(p, p);
    Matrix G(n, p);
    G.col(0).setOnes();
    G.rightCols(p - 1) = rng.normal_matrix(n, p - 1);
    const Matrix T = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(n, p);
    Matrix rows = T.rightCols(p - 1).transpose();
    for (int k = 0; k < p - 1; ++k) rows.row(k) *= std::sqrt(n * s2[k]);
    return V.rightCols(p - 1) * rows;
}

// x = A s + sigma eta with Laplace sources.
Matrix simulate(int p, int q, int n, double sigma, std::uint64_t seed, Matrix* A_out = nullptr) {
    Rng rng(seed);
    const Matrix A = rng.normal_matrix(p, q);
    Matrix S(q, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < q; ++i) S(i, j) = rng.laplace(1.0 / std::sqrt(2.0));
    if (A_out) *A_out = A;
    return A * S + sigma * rng.normal_matrix(p, n);
}

Matrix random_orthogonal(Rng& rng, int q) {
    return Eigen::HouseholderQR<Matrix>(rng.normal_matrix(q, q)).householderQ() *
           Matrix::Identity(q, q);
}

}  // namespace

TEST(Whiten, CenterConstantMatrixIsZero) {
    const Centered c = center(Matrix::Constant(4, 9, 3.5));
    EXPECT_LE(c.data.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Whiten, CenterIsIdempotent) {
    Rng rng(1);
    const Matrix once = center(rng.normal_matrix(5, 40)).data;
    const Centered twice = center(once);
    EXPECT_LE((twice.data - once).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(twice.mu_hat.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Whiten, CenterZeroesColumnSumsAndRowMeans) {
    Rng rng(2);
    const Matrix X = rng.normal_matrix(5, 100) + Matrix::Constant(5, 100, 7.0);
    const Centered c = center(X);
    for (int j = 0; j < 100; ++j) {
        double s = 0;
        for (int i = 0; i < 5; ++i) s += c.data(i, j);
        ASSERT_LE(std::abs(s), 1e-10);
    }
    for (int i = 0; i < 5; ++i) {
        double s = 0;
        for (int j = 0; j < 100; ++j) s += c.data(i, j);
        ASSERT_LE(std::abs(s / 100), 1e-10);
    }
    const Centered plain = center(X, false);
    EXPECT_NEAR(plain.mu_hat.mean(), X.mean(), 1e-12);
    EXPECT_THROW(center(Matrix(0, 3)), ArgumentError);
}

TEST(Whiten, EigenpairsOrderedAndReconstruct) {
    Rng rng(3);
    const Matrix C = covariance(center(rng.normal_matrix(8, 300)).data);
    Vector lam;
    Matrix U;
    sorted_eigen(C, lam, U);
    for (int i = 1; i < 8; ++i) EXPECT_GE(lam[i - 1], lam[i]);
    EXPECT_LE((C - U * lam.asDiagonal() * U.transpose()).norm(), 1e-8 * C.norm());
    EXPECT_EQ(lam[7], 0.0);  // channel centering removes one dimension
}

TEST(Whiten, NoiselessRankQHasZeroNoiseFloor) {
    Rng rng(4);
    const Matrix X = rng.normal_matrix(10, 3) * rng.normal_matrix(3, 5000);
    const PpcaModel m = fit_ppca(X, 3);
    EXPECT_LE(m.sigma2_hat, 1e-10);
    const Matrix C = covariance(m.x_tilde);
    EXPECT_LE((C - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Whiten, WhitenedCovarianceIdentity) {
    // With a noise floor the whitened covariance is diag(lambda/(lambda - sigma2)).
    const Matrix X = simulate(12, 4, 3000, 0.5, 5);
    const PpcaModel m = fit_ppca(X, 4);
    ASSERT_FALSE(m.clipped);
    const Matrix C = covariance(m.x_tilde);
    Vector expect(4);
    for (int i = 0; i < 4; ++i) expect[i] = m.eigvals[i] / (m.eigvals[i] - m.sigma2_hat);
    EXPECT_LE((C - Matrix(expect.asDiagonal())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Whiten, SquareNoiselessMixtureWhitensToIdentity) {
    Rng rng(6);
    const int q = 5;
    const Matrix X = rng.normal_matrix(q, q) * rng.normal_matrix(q, 4000);
    PpcaOptions opt;
    opt.channel_centering = false;
    opt.allow_empty_tail = true;
    const PpcaModel m = fit_ppca(X, q, opt);
    EXPECT_TRUE(m.empty_tail);
    EXPECT_EQ(m.sigma2_hat, 0.0);
    EXPECT_LE((covariance(m.x_tilde) - Matrix::Identity(q, q)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Whiten, NoiseFloorIsTailMean) {
    Vector s2(7);
    s2 << 9, 5, 3, 1.5, 1.0, 0.5, 0.25;
    const Matrix X = exact_spectrum(s2, 500, 7);
    const PpcaModel m = fit_ppca(X, 3);
    EXPECT_NEAR(m.sigma2_hat, (1.5 + 1.0 + 0.5 + 0.25) / 4, 1e-12);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(m.eigvals[i], s2[i], 1e-10);
    EXPECT_NEAR(m.eigvals[7], 0.0, 1e-12);
}

TEST(Whiten, NoiseFloorMatchesTrueVariance) {
    // lambda_{q+1..p-1} = sigma^2 for data from the generative model.
    double total = 0;
    const int reps = 50;
    for (int r = 0; r < reps; ++r) {
        const PpcaModel m = fit_ppca(simulate(50, 5, 10000, 1.0, 100 + r), 5);
        if (r == 0) {
            EXPECT_NEAR(m.sigma2_hat, 1.0, 0.05);
            EXPECT_LE(m.eigvals[49], 1e-10);
        }
        total += m.sigma2_hat;
    }
    EXPECT_NEAR(total / reps, 1.0, 0.05);
}

TEST(Whiten, RotationIndeterminacy) {
    const PpcaModel m = fit_ppca(simulate(9, 3, 1000, 0.3, 8), 3);
    const Matrix AAt = m.A_hat * m.A_hat.transpose();
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const Matrix A = m.mixing(random_orthogonal(rng, 3));
        EXPECT_LE((A * A.transpose() - AAt).norm(), 1e-10 * AAt.norm());
    }
}

TEST(Whiten, LeastSquaresSourcesEqualRotatedWhitenedData) {
    const Matrix X = simulate(9, 3, 800, 0.3, 10);
    const PpcaModel m = fit_ppca(X, 3);
    Rng rng(11);
    const Matrix Q = random_orthogonal(rng, 3);
    const Matrix A = m.mixing(Q);
    const Matrix s_ls = (A.transpose() * A).ldlt().solve(A.transpose() * m.center(X));
    EXPECT_LE((s_ls - Q * m.x_tilde).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whiten, DegenerateSpectrumClipsOrThrows) {
    Vector s2(5);
    s2 << 4, 1, 1, 1, 1;
    const Matrix X = exact_spectrum(s2, 200, 12);
    const PpcaModel m = fit_ppca(X, 2);
    EXPECT_TRUE(m.clipped);
    EXPECT_EQ(m.scale[1], 1e-12);
    EXPECT_FALSE(m.warnings.empty());
    PpcaOptions strict;
    strict.strict_spectrum = true;
    try {
        fit_ppca(X, 2, strict);
        FAIL() << "expected DegenerateSpectrumError";
    } catch (const DegenerateSpectrumError& e) {
        EXPECT_EQ(e.index(), 2);
    }
}

TEST(Whiten, ArgumentErrors) {
    Rng rng(13);
    const Matrix X = rng.normal_matrix(6, 50);
    EXPECT_THROW(fit_ppca(X, 0), ArgumentError);
    EXPECT_THROW(fit_ppca(X, 5), ArgumentError);
    EXPECT_NO_THROW(fit_ppca(X, 4));
    Matrix bad = X;
    bad(1, 1) = std::nan("");
    EXPECT_THROW(fit_ppca(bad, 2), ArgumentError);
    EXPECT_FALSE(fit_ppca(rng.normal_matrix(6, 4), 2).warnings.empty());
}

TEST(Whiten, SourceStatsExactReconstruction) {
    Rng rng(14);
    const Matrix A = rng.normal_matrix(6, 2);
    const Matrix S = rng.normal_matrix(2, 30);
    const SourceStats st = source_stats(A * S, A, S);
    EXPECT_LE(st.sigma2_i.cwiseAbs().maxCoeff(), 1e-24);
    EXPECT_LE(st.cov(3).cwiseAbs().maxCoeff(), 1e-24);
    EXPECT_THROW(source_stats(rng.normal_matrix(2, 30), rng.normal_matrix(2, 2), S), ArgumentError);
}

TEST(Whiten, SourceStatsSingleComponent) {
    Rng rng(15);
    const Matrix A = rng.normal_matrix(5, 1);
    Matrix S = rng.normal_matrix(1, 20);
    S(0, 4) = 0.0;
    const SourceStats st = source_stats(rng.normal_matrix(5, 20), A, S);
    for (int i = 0; i < 20; ++i) {
        if (i == 4) continue;
        EXPECT_NEAR(st.rv(0, i), 1.0, 1e-15);
    }
    ASSERT_EQ(st.rv_undefined.size(), 1u);
    EXPECT_EQ(st.rv_undefined[0], 4);
}

TEST(Whiten, SourceStatsMatchDirectFormulas) {
    Rng rng(16);
    const int p = 7, n = 25;
    const Matrix A = rng.normal_matrix(p, 2);
    const Matrix S = rng.normal_matrix(2, n);
    const Matrix X = A * S + 0.2 * rng.normal_matrix(p, n);
    const SourceStats st = source_stats(X, A, S);
    double va[2];
    for (int k = 0; k < 2; ++k) {
        double m = 0, v = 0;
        for (int i = 0; i < p; ++i) m += A(i, k) / p;
        for (int i = 0; i < p; ++i) v += (A(i, k) - m) * (A(i, k) - m) / p;
        va[k] = v;
    }
    const Matrix AtA = A.transpose() * A;
    for (int i = 0; i < n; ++i) {
        double r2 = 0;
        for (int c = 0; c < p; ++c) {
            const double r = X(c, i) - A(c, 0) * S(0, i) - A(c, 1) * S(1, i);
            r2 += r * r;
        }
        EXPECT_NEAR(st.sigma2_i[i], r2 / (p - 2), 1e-12);
        const double a = va[0] * S(0, i) * S(0, i), b = va[1] * S(1, i) * S(1, i);
        EXPECT_NEAR(st.rv(0, i), a / (a + b), 1e-12);
        EXPECT_NEAR(st.rv(0, i) + st.rv(1, i), 1.0, 1e-10);
        EXPECT_LE((st.cov(i) * AtA - st.sigma2_i[i] * Matrix::Identity(2, 2)).norm(), 1e-10);
    }
}

TEST(Whiten, ModelJson) {
    const PpcaModel m = fit_ppca(simulate(8, 2, 500, 0.3, 17), 2);
    const auto j = to_json(m);
    EXPECT_EQ(j.at("q"), 2);
    EXPECT_EQ(j.at("eigvals").size(), 8u);
    EXPECT_DOUBLE_EQ(j.at("sigma2_hat").get<double>(), m.sigma2_hat);
}

// ---- prewhitening ----

TEST(Prewhiten, WhiteResidualsLeaveDataUnchanged) {
    // Residual series whose lag-1 products vanish exactly: phi = 0.
    Rng rng(18);
    Matrix R = Matrix::Zero(200, 3);
    for (int t = 0; t < 200; t += 2)
        for (int c = 0; c < 3; ++c) R(t, c) = rng.normal();
    const Matrix X = rng.normal_matrix(200, 3);
    const PrewhitenResult r = prewhiten_iterate(X, [&](const Matrix&) { return R; });
    EXPECT_EQ(r.rounds, 1);
    EXPECT_TRUE(r.converged);
    EXPECT_LE((r.data - X).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Prewhiten, RecoversArCoefficient) {
    Rng rng(19);
    const int T = 10000;
    Matrix X(T, 1);
    X(0, 0) = rng.normal();
    for (int t = 1; t < T; ++t) X(t, 0) = 0.5 * X(t - 1, 0) + rng.normal();
    PrewhitenOptions opt;
    opt.max_rounds = 1;
    const PrewhitenResult r = prewhiten_iterate(X, [](const Matrix& D) { return D; }, opt);
    ASSERT_EQ(r.phi.size(), 1u);
    EXPECT_NEAR(r.phi[0][0], 0.5, 0.05);
    // The filtered series is close to white.
    const Vector g = autocovariance(r.data, 1, {0});
    EXPECT_LT(std::abs(g[1] / g[0]), 0.05);
}

TEST(Prewhiten, ZeroRoundsIsIdentity) {
    Rng rng(20);
    const Matrix X = rng.normal_matrix(50, 4);
    PrewhitenOptions opt;
    opt.max_rounds = 0;
    const PrewhitenResult r = prewhiten_iterate(X, [](const Matrix& D) { return D; }, opt);
    EXPECT_EQ(r.data, X);
    EXPECT_EQ(r.rounds, 0);
}

TEST(Prewhiten, NonStationaryColumnIsNamed) {
    // A constant series gives phi = 1 - 1/T, inside the stationarity margin.
    const int T = 2000000;
    Rng rng(21);
    Matrix X(T, 2);
    for (int t = 0; t < T; ++t) X(t, 0) = (t % 2) ? 0.0 : rng.normal();
    X.col(1).setConstant(1.0);
    PrewhitenOptions opt;
    opt.per_column = true;
    try {
        prewhiten_iterate(X, [](const Matrix& D) { return D; }, opt);
        FAIL() << "expected NonStationaryError";
    } catch (const NonStationaryError& e) {
        EXPECT_EQ(e.index(), 1);
    }
}

TEST(Prewhiten, YuleWalkerAndSpectralRadius) {
    Vector g(3);
    g << 1.0, 0.5, 0.25;  // AR(1) with phi = 0.5
    const Vector phi = yule_walker(g);
    EXPECT_NEAR(phi[0], 0.5, 1e-14);
    EXPECT_NEAR(phi[1], 0.0, 1e-14);
    EXPECT_NEAR(ar_spectral_radius((Vector(2) << 0.5, 0.0).finished()), 0.5, 1e-12);
    EXPECT_EQ(yule_walker(Vector::Zero(2)), Vector::Zero(1));
    EXPECT_THROW(yule_walker(Vector::Ones(1)), ArgumentError);
}
