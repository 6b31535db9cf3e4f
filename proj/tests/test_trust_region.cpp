#include <gtest/gtest.h>

#include "adis/nlp/problem.hpp"
#include "adis/nlp/trust_region.hpp"
#include "adis/random.hpp"

using namespace adis::nlp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(TrustRegion, RadiusUpdateExamples) {
    EXPECT_EQ(trust_region_update(0.9, 0.9, 1.0), 2.0);   // good step at the edge
    EXPECT_EQ(trust_region_update(0.9, 0.5, 1.0), 1.0);   // good step well inside
    EXPECT_EQ(trust_region_update(0.5, 1.0, 1.0), 1.0);
    EXPECT_EQ(trust_region_update(0.1, 1.0, 1.0), 1.0);
    EXPECT_EQ(trust_region_update(0.05, 1.0, 1.0), 0.5);
    EXPECT_EQ(trust_region_update(-3.0, 1.0, 1.0), 0.5);
    EXPECT_THROW(trust_region_update(0.5, 1.0, 0.0), adis::ArgumentError);
}

TEST(TrustRegion, ProjectBox) {
    VectorXd z(3), l(3), u(3);
    z << -2, 0.5, 9;
    l << -1, 0, 0;
    u << 1, 1, kInf;
    const VectorXd p = project_box(z, l, u);
    EXPECT_EQ(p, (VectorXd(3) << -1, 0.5, 9).finished());
    EXPECT_THROW(project_box(z, VectorXd(2), u), adis::ArgumentError);
}

TEST(TrustRegion, CauchyPointWithIdentityIsClampedNegativeGradient) {
    adis::Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const int n = 6;
        const VectorXd g = rng.normal_matrix(n, 1);
        const VectorXd lo = -rng.uniform_matrix(n, 1, 0.0, 1.0);
        const VectorXd hi = rng.uniform_matrix(n, 1, 0.0, 1.0);
        const DenseOperator I(MatrixXd::Identity(n, n));
        const CauchyPoint cp = cauchy_point(I, g, lo, hi);
        const VectorXd expect = project_box(VectorXd(-g), lo, hi);
        EXPECT_LT((cp.step - expect).lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(TrustRegion, SteihaugIdentityOneIteration) {
    const DenseOperator I(MatrixXd::Identity(3, 3));
    const VectorXd g = (VectorXd(3) << 0.1, -0.2, 0.3).finished();
    const CgResult r = steihaug_cg(I, g, 10.0, 1e-12);
    EXPECT_EQ(r.exit, CgExit::Converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_LT((r.step + g).norm(), 1e-15);
}

TEST(TrustRegion, SteihaugMatchesCholeskyInsideRegion) {
    MatrixXd B(4, 4);
    B << 4, 1, 0, 0.5, 1, 3, 0.2, 0, 0, 0.2, 2, 0.1, 0.5, 0, 0.1, 5;
    const VectorXd g = (VectorXd(4) << 1, -2, 0.5, 1).finished();
    const VectorXd exact = -B.llt().solve(g);
    const CgResult r = steihaug_cg(DenseOperator(B), g, 100.0, 1e-14);
    EXPECT_EQ(r.exit, CgExit::Converged);
    EXPECT_LT((r.step - exact).norm(), 1e-10);
}

TEST(TrustRegion, SteihaugNegativeCurvatureGoesToBoundary) {
    MatrixXd B(2, 2);
    B << -1, 0, 0, 1;
    const VectorXd g = (VectorXd(2) << 1, 1).finished();
    const DenseOperator op(B);
    const CgResult r = steihaug_cg(op, g, 1.0, 1e-10);
    EXPECT_EQ(r.exit, CgExit::NegativeCurvature);
    EXPECT_NEAR(r.step.lpNorm<Eigen::Infinity>(), 1.0, 1e-14);
    EXPECT_LT(model_value(op, g, r.step), 0.0);
    EXPECT_THROW(steihaug_cg(op, g, VectorXd::Constant(2, -kInf), VectorXd::Constant(2, kInf), 1e-10),
                 adis::NumericalError);
}

TEST(TrustRegion, ZeroGradientGivesZeroStep) {
    const DenseOperator I(MatrixXd::Identity(2, 2));
    const CgResult r = steihaug_cg(I, VectorXd::Zero(2), 1.0, 1e-10);
    EXPECT_EQ(r.exit, CgExit::ZeroGradient);
    EXPECT_EQ(r.step.norm(), 0.0);
}

// Random indefinite models in random boxes: the composite step stays in the
// box, decreases the model, and never does worse than its Cauchy point.
TEST(TrustRegion, CompositeStepPropertiesOnRandomModels) {
    adis::Rng rng(2024);
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + static_cast<int>(rng.below(9));
        const MatrixXd A = rng.normal_matrix(n, n);
        const MatrixXd B = 0.5 * (A + A.transpose());
        const VectorXd g = rng.normal_matrix(n, 1);
        const double delta = rng.uniform(0.05, 3.0);
        VectorXd lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            lo[i] = -delta * (rng.uniform() < 0.3 ? rng.uniform() : 1.0);
            hi[i] = delta * (rng.uniform() < 0.3 ? rng.uniform() : 1.0);
        }
        const DenseOperator op(B);
        const CauchyPoint cp = cauchy_point(op, g, lo, hi);
        const VectorXd p = trust_region_step(op, g, lo, hi, 1e-8, t % 2 == 1);
        for (int i = 0; i < n; ++i) {
            ASSERT_GE(p[i], lo[i] - 1e-15) << t;
            ASSERT_LE(p[i], hi[i] + 1e-15) << t;
        }
        const double mc = model_value(op, g, cp.step);
        const double mp = model_value(op, g, p);
        ASSERT_LE(mc, 0.0) << t;
        ASSERT_LE(mp, mc + 1e-12 * (1 + std::abs(mc))) << t;
        const CgResult cg = steihaug_cg(op, g, delta, 1e-10);
        ASSERT_LE(cg.step.lpNorm<Eigen::Infinity>(), delta * (1 + 1e-14)) << t;
        ASSERT_LE(model_value(op, g, cg.step), 1e-14) << t;
    }
}

TEST(TrustRegion, ModifiedCholeskyShiftsIndefiniteMatrix) {
    MatrixXd B(2, 2);
    B << 1, 0, 0, -2;
    const ModifiedCholesky mc(B);
    EXPECT_GT(mc.shift(), 2.0);
    MatrixXd P(2, 2);
    P << 2, 0.5, 0.5, 1;
    EXPECT_EQ(ModifiedCholesky(P).shift(), 0.0);
}
