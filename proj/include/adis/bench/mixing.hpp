#pragma once

// Square mixing matrices for the Monte-Carlo separation benchmark.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "adis/error.hpp"
#include "adis/random.hpp"

namespace adis::bench {

using Matrix = Eigen::MatrixXd;

enum class MixingFamily {
    UniformRandom,
    RandomSparse,
    RandomBipolar,
    SymmetricRandom,
    IllConditionedRandom,
    Hilbert,
    Toeplitz,
    Hankel,
    Orthogonal,
    NonnegativeSymmetric,
    BipolarSymmetric,
    SkewSymmetric,
};

inline constexpr std::array<MixingFamily, 12> kAllFamilies = {
    MixingFamily::UniformRandom,        MixingFamily::RandomSparse,    MixingFamily::RandomBipolar,
    MixingFamily::SymmetricRandom,      MixingFamily::IllConditionedRandom, MixingFamily::Hilbert,
    MixingFamily::Toeplitz,             MixingFamily::Hankel,          MixingFamily::Orthogonal,
    MixingFamily::NonnegativeSymmetric, MixingFamily::BipolarSymmetric, MixingFamily::SkewSymmetric};

inline std::string_view to_string(MixingFamily f) {
    switch (f) {
        case MixingFamily::UniformRandom: return "uniform-random";
        case MixingFamily::RandomSparse: return "random-sparse";
        case MixingFamily::RandomBipolar: return "random-bipolar";
        case MixingFamily::SymmetricRandom: return "symmetric-random";
        case MixingFamily::IllConditionedRandom: return "ill-conditioned-random";
        case MixingFamily::Hilbert: return "hilbert";
        case MixingFamily::Toeplitz: return "toeplitz";
        case MixingFamily::Hankel: return "hankel";
        case MixingFamily::Orthogonal: return "orthogonal";
        case MixingFamily::NonnegativeSymmetric: return "nonnegative-symmetric";
        case MixingFamily::BipolarSymmetric: return "bipolar-symmetric";
        case MixingFamily::SkewSymmetric: return "skew-symmetric";
    }
    return "?";
}

inline MixingFamily mixing_family_from_string(std::string_view s) {
    for (MixingFamily f : kAllFamilies)
        if (to_string(f) == s) return f;
    throw ArgumentError("unknown mixing family '" + std::string(s) + "'");
}

struct MixingSpec {
    MixingFamily family = MixingFamily::UniformRandom;
    int dim = 2;
    std::uint64_t seed = 0;
    double density = 0.2;        // off-diagonal fill of RandomSparse
    double condition = 1e4;      // target cond_2 of IllConditionedRandom

    void validate() const {
        if (dim < 1) throw ArgumentError("MixingSpec: dim must be >= 1");
        if (family == MixingFamily::SkewSymmetric && dim % 2 == 1)
            throw ArgumentError("MixingSpec: skew-symmetric matrices of odd order are singular");
        if (!(density >= 0.0 && density <= 1.0)) throw ArgumentError("MixingSpec: density outside [0, 1]");
        if (!(condition >= 1.0)) throw ArgumentError("MixingSpec: condition must be >= 1");
    }
};

inline Matrix random_orthogonal(int q, Rng& rng) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(q, q));
    Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < q; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

namespace detail {
inline double bipolar(Rng& rng) { return rng.uniform() < 0.5 ? -1.0 : 1.0; }

inline Matrix draw_mixing(const MixingSpec& s, Rng& rng) {
    const int q = s.dim;
    Matrix A(q, q);
    switch (s.family) {
        case MixingFamily::UniformRandom:
            return rng.uniform_matrix(q, q, 0.0, 1.0);
        case MixingFamily::RandomSparse: {
            // A random permutation carries the diagonal so the matrix stays
            // nonsingular; the rest is filled at the given density.
            A.setZero();
            std::vector<int> perm(q);
            for (int i = 0; i < q; ++i) perm[i] = i;
            rng.shuffle(std::span<int>(perm));
            for (int i = 0; i < q; ++i) A(i, perm[i]) = rng.uniform(0.5, 1.0);
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i)
                    if (A(i, j) == 0.0 && rng.uniform() < s.density) A(i, j) = rng.uniform(0.0, 1.0);
            return A;
        }
        case MixingFamily::RandomBipolar:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i) A(i, j) = bipolar(rng);
            return A;
        case MixingFamily::SymmetricRandom:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i <= j; ++i) A(i, j) = A(j, i) = rng.uniform(-1.0, 1.0);
            return A;
        case MixingFamily::IllConditionedRandom: {
            const Matrix U = random_orthogonal(q, rng);
            const Matrix V = random_orthogonal(q, rng);
            Eigen::VectorXd sv(q);
            for (int i = 0; i < q; ++i)
                sv[i] = q == 1 ? 1.0 : std::pow(s.condition, -static_cast<double>(i) / (q - 1));
            return U * sv.asDiagonal() * V.transpose();
        }
        case MixingFamily::Hilbert:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i) A(i, j) = 1.0 / (i + j + 1);
            return A;
        case MixingFamily::Toeplitz: {
            Eigen::VectorXd t(2 * q - 1);  // t[q-1+d] on diagonal offset d = j - i
            for (int k = 0; k < 2 * q - 1; ++k) t[k] = rng.uniform(0.0, 1.0);
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i) A(i, j) = t[q - 1 + j - i];
            return A;
        }
        case MixingFamily::Hankel: {
            Eigen::VectorXd h(2 * q - 1);
            for (int k = 0; k < 2 * q - 1; ++k) h[k] = rng.uniform(0.0, 1.0);
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i) A(i, j) = h[i + j];
            return A;
        }
        case MixingFamily::Orthogonal:
            return random_orthogonal(q, rng);
        case MixingFamily::NonnegativeSymmetric:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i <= j; ++i) A(i, j) = A(j, i) = rng.uniform(0.0, 1.0);
            return A;
        case MixingFamily::BipolarSymmetric:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i <= j; ++i) A(i, j) = A(j, i) = bipolar(rng);
            return A;
        case MixingFamily::SkewSymmetric:
            A.setZero();
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < j; ++i) {
                    A(i, j) = rng.uniform(-1.0, 1.0);
                    A(j, i) = -A(i, j);
                }
            return A;
    }
    throw ArgumentError("gen_mixing: unknown family");
}

inline bool full_rank(const Matrix& A) {
    Eigen::JacobiSVD<Matrix> svd(A);
    const auto& s = svd.singularValues();
    return s.size() > 0 && s[s.size() - 1] > s[0] * A.rows() * 1e-15;
}
}  // namespace detail

/// Deterministic per seed; rank-deficient draws are retried with seed + 1,
/// up to 100 attempts.
inline Matrix gen_mixing(const MixingSpec& spec) {
    spec.validate();
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(spec.seed + static_cast<std::uint64_t>(attempt));
        Matrix A = detail::draw_mixing(spec, rng);
        if (detail::full_rank(A)) return A;
    }
    throw NumericalError("gen_mixing: no full-rank " + std::string(to_string(spec.family)) +
                         " matrix in 100 attempts");
}

}  // namespace adis::bench
