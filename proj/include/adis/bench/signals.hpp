#pragma once

// Synthetic sources and noisy mixtures for the benchmarks.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "adis/error.hpp"
#include "adis/random.hpp"

namespace adis::bench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rows shifted to zero mean and scaled to unit (population) variance.
inline Matrix standardize_rows(Matrix S) {
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const double m = S.row(i).mean();
        S.row(i).array() -= m;
        const double sd = std::sqrt(S.row(i).squaredNorm() / static_cast<double>(S.cols()));
        if (sd > 0.0) S.row(i) /= sd;
    }
    return S;
}

/// Sine, square wave, sawtooth, uniform noise and Laplacian noise.
inline Matrix synth5(int n, std::uint64_t seed) {
    if (n < 10) throw ArgumentError("synth5: n too small");
    Rng rng(seed);
    Matrix S(5, n);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int t = 0; t < n; ++t) {
        S(0, t) = std::sin(two_pi * t / 57.0);
        S(1, t) = std::sin(two_pi * t / 91.0) >= 0.0 ? 1.0 : -1.0;
        S(2, t) = 2.0 * std::fmod(t / 37.0, 1.0) - 1.0;
    }
    for (int t = 0; t < n; ++t) S(3, t) = rng.uniform(-1.0, 1.0);
    for (int t = 0; t < n; ++t) S(4, t) = rng.laplace();
    return standardize_rows(S);
}

/// Sparse smooth bells: each source is a handful of Gaussian bumps on a
/// zero baseline.
inline Matrix sparse_bells(int q, int n, std::uint64_t seed, int bumps = 3) {
    Rng rng(seed);
    Matrix S = Matrix::Zero(q, n);
    for (int i = 0; i < q; ++i) {
        for (int b = 0; b < bumps; ++b) {
            const double c = rng.uniform(0.0, n);
            const double w = rng.uniform(0.005, 0.02) * n;
            const double h = rng.uniform(0.5, 1.5);
            for (int t = 0; t < n; ++t) S(i, t) += h * std::exp(-0.5 * std::pow((t - c) / w, 2));
        }
    }
    return standardize_rows(S);
}

/// Narrow-band sources: sinusoids with slowly drifting phase.
inline Matrix narrow_band(int q, int n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix S(q, n);
    for (int i = 0; i < q; ++i) {
        const double f = rng.uniform(0.01, 0.2);
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int t = 0; t < n; ++t) {
            phase += 2.0 * std::numbers::pi * f + 0.05 * rng.normal();
            S(i, t) = std::sin(phase);
        }
    }
    return standardize_rows(S);
}

/// AR(2) resonances driven by Laplacian innovations, a crude speech stand-in.
inline Matrix speech_like(int q, int n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix S(q, n);
    for (int i = 0; i < q; ++i) {
        const double r = rng.uniform(0.9, 0.98);
        const double th = rng.uniform(0.1, 1.2);
        const double a1 = 2.0 * r * std::cos(th), a2 = -r * r;
        double y1 = 0.0, y2 = 0.0;
        for (int t = 0; t < n; ++t) {
            const double y = a1 * y1 + a2 * y2 + rng.laplace();
            S(i, t) = y;
            y2 = y1;
            y1 = y;
        }
    }
    return standardize_rows(S);
}

enum class SourceFamily { Gaussian, Uniform, Gamma };

inline std::string_view to_string(SourceFamily f) {
    switch (f) {
        case SourceFamily::Gaussian: return "gaussian";
        case SourceFamily::Uniform: return "uniform";
        case SourceFamily::Gamma: return "gamma";
    }
    return "?";
}

/// Unit-variance i.i.d. draws; Gamma uses shape 2.
inline Matrix iid_sources(SourceFamily family, int q, int n, Rng& rng) {
    Matrix S(q, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < q; ++i) {
            switch (family) {
                case SourceFamily::Gaussian: S(i, j) = rng.normal(); break;
                case SourceFamily::Uniform: S(i, j) = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0)); break;
                case SourceFamily::Gamma: S(i, j) = (rng.gamma(2.0) - 2.0) / std::sqrt(2.0); break;
            }
        }
    }
    return S;
}

struct NoisyMixture {
    Matrix X;  // p x n
    Matrix A;  // p x q, sigma_min(A) = 1
    Matrix S;  // q x n
    double sigma = 0.0;
};

/// x = A s + sigma eta with A uniform(0, 1) rescaled to unit smallest
/// singular value, so sigma_min(A) / sigma = ratio.
inline NoisyMixture noisy_mixture(SourceFamily family, int p, int q, int n, double ratio,
                                  std::uint64_t seed) {
    if (q < 1 || q > p) throw ArgumentError("noisy_mixture: need 1 <= q <= p");
    if (!(ratio > 0.0)) throw ArgumentError("noisy_mixture: ratio must be positive");
    Rng rng(seed);
    NoisyMixture m;
    m.A = rng.uniform_matrix(p, q, 0.0, 1.0);
    Eigen::JacobiSVD<Matrix> svd(m.A);
    const double smin = svd.singularValues()[q - 1];
    if (!(smin > 0.0)) throw NumericalError("noisy_mixture: singular mixing matrix");
    m.A /= smin;
    m.S = iid_sources(family, q, n, rng);
    m.sigma = 1.0 / ratio;
    m.X = m.A * m.S + m.sigma * rng.normal_matrix(p, n);
    return m;
}

}  // namespace adis::bench
