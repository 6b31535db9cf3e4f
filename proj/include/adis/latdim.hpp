#pragma once

// Latent dimensionality: a permutation lower bound q_l followed by a
// leave-one-out fit of the eigenvalue tail and a cumulative argmax vote.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "adis/error.hpp"
#include "adis/random.hpp"
#include "adis/whiten.hpp"

namespace adis {

/// Eigenvalues of (1/n) X X' (rows centered first), largest first.
inline Vector covariance_spectrum(const Matrix& X) {
    Matrix c = X;
    c.colwise() -= c.rowwise().mean();
    Vector values;
    Matrix vectors;
    sorted_eigen(covariance(c), values, vectors);
    return values;
}

/// Shuffles the entries of every column independently.
inline Matrix permute_columns(const Matrix& X, Rng& rng) {
    Matrix Xb = X;
    for (Eigen::Index j = 0; j < Xb.cols(); ++j)
        rng.shuffle(std::span<double>(Xb.col(j).data(), static_cast<std::size_t>(Xb.rows())));
    return Xb;
}

struct LowerBound {
    int q_l = 0;
    Vector lambda;
    Vector lambda_b;
};

/// q_l is the length of the leading run of indices with lambda_i > lambda^b_i.
/// With replicates > 1 the permuted spectra are averaged.
inline LowerBound permute_lower_bound(const Matrix& X, std::uint64_t seed, int replicates = 1) {
    if (X.rows() < 2 || X.cols() < 2) throw ArgumentError("permute_lower_bound: X too small");
    if (replicates < 1) throw ArgumentError("permute_lower_bound: replicates must be >= 1");
    LowerBound lb;
    lb.lambda = covariance_spectrum(X);
    lb.lambda_b = Vector::Zero(X.rows());
    Rng rng(seed);
    for (int r = 0; r < replicates; ++r) lb.lambda_b += covariance_spectrum(permute_columns(X, rng));
    lb.lambda_b /= replicates;
    while (lb.q_l < X.rows() && lb.lambda[lb.q_l] > lb.lambda_b[lb.q_l]) ++lb.q_l;
    return lb;
}

struct CvPoint {
    double e_bar = 0.0;
    double var_e = 0.0;
};

/// Leave-one-out fit of a constant to lambda_{q+1} .. lambda_{p-1}
/// (1-based). Needs at least two tail values: 0 <= q <= p - 3.
inline CvPoint cv_profile(const Vector& lambda, int q) {
    const int p = static_cast<int>(lambda.size());
    if (q < 0 || q > p - 3)
        throw ArgumentError("cv_profile: q = " + std::to_string(q) + " outside [0, " +
                            std::to_string(p - 3) + "]");
    const int T = p - 1 - q;
    const Vector tail = lambda.segment(q, T);
    const double total = tail.sum();
    Vector E(T);
    for (int k = 0; k < T; ++k) {
        const double m = (total - tail[k]) / (T - 1);
        E[k] = (tail[k] - m) * (tail[k] - m);
    }
    CvPoint pt;
    pt.e_bar = E.mean();
    pt.var_e = (E.array() - pt.e_bar).square().mean() / T;
    return pt;
}

struct LatDimSummary {
    int q_l = 0;
    Vector lambda;
    Vector lambda_b;
    std::vector<int> q_grid;      // q values where delta is defined
    std::vector<double> delta;    // delta(q) for q in q_grid
    std::vector<double> e_bar;    // E-bar(q) for q_grid plus one more
    std::vector<double> var_e;
    std::vector<int> f;           // f(r) for r in q_grid
    std::vector<int> g;           // g(y) for y in q_grid
    int q_hat = 0;
    bool degenerate = false;
    std::uint64_t seed = 0;
};

struct LatDimOptions {
    int replicates = 1;
};

/// Scale-free step statistic; zero when both variances vanish.
inline double delta_stat(const CvPoint& a, const CvPoint& b) {
    const double v = a.var_e + b.var_e;
    if (v < 1e-300) return 0.0;
    return (a.e_bar - b.e_bar) / std::sqrt(v);
}

inline LatDimSummary estimate_q(const Matrix& X, std::uint64_t seed, const LatDimOptions& opt = {}) {
    const int p = static_cast<int>(X.rows());
    if (p < 8) throw ArgumentError("estimate_q: need p >= 8 channels for the q_l .. p-4 scan, got " +
                                   std::to_string(p));
    LatDimSummary s;
    s.seed = seed;
    const LowerBound lb = permute_lower_bound(X, seed, opt.replicates);
    s.q_l = lb.q_l;
    s.lambda = lb.lambda;
    s.lambda_b = lb.lambda_b;

    // q_l bounds q from below and delta peaks at q - 1, so the scan starts
    // one below q_l.
    const int q_lo = std::max(s.q_l - 1, 0);
    const int q_hi = p - 4;
    if (q_lo > q_hi) {
        s.degenerate = true;
        s.q_hat = std::max(std::min(s.q_l, p - 3), 1);
        return s;
    }
    for (int q = q_lo; q <= q_hi + 1; ++q) {
        const CvPoint c = cv_profile(s.lambda, q);
        s.e_bar.push_back(c.e_bar);
        s.var_e.push_back(c.var_e);
    }
    bool any_defined = false;
    for (int q = q_lo; q <= q_hi; ++q) {
        const std::size_t i = static_cast<std::size_t>(q - q_lo);
        const CvPoint a{s.e_bar[i], s.var_e[i]}, b{s.e_bar[i + 1], s.var_e[i + 1]};
        any_defined = any_defined || (a.var_e + b.var_e >= 1e-300);
        s.q_grid.push_back(q);
        s.delta.push_back(delta_stat(a, b));
    }
    if (!any_defined) {
        s.degenerate = true;
        s.q_hat = std::max(s.q_l, 1);
        return s;
    }

    // f(r) = argmax of delta over [q_grid.front(), r]; strict comparison keeps the
    // smallest index on ties.
    std::size_t best = 0;
    s.g.assign(s.delta.size(), 0);
    for (std::size_t r = 0; r < s.delta.size(); ++r) {
        if (s.delta[r] > s.delta[best]) best = r;
        s.f.push_back(s.q_grid[best]);
        ++s.g[best];
    }
    std::size_t y = 0;
    for (std::size_t i = 1; i < s.g.size(); ++i)
        if (s.g[i] > s.g[y]) y = i;
    s.q_hat = 1 + s.q_grid[y];
    return s;
}

inline nlohmann::json to_json(const LatDimSummary& s) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return nlohmann::json{{"q_hat", s.q_hat},
                          {"q_l", s.q_l},
                          {"degenerate", s.degenerate},
                          {"seed", s.seed},
                          {"lambda", vec(s.lambda)},
                          {"lambda_b", vec(s.lambda_b)},
                          {"q", s.q_grid},
                          {"delta", s.delta},
                          {"e_bar", s.e_bar},
                          {"var_e", s.var_e},
                          {"f", s.f},
                          {"g", s.g}};
}

/// Columns q, E-bar, Var, delta.
inline std::string profile_csv(const LatDimSummary& s) {
    std::string out = "q,e_bar,var_e,delta\n";
    char buf[128];
    for (std::size_t i = 0; i < s.q_grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", s.q_grid[i], s.e_bar[i], s.var_e[i],
                      s.delta[i]);
        out += buf;
    }
    return out;
}

}  // namespace adis
