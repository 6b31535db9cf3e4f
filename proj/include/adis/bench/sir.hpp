#pragma once

// Source-to-interference ratio of estimated sources against the truth.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "adis/error.hpp"

namespace adis::bench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSirCapDb = 150.0;

struct SirReport {
    Vector sir_db;                 // indexed by true source
    std::vector<int> match;        // match[j] = estimated row paired with true source j
    double mean = 0.0;
};

struct SirParts {
    Vector target;  // projection onto the matched true source
    Vector interf;  // rest of the projection onto the span of all true sources
};

/// Absolute correlations |corr(true_i, est_j)|.
inline Matrix abs_correlation(const Matrix& S_true, const Matrix& S_hat) {
    auto norm_rows = [](Matrix M) {
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            M.row(i).array() -= M.row(i).mean();
            const double n = M.row(i).norm();
            if (n > 0.0) M.row(i) /= n;
        }
        return M;
    };
    return (norm_rows(S_true) * norm_rows(S_hat).transpose()).cwiseAbs();
}

/// Greedy pairing on |corr|: repeatedly take the largest remaining entry,
/// scanning row-major so ties go to the lower indices.
inline std::vector<int> greedy_match(const Matrix& C) {
    const Eigen::Index q = C.rows();
    std::vector<int> match(static_cast<std::size_t>(q), -1);
    std::vector<bool> used_r(static_cast<std::size_t>(q), false), used_c(static_cast<std::size_t>(C.cols()), false);
    for (Eigen::Index step = 0; step < q; ++step) {
        double best = -1.0;
        Eigen::Index bi = -1, bj = -1;
        for (Eigen::Index i = 0; i < q; ++i) {
            if (used_r[i]) continue;
            for (Eigen::Index j = 0; j < C.cols(); ++j) {
                if (used_c[j]) continue;
                if (C(i, j) > best) {
                    best = C(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        used_r[bi] = used_c[bj] = true;
        match[bi] = static_cast<int>(bj);
    }
    return match;
}

/// Orthonormal basis of the row span of S_true (columns, n x q).
inline Matrix span_basis(const Matrix& S_true) {
    Eigen::ColPivHouseholderQR<Matrix> qr(S_true.transpose());
    if (qr.rank() < S_true.rows()) throw NumericalError("sir: true sources are rank deficient");
    return qr.householderQ() * Matrix::Identity(S_true.cols(), S_true.rows());
}

inline SirParts sir_parts(const Matrix& basis, const Vector& s_true, const Vector& s_hat) {
    SirParts p;
    p.target = s_true * (s_true.dot(s_hat) / s_true.squaredNorm());
    p.interf = basis * (basis.transpose() * s_hat) - p.target;
    return p;
}

inline double sir_db(const SirParts& p) {
    const double t = p.target.squaredNorm(), e = p.interf.squaredNorm();
    if (!(t > 0.0)) return -kSirCapDb;  // nothing of the target recovered
    if (e < 1e-15 * t) return kSirCapDb;
    if (t < 1e-15 * e) return -kSirCapDb;
    return std::clamp(10.0 * std::log10(t / e), -kSirCapDb, kSirCapDb);
}

inline SirReport sir(const Matrix& S_true, const Matrix& S_hat) {
    const Eigen::Index q = S_true.rows(), n = S_true.cols();
    if (q < 1 || n <= q) throw ArgumentError("sir: need q >= 1 and n > q");
    if (S_hat.rows() != q || S_hat.cols() != n) throw ArgumentError("sir: S_hat shape differs from S_true");
    const Matrix basis = span_basis(S_true);
    SirReport r;
    r.match = greedy_match(abs_correlation(S_true, S_hat));
    r.sir_db.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        const SirParts parts = sir_parts(basis, S_true.row(j).transpose(), S_hat.row(r.match[j]).transpose());
        r.sir_db[j] = sir_db(parts);
    }
    r.mean = r.sir_db.mean();
    return r;
}

}  // namespace adis::bench
