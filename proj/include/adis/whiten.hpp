#pragma once

// Probabilistic PCA front end: centering, covariance spectrum, noise floor,
// mixing estimate and whitened coordinates, plus post-hoc source statistics
// and an optional AR prewhitening loop.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "adis/error.hpp"

namespace adis {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Centered {
    Matrix data;
    Vector mu_hat;
};

/// Removes the mean over channels from every column, then the per-channel
/// sample mean. The second step is the mu_hat of the model. With
/// `channel_centering` off only the sample mean is removed.
inline Centered center(const Matrix& X, bool channel_centering = true) {
    if (X.rows() < 1 || X.cols() < 1) throw ArgumentError("center: empty data matrix");
    if (!X.allFinite()) throw ArgumentError("center: data contains non-finite values");
    Centered c;
    c.data = X;
    if (channel_centering) c.data.rowwise() -= c.data.colwise().mean();
    c.mu_hat = c.data.rowwise().mean();
    c.data.colwise() -= c.mu_hat;
    return c;
}

/// Eigenpairs of a symmetric matrix, largest first. Eigenvalues within
/// p eps lambda_1 of zero (including tiny negatives) are set to zero.
inline void sorted_eigen(const Matrix& S, Vector& values, Matrix& vectors) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Eigen::Index p = S.rows();
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
    const double floor = static_cast<double>(p) * std::numeric_limits<double>::epsilon() *
                         std::max(values[0], 0.0);
    for (Eigen::Index i = 0; i < p; ++i)
        if (values[i] <= floor) values[i] = 0.0;
}

struct PpcaOptions {
    bool channel_centering = true;
    // Allow q past p - 2. The noise tail is then empty and sigma2_hat = 0;
    // used for square noiseless mixtures.
    bool allow_empty_tail = false;
    // Raise instead of clipping when lambda_q <= sigma2_hat.
    bool strict_spectrum = false;
    double clip_floor = 1e-12;
};

struct PpcaModel {
    Vector mu_hat;
    Vector eigvals;  // non-increasing
    Matrix U;        // p x p
    int q = 0;
    double sigma2_hat = 0.0;
    Matrix A_hat;    // p x q, Q = I
    Matrix x_tilde;  // q x n
    Vector scale;    // diagonal of Sigma_q - sigma2_hat I after clipping
    bool clipped = false;
    bool empty_tail = false;
    bool channel_centering = true;
    std::vector<std::string> warnings;

    int p() const { return static_cast<int>(U.rows()); }
    int n() const { return static_cast<int>(x_tilde.cols()); }

    Matrix Uq() const { return U.leftCols(q); }

    /// U_q (Sigma_q - sigma2 I)^{1/2} Q'.
    Matrix mixing(const Matrix& Q) const {
        if (Q.rows() != q || Q.cols() != q) throw ArgumentError("mixing: Q must be q x q");
        return U.leftCols(q) * scale.cwiseSqrt().asDiagonal() * Q.transpose();
    }

    /// Centered data in model coordinates (same centering as the fit).
    Matrix center(const Matrix& X) const {
        if (X.rows() != p()) throw ArgumentError("PpcaModel::center: channel count mismatch");
        Matrix c = X;
        if (channel_centering) c.rowwise() -= c.colwise().mean();
        c.colwise() -= mu_hat;
        return c;
    }

    /// (Sigma_q - sigma2 I)^{-1/2} U_q' applied to centered data.
    Matrix whiten(const Matrix& centered) const {
        return scale.cwiseSqrt().cwiseInverse().asDiagonal() * (U.leftCols(q).transpose() * centered);
    }
};

inline nlohmann::json to_json(const PpcaModel& m) {
    return nlohmann::json{
        {"p", m.p()},
        {"q", m.q},
        {"n", m.n()},
        {"sigma2_hat", m.sigma2_hat},
        {"eigvals", std::vector<double>(m.eigvals.data(), m.eigvals.data() + m.eigvals.size())},
        {"mu_hat", std::vector<double>(m.mu_hat.data(), m.mu_hat.data() + m.mu_hat.size())},
        {"clipped", m.clipped},
        {"empty_tail", m.empty_tail},
        {"channel_centering", m.channel_centering},
        {"warnings", m.warnings}};
}

/// Sample covariance (1/n) X X' of already-centered data.
inline Matrix covariance(const Matrix& centered) {
    return (centered * centered.transpose()) / static_cast<double>(centered.cols());
}

inline PpcaModel fit_ppca(const Matrix& X, int q, const PpcaOptions& opt = {}) {
    const int p = static_cast<int>(X.rows());
    if (p < 2) throw ArgumentError("fit_ppca: need at least 2 channels");
    const int q_max = opt.allow_empty_tail ? (opt.channel_centering ? p - 1 : p) : p - 2;
    if (q < 1 || q > q_max)
        throw ArgumentError("fit_ppca: q = " + std::to_string(q) + " outside [1, " +
                            std::to_string(q_max) + "]");

    PpcaModel m;
    m.q = q;
    m.channel_centering = opt.channel_centering;
    if (X.cols() < p)
        m.warnings.push_back("fewer samples (" + std::to_string(X.cols()) + ") than channels (" +
                             std::to_string(p) + ")");
    Centered c = center(X, opt.channel_centering);
    m.mu_hat = c.mu_hat;
    sorted_eigen(covariance(c.data), m.eigvals, m.U);

    // Mean of lambda_{q+1} .. lambda_{p-1}; lambda_p is left out because
    // channel centering removes one dimension.
    const int tail = p - q - 1;
    if (tail > 0) {
        m.sigma2_hat = m.eigvals.segment(q, tail).mean();
    } else {
        m.sigma2_hat = 0.0;
        m.empty_tail = true;
    }

    m.scale.resize(q);
    for (int i = 0; i < q; ++i) {
        const double d = m.eigvals[i] - m.sigma2_hat;
        if (d <= opt.clip_floor) {
            if (opt.strict_spectrum)
                throw DegenerateSpectrumError("fit_ppca: lambda_" + std::to_string(i + 1) +
                                                  " does not exceed the noise floor",
                                              i + 1);
            m.scale[i] = opt.clip_floor;
            if (!m.clipped)
                m.warnings.push_back("Sigma_q - sigma2 I clipped at " + std::to_string(opt.clip_floor) +
                                     " from index " + std::to_string(i + 1));
            m.clipped = true;
        } else {
            m.scale[i] = d;
        }
    }
    m.A_hat = m.mixing(Matrix::Identity(q, q));
    m.x_tilde = m.whiten(c.data);
    return m;
}

struct SourceStats {
    Matrix AtA_inv;    // (A'A)^{-1}; Cov(s_i) = AtA_inv * sigma2_i[i]
    Vector sigma2_i;   // per-sample residual variance
    Matrix rv;         // q x n relative variance map
    std::vector<int> rv_undefined;  // columns with a zero denominator

    Matrix cov(int i) const { return AtA_inv * sigma2_i[i]; }
};

/// Residuals, per-sample source covariance and the relative variance map for
/// mixing A (p x q) and sources s_hat (q x n) of centered data.
inline SourceStats source_stats(const Matrix& centered, const Matrix& A, const Matrix& s_hat) {
    const Eigen::Index p = centered.rows();
    const Eigen::Index q = A.cols();
    if (A.rows() != p || s_hat.rows() != q || s_hat.cols() != centered.cols())
        throw ArgumentError("source_stats: shape mismatch");
    if (p == q) throw ArgumentError("source_stats: p = q leaves no residual degrees of freedom");

    SourceStats st;
    const Matrix AtA = A.transpose() * A;
    Eigen::FullPivLU<Matrix> lu(AtA);
    if (!lu.isInvertible()) throw NumericalError("source_stats: A'A is singular");
    st.AtA_inv = lu.inverse();
    const Matrix resid = centered - A * s_hat;
    st.sigma2_i = resid.colwise().squaredNorm().transpose() / static_cast<double>(p - q);

    Vector var_a(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        const double m = A.col(k).mean();
        var_a[k] = (A.col(k).array() - m).square().mean();
    }
    st.rv = Matrix::Zero(q, centered.cols());
    for (Eigen::Index i = 0; i < centered.cols(); ++i) {
        const Vector num = var_a.cwiseProduct(s_hat.col(i).cwiseAbs2());
        const double den = num.sum();
        if (den > 0.0)
            st.rv.col(i) = num / den;
        else
            st.rv_undefined.push_back(static_cast<int>(i));
    }
    return st;
}

inline SourceStats source_stats(const PpcaModel& model, const Matrix& X, const Matrix& s_hat,
                                const Matrix& Q) {
    return source_stats(model.center(X), model.mixing(Q), s_hat);
}

inline SourceStats source_stats(const PpcaModel& model, const Matrix& X, const Matrix& s_hat) {
    return source_stats(model, X, s_hat, Matrix::Identity(model.q, model.q));
}

// ---------------------------------------------------------------------------
// AR prewhitening along the row (time) axis.

/// Biased autocovariances gamma_0..gamma_order of the columns of R, summed
/// over the columns in `cols`.
inline Vector autocovariance(const Matrix& R, int order, const std::vector<int>& cols) {
    const Eigen::Index T = R.rows();
    Vector g = Vector::Zero(order + 1);
    for (int c : cols) {
        for (int k = 0; k <= order; ++k) {
            double s = 0.0;
            for (Eigen::Index t = k; t < T; ++t) s += R(t, c) * R(t - k, c);
            g[k] += s / static_cast<double>(T);
        }
    }
    return g;
}

/// Spectral radius of the AR companion matrix; < 1 for a stationary model.
inline double ar_spectral_radius(const Vector& phi) {
    const Eigen::Index k = phi.size();
    if (k == 0) return 0.0;
    Matrix C = Matrix::Zero(k, k);
    C.row(0) = phi.transpose();
    for (Eigen::Index i = 1; i < k; ++i) C(i, i - 1) = 1.0;
    return C.eigenvalues().cwiseAbs().maxCoeff();
}

/// Yule-Walker coefficients from autocovariances gamma_0..gamma_k.
/// A zero gamma_0 (no signal) yields phi = 0.
inline Vector yule_walker(const Vector& gamma) {
    const Eigen::Index k = gamma.size() - 1;
    if (k < 1) throw ArgumentError("yule_walker: order must be >= 1");
    if (!(gamma[0] > 0.0)) return Vector::Zero(k);
    Matrix T(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) T(i, j) = gamma[std::abs(i - j)];
    Eigen::LDLT<Matrix> ldlt(T);
    Vector phi = ldlt.solve(gamma.tail(k));
    if (ldlt.info() != Eigen::Success || !phi.allFinite())
        throw NumericalError("yule_walker: singular autocovariance matrix");
    return phi;
}

/// y_t = x_t - sum_k phi_k x_{t-k}, with missing lags treated as zero.
inline Matrix ar_filter(const Matrix& X, const Vector& phi, Eigen::Index col) {
    Matrix y = X.col(col);
    for (Eigen::Index t = 0; t < X.rows(); ++t)
        for (Eigen::Index k = 1; k <= phi.size() && k <= t; ++k) y(t, 0) -= phi[k - 1] * X(t - k, col);
    return y;
}

struct PrewhitenOptions {
    int ar_order = 1;
    int max_rounds = 10;
    double tol = 1e-6;               // mean squared change that ends the loop
    bool per_column = false;         // one AR model per column instead of a pooled one
    double stationarity_margin = 1e-6;
};

struct PrewhitenResult {
    Matrix data;
    int rounds = 0;
    bool converged = false;
    std::vector<Vector> phi;  // per round: pooled, or per column stacked
};

/// Callback: current data -> residuals of the full decomposition (same shape).
using ResidualFn = std::function<Matrix(const Matrix&)>;

inline PrewhitenResult prewhiten_iterate(const Matrix& X, const ResidualFn& residuals,
                                         const PrewhitenOptions& opt = {}) {
    if (opt.ar_order < 1) throw ArgumentError("prewhiten: ar_order must be >= 1");
    if (opt.max_rounds < 0) throw ArgumentError("prewhiten: max_rounds must be >= 0");
    if (X.rows() <= opt.ar_order) throw ArgumentError("prewhiten: series shorter than AR order");
    PrewhitenResult out;
    out.data = X;
    const Eigen::Index n = X.cols();
    for (int round = 0; round < opt.max_rounds; ++round) {
        const Matrix R = residuals(out.data);
        if (R.rows() != X.rows() || R.cols() != n)
            throw ArgumentError("prewhiten: residual callback returned the wrong shape");
        Matrix next(X.rows(), n);
        if (opt.per_column) {
            Vector all(opt.ar_order * n);
            for (Eigen::Index c = 0; c < n; ++c) {
                const Vector phi = yule_walker(autocovariance(R, opt.ar_order, {static_cast<int>(c)}));
                if (ar_spectral_radius(phi) >= 1.0 - opt.stationarity_margin)
                    throw NonStationaryError("prewhiten: AR fit for column " + std::to_string(c) +
                                                 " is not stationary",
                                             static_cast<int>(c));
                all.segment(c * opt.ar_order, opt.ar_order) = phi;
                next.col(c) = ar_filter(out.data, phi, c);
            }
            out.phi.push_back(all);
        } else {
            std::vector<int> cols(n);
            for (Eigen::Index c = 0; c < n; ++c) cols[c] = static_cast<int>(c);
            const Vector phi = yule_walker(autocovariance(R, opt.ar_order, cols));
            if (ar_spectral_radius(phi) >= 1.0 - opt.stationarity_margin)
                throw NonStationaryError("prewhiten: pooled AR fit is not stationary", -1);
            for (Eigen::Index c = 0; c < n; ++c) next.col(c) = ar_filter(out.data, phi, c);
            out.phi.push_back(phi);
        }
        const double change = (next - out.data).squaredNorm() / static_cast<double>(next.size());
        out.data = std::move(next);
        out.rounds = round + 1;
        if (change < opt.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace adis
