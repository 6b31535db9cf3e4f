#pragma once

// Contrast functions on projections w'X and the problem builders used by
// projection pursuit. The default contrast is the log-cosh negentropy
// approximation (E G(w'x) - E G(v))^2.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adis/error.hpp"
#include "adis/nlp/problem.hpp"

namespace adis {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct GValue {
    double value = 0.0;
    double derivative = 0.0;
};

/// log cosh x = |x| + log1p(exp(-2|x|)) - log 2, finite for every finite x.
inline GValue g_logcosh(double x) {
    const double a = std::abs(x);
    return {a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2, std::tanh(x)};
}

struct Quadrature {
    Vector nodes;
    Vector weights;
};

/// Gauss-Hermite rule for E f(v), v ~ N(0, 1): nodes sqrt(2) x_i and
/// weights w_i / sqrt(pi) from the eigenpairs of the Jacobi matrix.
inline Quadrature gauss_hermite(int nodes) {
    if (nodes < 1) throw ArgumentError("gauss_hermite: need at least one node");
    Matrix J = Matrix::Zero(nodes, nodes);
    for (int i = 1; i < nodes; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigensolver failed");
    Quadrature q;
    q.nodes = std::numbers::sqrt2 * es.eigenvalues();
    q.weights = es.eigenvectors().row(0).transpose().cwiseAbs2();
    return q;
}

/// E log cosh v for v ~ N(0, 1).
inline double gauss_expectation(int nodes) {
    const Quadrature q = gauss_hermite(nodes);
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) s += q.weights[i] * g_logcosh(q.nodes[i]).value;
    return s / q.weights.sum();
}

inline constexpr int kDefaultHermiteNodes = 150;

/// Cached E G(v) at the default node count.
inline double gauss_expectation() {
    static const double c = gauss_expectation(kDefaultHermiteNodes);
    return c;
}

struct ContrastValue {
    double value = 0.0;
    Vector gradient;
};

/// h(w; X): depends on the data only through the projection w'X.
struct ContrastFn {
    std::string name;
    std::function<ContrastValue(const Vector& w, const Matrix& X)> evaluate;
};

/// J = (m - c)^2, m = mean G(w'x_i), grad = 2 (m - c) mean tanh(w'x_i) x_i.
inline ContrastValue negentropy(const Vector& w, const Matrix& X) {
    if (X.cols() < 2) throw ArgumentError("negentropy: need at least two samples");
    if (w.size() != X.rows()) throw ArgumentError("negentropy: w and X disagree in dimension");
    const Eigen::RowVectorXd y = w.transpose() * X;
    const double n = static_cast<double>(X.cols());
    double m = 0.0;
    Eigen::RowVectorXd t(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const GValue g = g_logcosh(y[i]);
        m += g.value;
        t[i] = g.derivative;
    }
    m /= n;
    const double d = m - gauss_expectation();
    ContrastValue r;
    r.value = d * d;
    r.gradient = (2.0 * d / n) * (X * t.transpose());
    return r;
}

inline ContrastFn negentropy_logcosh() { return {"negentropy-logcosh", negentropy}; }

inline ContrastFn contrast_by_name(const std::string& name) {
    if (name == "negentropy-logcosh") return negentropy_logcosh();
    throw ArgumentError("unknown contrast '" + name + "'");
}

/// Supplementary term b(w; Theta) for one component.
using ComponentHook = std::function<ContrastValue(const Vector& w, const Matrix& X)>;

struct JointValue {
    double value = 0.0;
    Matrix gradient;  // same shape as Q
};
/// Supplementary term over all components at once (rows of Q are the w_k).
using JointHook = std::function<JointValue(const Matrix& Q, const Matrix& X)>;

struct ConstraintValue {
    Vector values;
    Matrix jacobian;  // rows x dim(w)
};
using ComponentConstraint = std::function<ConstraintValue(const Vector& w, const Matrix& X)>;

/// User constraints c_i(w) = 0 and g_i(w) >= 0 on one component.
struct ConstraintSet {
    int n_eq = 0;
    int n_ineq = 0;
    ComponentConstraint eq;
    ComponentConstraint ineq;
};

/// Builds the per-component (deflation) and joint problems that pursuit
/// hands to the solver. Objectives are negated: the solver minimizes.
class ProblemFactory {
public:
    ProblemFactory(ContrastFn contrast, std::optional<ComponentHook> b = std::nullopt,
                   ConstraintSet constraints = {}, std::optional<JointHook> joint_b = std::nullopt)
        : h_(std::move(contrast)), b_(std::move(b)), cons_(std::move(constraints)),
          joint_b_(std::move(joint_b)) {
        if (!h_.evaluate) throw ArgumentError("ProblemFactory: contrast has no evaluate");
        if (cons_.n_eq < 0 || cons_.n_ineq < 0) throw ArgumentError("ProblemFactory: negative constraint count");
        if ((cons_.n_eq > 0 && !cons_.eq) || (cons_.n_ineq > 0 && !cons_.ineq))
            throw ArgumentError("ProblemFactory: declared constraints have no callback");
    }

    const ContrastFn& contrast() const { return h_; }
    bool has_user_constraints() const { return cons_.n_eq + cons_.n_ineq > 0; }

    /// h(w) + b(w) for a full-space w.
    double component_value(const Vector& w, const Matrix& X) const {
        double v = h_.evaluate(w, X).value;
        if (b_) v += (*b_)(w, X).value;
        return v;
    }

    /// Sum over the rows of Q, plus the joint hook.
    double joint_value(const Matrix& Q, const Matrix& X) const {
        double v = 0.0;
        for (Eigen::Index k = 0; k < Q.rows(); ++k) v += h_.evaluate(Q.row(k).transpose(), X).value;
        if (joint_b_) v += (*joint_b_)(Q, X).value;
        return v;
    }

    /// max_z h(Wz) + b(Wz)  s.t.  z'z = 1, user constraints on w = Wz.
    /// W is q x r with orthonormal columns; X is q x n whitened data. The
    /// contrast is evaluated on the reduced data W'X.
    nlp::NlpProblem component(const Matrix& W, const Matrix& X, const std::string& name = "component") const {
        if (W.rows() != X.rows()) throw ArgumentError("component: W and X disagree in dimension");
        struct Data {
            Matrix W, X, Xr;
        };
        auto d = std::make_shared<const Data>(Data{W, X, W.transpose() * X});
        const int r = static_cast<int>(W.cols());
        nlp::NlpProblem p;
        p.name = name;
        p.dim = r;
        p.n_eq = 1 + cons_.n_eq;
        p.n_ineq = cons_.n_ineq;
        p.lower = Vector::Constant(r, -nlp::kInf);
        p.upper = Vector::Constant(r, nlp::kInf);
        const ContrastFn h = h_;
        const auto b = b_;
        p.objective = [d, h, b](const Vector& z) {
            const ContrastValue c = h.evaluate(z, d->Xr);
            nlp::ObjectiveEval e{-c.value, -c.gradient};
            if (b) {
                const ContrastValue bv = (*b)(d->W * z, d->X);
                e.value -= bv.value;
                e.gradient -= d->W.transpose() * bv.gradient;
            }
            return e;
        };
        const ConstraintSet cs = cons_;
        p.eq_constraints = [d, cs, r](const Vector& z) {
            nlp::ConstraintEval c;
            c.values.resize(1 + cs.n_eq);
            c.jacobian.resize(1 + cs.n_eq, r);
            c.values[0] = z.squaredNorm() - 1.0;
            c.jacobian.row(0) = 2.0 * z.transpose();
            if (cs.n_eq > 0) {
                const ConstraintValue u = cs.eq(d->W * z, d->X);
                check_shape(u, cs.n_eq, d->W.rows(), "equality");
                c.values.tail(cs.n_eq) = u.values;
                c.jacobian.bottomRows(cs.n_eq) = u.jacobian * d->W;
            }
            return c;
        };
        if (cs.n_ineq > 0) {
            p.ineq_constraints = [d, cs](const Vector& z) {
                const ConstraintValue u = cs.ineq(d->W * z, d->X);
                check_shape(u, cs.n_ineq, d->W.rows(), "inequality");
                return nlp::ConstraintEval{u.values, u.jacobian * d->W};
            };
        }
        return p;
    }

    /// max sum_k h(w_k) + B(Q)  s.t.  sum_{i<=j} (w_i'w_j - delta_ij)^2 = 0
    /// over vec(Q), rows of Q stacked.
    nlp::NlpProblem joint(const Matrix& X, int q, const std::string& name = "joint") const {
        if (q < 1 || q != X.rows()) throw ArgumentError("joint: q must equal the rows of X");
        auto Xp = std::make_shared<const Matrix>(X);
        nlp::NlpProblem p;
        p.name = name;
        p.dim = q * q;
        p.n_eq = 1;
        p.lower = Vector::Constant(q * q, -nlp::kInf);
        p.upper = Vector::Constant(q * q, nlp::kInf);
        const ContrastFn h = h_;
        const auto jb = joint_b_;
        p.objective = [Xp, h, jb, q](const Vector& x) {
            const Matrix Q = unvec(x, q);
            nlp::ObjectiveEval e;
            Matrix G(q, q);
            for (int k = 0; k < q; ++k) {
                const ContrastValue c = h.evaluate(Q.row(k).transpose(), *Xp);
                e.value -= c.value;
                G.row(k) = -c.gradient.transpose();
            }
            if (jb) {
                const JointValue v = (*jb)(Q, *Xp);
                e.value -= v.value;
                G -= v.gradient;
            }
            e.gradient = vec(G);
            return e;
        };
        p.eq_constraints = [q](const Vector& x) {
            const Matrix Q = unvec(x, q);
            nlp::ConstraintEval c;
            c.values.resize(1);
            c.values[0] = single_constraint(Q);
            c.jacobian = vec(single_constraint_gradient(Q)).transpose();
            return c;
        };
        return p;
    }

    static Vector vec(const Matrix& Q) {
        Vector v(Q.size());
        for (Eigen::Index i = 0; i < Q.rows(); ++i)
            for (Eigen::Index j = 0; j < Q.cols(); ++j) v[i * Q.cols() + j] = Q(i, j);
        return v;
    }
    static Matrix unvec(const Vector& v, int q) {
        Matrix Q(q, q);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) Q(i, j) = v[i * q + j];
        return Q;
    }

    /// sum_{i<=j} (w_i'w_j - delta_ij)^2.
    static double single_constraint(const Matrix& Q) {
        const Matrix G = Q * Q.transpose() - Matrix::Identity(Q.rows(), Q.rows());
        double s = 0.0;
        for (Eigen::Index i = 0; i < G.rows(); ++i)
            for (Eigen::Index j = i; j < G.cols(); ++j) s += G(i, j) * G(i, j);
        return s;
    }
    static Matrix single_constraint_gradient(const Matrix& Q) {
        const Matrix G = Q * Q.transpose() - Matrix::Identity(Q.rows(), Q.rows());
        Matrix S = 2.0 * G;
        S.diagonal() *= 2.0;
        return S * Q;
    }

private:
    static void check_shape(const ConstraintValue& u, int m, Eigen::Index n, const char* kind) {
        if (u.values.size() != m || u.jacobian.rows() != m || u.jacobian.cols() != n)
            throw ArgumentError(std::string("user ") + kind + " constraint returned " +
                                std::to_string(u.values.size()) + " values and a " +
                                std::to_string(u.jacobian.rows()) + "x" +
                                std::to_string(u.jacobian.cols()) + " Jacobian, expected " +
                                std::to_string(m) + " and " + std::to_string(m) + "x" +
                                std::to_string(n));
    }

    ContrastFn h_;
    std::optional<ComponentHook> b_;
    ConstraintSet cons_;
    std::optional<JointHook> joint_b_;
};

}  // namespace adis
