#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "adis/error.hpp"

namespace adis::nlp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ObjectiveEval {
    double value = 0.0;
    Vector gradient;
};

/// Constraint values and their m x n Jacobian.
struct ConstraintEval {
    Vector values;
    Matrix jacobian;
};

using ObjectiveFn = std::function<ObjectiveEval(const Vector&)>;
using ConstraintFn = std::function<ConstraintEval(const Vector&)>;

/// min f(x)  s.t.  c(x) = 0,  g(x) >= 0,  lower <= x <= upper.
///
/// Callbacks must be re-entrant: the benchmark harness evaluates distinct
/// problem instances from several threads at once.
struct NlpProblem {
    std::string name;
    int dim = 0;
    int n_eq = 0;
    int n_ineq = 0;
    ObjectiveFn objective;
    ConstraintFn eq_constraints;    // may be empty when n_eq == 0
    ConstraintFn ineq_constraints;  // may be empty when n_ineq == 0
    Vector lower;
    Vector upper;

    /// Unbounded problem of dimension n with no constraints.
    static NlpProblem unconstrained(std::string name, int n, ObjectiveFn f) {
        NlpProblem p;
        p.name = std::move(name);
        p.dim = n;
        p.objective = std::move(f);
        p.lower = Vector::Constant(n, -kInf);
        p.upper = Vector::Constant(n, kInf);
        return p;
    }

    void validate() const {
        if (dim <= 0) throw ArgumentError("NlpProblem '" + name + "': dimension must be positive");
        if (lower.size() != dim || upper.size() != dim)
            throw ArgumentError("NlpProblem '" + name + "': bounds must have dimension " +
                                std::to_string(dim));
        for (int i = 0; i < dim; ++i) {
            if (!(lower[i] <= upper[i]))
                throw ArgumentError("NlpProblem '" + name + "': lower > upper at index " +
                                    std::to_string(i));
        }
        if (!objective) throw ArgumentError("NlpProblem '" + name + "': missing objective");
        if (n_eq > 0 && !eq_constraints)
            throw ArgumentError("NlpProblem '" + name + "': missing equality callback");
        if (n_ineq > 0 && !ineq_constraints)
            throw ArgumentError("NlpProblem '" + name + "': missing inequality callback");
    }

    ObjectiveEval eval_objective(const Vector& x) const {
        ObjectiveEval e = objective(x);
        if (e.gradient.size() != dim)
            throw ArgumentError("NlpProblem '" + name + "': objective gradient has size " +
                                std::to_string(e.gradient.size()) + ", expected " +
                                std::to_string(dim));
        return e;
    }

    ConstraintEval eval_eq(const Vector& x) const {
        if (n_eq == 0) return {Vector(0), Matrix(0, dim)};
        return checked(eq_constraints(x), n_eq, "equality");
    }

    ConstraintEval eval_ineq(const Vector& x) const {
        if (n_ineq == 0) return {Vector(0), Matrix(0, dim)};
        return checked(ineq_constraints(x), n_ineq, "inequality");
    }

private:
    ConstraintEval checked(ConstraintEval e, int m, const char* kind) const {
        if (e.values.size() != m || e.jacobian.rows() != m || e.jacobian.cols() != dim)
            throw ArgumentError("NlpProblem '" + name + "': " + kind + " constraints returned " +
                                std::to_string(e.values.size()) + " values and a " +
                                std::to_string(e.jacobian.rows()) + "x" +
                                std::to_string(e.jacobian.cols()) + " Jacobian, declared " +
                                std::to_string(m) + " x " + std::to_string(dim));
        return e;
    }
};

/// Componentwise clamp of z into [l, u].
inline Vector project_box(const Vector& z, const Vector& l, const Vector& u) {
    if (z.size() != l.size() || z.size() != u.size())
        throw ArgumentError("project_box: dimension mismatch (" + std::to_string(z.size()) + ", " +
                            std::to_string(l.size()) + ", " + std::to_string(u.size()) + ")");
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = std::clamp(z[i], l[i], u[i]);
    return r;
}

/// ||x - P(x - g, l, u)||_inf, the first-order measure for bound constraints.
inline double projected_gradient_norm(const Vector& x, const Vector& g, const Vector& l,
                                      const Vector& u) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        r = std::max(r, std::abs(x[i] - std::clamp(x[i] - g[i], l[i], u[i])));
    return r;
}

/// Inequalities rewritten as g(x) - s = 0 with s >= 0 appended to x.
struct SlackedProblem {
    NlpProblem problem;
    int original_dim = 0;
    int n_eq_original = 0;
    int n_slack = 0;

    Vector lift(const Vector& x, const NlpProblem& original) const {
        Vector z(original_dim + n_slack);
        z.head(original_dim) = x;
        if (n_slack > 0) z.tail(n_slack) = original.eval_ineq(x).values.cwiseMax(0.0);
        return z;
    }
    Vector original_x(const Vector& z) const { return z.head(original_dim); }
};

inline SlackedProblem add_slacks(const NlpProblem& problem) {
    problem.validate();
    SlackedProblem out;
    out.original_dim = problem.dim;
    out.n_eq_original = problem.n_eq;
    out.n_slack = problem.n_ineq;
    if (problem.n_ineq == 0) {
        out.problem = problem;
        return out;
    }
    const int n = problem.dim;
    const int m = problem.n_eq;
    const int L = problem.n_ineq;
    auto base = std::make_shared<NlpProblem>(problem);

    NlpProblem& p = out.problem;
    p.name = problem.name;
    p.dim = n + L;
    p.n_eq = m + L;
    p.n_ineq = 0;
    p.lower.resize(n + L);
    p.upper.resize(n + L);
    p.lower.head(n) = problem.lower;
    p.upper.head(n) = problem.upper;
    p.lower.tail(L).setZero();
    p.upper.tail(L).setConstant(kInf);
    p.objective = [base, n, L](const Vector& z) {
        ObjectiveEval e = base->eval_objective(z.head(n));
        ObjectiveEval r;
        r.value = e.value;
        r.gradient = Vector::Zero(n + L);
        r.gradient.head(n) = e.gradient;
        return r;
    };
    p.eq_constraints = [base, n, m, L](const Vector& z) {
        const Vector x = z.head(n);
        ConstraintEval r;
        r.values.resize(m + L);
        r.jacobian = Matrix::Zero(m + L, n + L);
        if (m > 0) {
            ConstraintEval c = base->eval_eq(x);
            r.values.head(m) = c.values;
            r.jacobian.topLeftCorner(m, n) = c.jacobian;
        }
        ConstraintEval g = base->eval_ineq(x);
        r.values.tail(L) = g.values - z.tail(L);
        r.jacobian.bottomLeftCorner(L, n) = g.jacobian;
        r.jacobian.bottomRightCorner(L, L) = -Matrix::Identity(L, L);
        return r;
    };
    return out;
}

struct GradientAudit {
    double objective_error = 0.0;
    double eq_error = 0.0;
    double ineq_error = 0.0;
    double max_error() const { return std::max({objective_error, eq_error, ineq_error}); }
};

/// Compares analytic derivatives against central differences with
/// h_i = h_rel * (1 + |x_i|). Errors are ||analytic - fd||_inf / max(1, ||fd||_inf),
/// taken per row for constraint Jacobians.
inline GradientAudit audit_gradients(const NlpProblem& problem, const Vector& x,
                                     double h_rel = 1e-6) {
    const int n = problem.dim;
    auto rel = [](const Vector& a, const Vector& b) {
        return (a - b).lpNorm<Eigen::Infinity>() / std::max(1.0, b.lpNorm<Eigen::Infinity>());
    };
    GradientAudit audit;
    const ObjectiveEval f0 = problem.eval_objective(x);
    const ConstraintEval c0 = problem.eval_eq(x);
    const ConstraintEval g0 = problem.eval_ineq(x);
    Vector fd(n);
    Matrix fd_c(problem.n_eq, n);
    Matrix fd_g(problem.n_ineq, n);
    for (int i = 0; i < n; ++i) {
        const double h = h_rel * (1.0 + std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (problem.eval_objective(xp).value - problem.eval_objective(xm).value) / (2 * h);
        if (problem.n_eq > 0)
            fd_c.col(i) = (problem.eval_eq(xp).values - problem.eval_eq(xm).values) / (2 * h);
        if (problem.n_ineq > 0)
            fd_g.col(i) = (problem.eval_ineq(xp).values - problem.eval_ineq(xm).values) / (2 * h);
    }
    audit.objective_error = rel(f0.gradient, fd);
    for (int r = 0; r < problem.n_eq; ++r)
        audit.eq_error = std::max(audit.eq_error,
                                  rel(c0.jacobian.row(r).transpose(), fd_c.row(r).transpose()));
    for (int r = 0; r < problem.n_ineq; ++r)
        audit.ineq_error = std::max(audit.ineq_error,
                                    rel(g0.jacobian.row(r).transpose(), fd_g.row(r).transpose()));
    return audit;
}

}  // namespace adis::nlp
