#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <memory>

#include <Eigen/Dense>

#include "adis/error.hpp"

namespace adis::nlp {

/// Anything that behaves like a symmetric n x n matrix.
template <typename Op>
concept SymmetricOperator = requires(const Op& op, const Eigen::VectorXd& v, int i) {
    { op.dim() } -> std::convertible_to<int>;
    { op.apply(v) } -> std::convertible_to<Eigen::VectorXd>;
    { op.column(i) } -> std::convertible_to<Eigen::VectorXd>;
};

class DenseOperator {
public:
    explicit DenseOperator(Eigen::MatrixXd m) : m_(std::move(m)) {}
    int dim() const { return static_cast<int>(m_.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return m_ * v; }
    Eigen::VectorXd column(int i) const { return m_.col(i); }
    const Eigen::MatrixXd& matrix() const { return m_; }

private:
    Eigen::MatrixXd m_;
};

/// Q' B Q for the unit-vector selector Q built from `free` indices.
template <SymmetricOperator Op>
class ReducedOperator {
public:
    ReducedOperator(const Op& full, std::vector<int> free) : full_(full), free_(std::move(free)) {}
    int dim() const { return static_cast<int>(free_.size()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(full_.dim());
        for (int k = 0; k < dim(); ++k) x[free_[k]] = v[k];
        return restrict(full_.apply(x));
    }
    Eigen::VectorXd column(int k) const { return restrict(full_.column(free_[k])); }
    Eigen::VectorXd restrict(const Eigen::VectorXd& x) const {
        Eigen::VectorXd r(dim());
        for (int k = 0; k < dim(); ++k) r[k] = x[free_[k]];
        return r;
    }
    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m(dim(), dim());
        for (int k = 0; k < dim(); ++k) m.col(k) = column(k);
        return m;
    }
    const std::vector<int>& free() const { return free_; }

private:
    const Op& full_;
    std::vector<int> free_;
};

/// Radius update on the ratio of actual to predicted reduction.
/// Expand, hold and shrink are mutually exclusive.
inline double trust_region_update(double rho, double step_inf_norm, double delta) {
    if (!(delta > 0.0)) throw ArgumentError("trust_region_update: delta must be positive");
    if (rho > 0.75) return step_inf_norm > 0.8 * delta ? 2.0 * delta : delta;
    if (rho >= 0.1) return delta;
    return 0.5 * delta;
}

inline double trust_region_update(double rho, const Eigen::VectorXd& step, double delta) {
    return trust_region_update(rho, step.lpNorm<Eigen::Infinity>(), delta);
}

/// Value of 0.5 p'Bp + g'p.
template <SymmetricOperator Op>
double model_value(const Op& B, const Eigen::VectorXd& g, const Eigen::VectorXd& p) {
    return 0.5 * p.dot(B.apply(p)) + g.dot(p);
}

struct CauchyPoint {
    Eigen::VectorXd step;
    std::vector<bool> at_bound;  // variables fixed on a face of [lo, hi]
    int segments = 0;
};

/// First local minimizer of the quadratic model along the projected
/// steepest-descent path P(-t g, lo, hi), t >= 0. Requires lo <= 0 <= hi.
template <SymmetricOperator Op>
CauchyPoint cauchy_point(const Op& B, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
    const int n = B.dim();
    if (g.size() != n || lo.size() != n || hi.size() != n)
        throw ArgumentError("cauchy_point: dimension mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();

    CauchyPoint cp;
    cp.step = Eigen::VectorXd::Zero(n);
    cp.at_bound.assign(n, false);

    Eigen::VectorXd d = -g;
    std::vector<double> t(n, inf);
    std::vector<int> order;
    order.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (g[i] < 0.0)
            t[i] = hi[i] / -g[i];
        else if (g[i] > 0.0)
            t[i] = lo[i] / -g[i];
        if (t[i] <= 0.0) {
            d[i] = 0.0;
            cp.at_bound[i] = (g[i] != 0.0);
            cp.step[i] = g[i] < 0.0 ? hi[i] : (g[i] > 0.0 ? lo[i] : 0.0);
        } else if (t[i] < inf) {
            order.push_back(i);
        }
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return t[a] < t[b] || (t[a] == t[b] && a < b);
    });

    Eigen::VectorXd Bd = B.apply(d);
    Eigen::VectorXd Bp = B.apply(cp.step);
    double t_prev = 0.0;
    std::size_t next = 0;
    for (;;) {
        if (d.squaredNorm() == 0.0) break;
        const double t_next = next < order.size() ? t[order[next]] : inf;
        const double seg = t_next - t_prev;
        const double f1 = g.dot(d) + Bp.dot(d);
        const double f2 = d.dot(Bd);
        ++cp.segments;
        if (f1 >= 0.0) break;
        if (f2 > 0.0) {
            const double tau = -f1 / f2;
            if (tau < seg) {
                cp.step += tau * d;
                break;
            }
        }
        if (t_next == inf) throw NumericalError("cauchy_point: model unbounded along path");
        cp.step += seg * d;
        Bp += seg * Bd;
        while (next < order.size() && t[order[next]] == t_next) {
            const int b = order[next++];
            const double db = d[b];
            const double target = db > 0.0 ? hi[b] : lo[b];
            Bp += (target - cp.step[b]) * B.column(b);
            cp.step[b] = target;
            cp.at_bound[b] = true;
            Bd -= db * B.column(b);
            d[b] = 0.0;
        }
        t_prev = t_next;
    }
    for (int i = 0; i < n; ++i) cp.step[i] = std::clamp(cp.step[i], lo[i], hi[i]);
    return cp;
}

/// Shifted Cholesky factor of a reduced model matrix, used as a CG
/// preconditioner: B + tau I = L L' with the smallest tau on a doubling ladder.
class ModifiedCholesky {
public:
    explicit ModifiedCholesky(const Eigen::MatrixXd& B) {
        const Eigen::Index n = B.rows();
        const double scale = n > 0 ? std::max(1e-8, B.diagonal().cwiseAbs().maxCoeff()) : 1.0;
        const double min_diag = n > 0 ? B.diagonal().minCoeff() : 0.0;
        shift_ = min_diag > 0.0 ? 0.0 : -min_diag + 1e-3 * scale;
        for (int attempt = 0; attempt < 60; ++attempt) {
            llt_.compute(B + shift_ * Eigen::MatrixXd::Identity(n, n));
            if (llt_.info() == Eigen::Success) return;
            shift_ = std::max(2.0 * shift_, 1e-3 * scale);
        }
        throw NumericalError("ModifiedCholesky: factorization failed");
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return llt_.solve(r); }
    double shift() const { return shift_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double shift_ = 0.0;
};

enum class CgExit { Converged, NegativeCurvature, HitBoundary, MaxIterations, ZeroGradient };

struct CgResult {
    Eigen::VectorXd step;
    CgExit exit = CgExit::Converged;
    int iterations = 0;
};

/// Truncated (Steihaug) CG for min 0.5 v'Bv + g'v over the box lo <= v <= hi
/// (lo <= 0 <= hi). Stops on ||r|| <= tol ||g||, on negative curvature
/// (moving to the box face along the current direction), or when the next
/// CG step would leave the box.
template <SymmetricOperator Op>
CgResult steihaug_cg(const Op& B, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, double tol, int max_iter = -1,
                     const ModifiedCholesky* precond = nullptr) {
    const int n = B.dim();
    if (g.size() != n || lo.size() != n || hi.size() != n)
        throw ArgumentError("steihaug_cg: dimension mismatch");
    if (max_iter < 0) max_iter = 2 * n + 10;
    CgResult res;
    res.step = Eigen::VectorXd::Zero(n);
    const double gnorm = g.norm();
    if (n == 0 || gnorm == 0.0) {
        res.exit = CgExit::ZeroGradient;
        return res;
    }
    auto box_limit = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& d) {
        double a = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (d[i] > 0.0)
                a = std::min(a, (hi[i] - v[i]) / d[i]);
            else if (d[i] < 0.0)
                a = std::min(a, (lo[i] - v[i]) / d[i]);
        }
        return std::max(a, 0.0);
    };
    auto clamp_into_box = [&](Eigen::VectorXd& v) {
        for (int i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    };

    Eigen::VectorXd& v = res.step;
    Eigen::VectorXd r = g;
    Eigen::VectorXd z = precond ? precond->solve(r) : r;
    Eigen::VectorXd d = -z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        const Eigen::VectorXd Bd = B.apply(d);
        const double curv = d.dot(Bd);
        const double a_box = box_limit(v, d);
        if (curv <= 0.0) {
            if (!std::isfinite(a_box))
                throw NumericalError("steihaug_cg: negative curvature in an unbounded box");
            v += a_box * d;
            clamp_into_box(v);
            res.exit = CgExit::NegativeCurvature;
            return res;
        }
        const double alpha = rz / curv;
        if (alpha >= a_box) {
            v += a_box * d;
            clamp_into_box(v);
            res.exit = CgExit::HitBoundary;
            return res;
        }
        v += alpha * d;
        r += alpha * Bd;
        if (r.norm() <= tol * gnorm) {
            res.exit = CgExit::Converged;
            return res;
        }
        z = precond ? precond->solve(r) : r;
        const double rz_new = r.dot(z);
        d = -z + (rz_new / rz) * d;
        rz = rz_new;
    }
    res.exit = CgExit::MaxIterations;
    return res;
}

/// Steihaug CG inside the infinity-norm trust region ||v||_inf <= delta.
template <SymmetricOperator Op>
CgResult steihaug_cg(const Op& B, const Eigen::VectorXd& g, double delta, double tol) {
    if (!(delta > 0.0)) throw ArgumentError("steihaug_cg: delta must be positive");
    const Eigen::VectorXd box = Eigen::VectorXd::Constant(B.dim(), delta);
    return steihaug_cg(B, g, Eigen::VectorXd(-box), box, tol);
}

/// Cauchy point, then Steihaug CG on the variables it leaves free, started
/// from the Cauchy step. The CG forcing tolerance is
/// min(0.1, sqrt(||g_r||), eta_grad / ||g_r||) on the reduced gradient.
template <SymmetricOperator Op>
Eigen::VectorXd trust_region_step(const Op& B, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, double eta_grad, bool precondition = false) {
    const int n = B.dim();
    const CauchyPoint cp = cauchy_point(B, g, lo, hi);
    Eigen::VectorXd p = cp.step;
    std::vector<int> free;
    free.reserve(n);
    for (int i = 0; i < n; ++i)
        if (!cp.at_bound[i]) free.push_back(i);
    if (!free.empty()) {
        ReducedOperator<Op> Br(B, free);
        const Eigen::VectorXd gr = Br.restrict(g + B.apply(cp.step));
        Eigen::VectorXd lo_r(Br.dim()), hi_r(Br.dim());
        for (int k = 0; k < Br.dim(); ++k) {
            lo_r[k] = std::min(lo[free[k]] - cp.step[free[k]], 0.0);
            hi_r[k] = std::max(hi[free[k]] - cp.step[free[k]], 0.0);
        }
        const double gnorm = gr.norm();
        if (gnorm > 0.0) {
            const double tol = std::min({0.1, std::sqrt(gnorm), eta_grad / gnorm});
            std::unique_ptr<ModifiedCholesky> pre;
            if (precondition) pre = std::make_unique<ModifiedCholesky>(Br.dense());
            const CgResult cg = steihaug_cg(Br, gr, lo_r, hi_r, tol, -1, pre.get());
            for (int k = 0; k < Br.dim(); ++k) p[free[k]] += cg.step[k];
        }
    }
    for (int i = 0; i < n; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
    return p;
}

}  // namespace adis::nlp
