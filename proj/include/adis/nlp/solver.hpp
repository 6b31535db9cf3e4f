#pragma once

// Augmented Lagrangian / trust-region solver for
//
//     min f(x)  s.t.  c(x) = 0,  g(x) >= 0,  l <= x <= u
//
// Inequalities become equalities through slacks. The outer loop updates
// multipliers lambda and the penalty mu of
//
//     L(x, lambda, mu) = f(x) - lambda'c(x) + mu/2 ||c(x)||^2
//
// and each inner solve minimizes L over the box with a quasi-Newton model:
// projected-gradient Cauchy point, Steihaug CG on the free variables, ratio
// test and radius update.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "adis/error.hpp"
#include "adis/nlp/problem.hpp"
#include "adis/nlp/quasi_newton.hpp"
#include "adis/nlp/trace.hpp"
#include "adis/nlp/trust_region.hpp"

namespace adis::nlp {

enum class SolveStatus { Converged, MaxIterations, InnerFailure };

inline std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIterations: return "max_iterations";
        case SolveStatus::InnerFailure: return "inner_failure";
    }
    return "?";
}

struct AugLagConfig {
    double mu0 = 10.0;
    double theta_h = 10.0;
    double theta_l = 0.5;
    double eta_con_star = 1e-6;
    double eta_grad_star = 1e-6;
    int max_outer = 100;
    int j_max = 200;
    double rho_accept = 0.1;
    QnKind qn_kind = QnKind::SR1;
    int lm_memory = 10;
    bool precondition = false;
    double sr1_skip = 1e-8;
    double bfgs_floor = 1e-12;
    double mu_floor = 1e-8;      // below this the theta_l retry ladder gives up
    double delta0 = 1.0;         // initial infinity-norm radius
    double delta_min = 1e-13;    // relative radius at which an inner solve stalls

    void validate() const {
        auto fail = [](const std::string& m) { throw ArgumentError("AugLagConfig: " + m); };
        if (!(mu0 > 0)) fail("mu0 must be positive");
        if (!(theta_h > 1)) fail("theta_h must exceed 1");
        if (!(theta_l > 0 && theta_l < 1)) fail("theta_l must lie in (0,1)");
        if (!(eta_con_star > 0 && eta_grad_star > 0)) fail("tolerances must be positive");
        if (max_outer < 1 || j_max < 1) fail("iteration caps must be positive");
        if (!(rho_accept > 0 && rho_accept < 1)) fail("rho_accept must lie in (0,1)");
        if (lm_memory < 1) fail("lm_memory must be >= 1");
        if (!(mu_floor > 0 && mu_floor < mu0)) fail("mu_floor must lie in (0, mu0)");
        if (!(delta0 > 0)) fail("delta0 must be positive");
    }

    QnOptions qn_options() const { return {sr1_skip, bfgs_floor, lm_memory}; }
};

/// First-order residuals of an equality + bound problem at (x, lambda) with mu = 0.
struct KktResidual {
    double grad = 0.0;
    double feas = 0.0;
};

/// Everything the inner iteration needs at one point.
struct AugLagPoint {
    Vector x;
    double f = 0.0;
    Vector grad_f;
    Vector c;
    Matrix jac;
    double lagrangian = 0.0;
    Vector grad_l;

    bool finite() const {
        return std::isfinite(f) && grad_f.allFinite() && c.allFinite() && jac.allFinite();
    }
};

/// L(., lambda, mu) for an equality + bound problem.
class AugLagModel {
public:
    AugLagModel(const NlpProblem& problem, Vector lambda, double mu)
        : problem_(problem), lambda_(std::move(lambda)), mu_(mu) {
        if (problem_.n_ineq != 0)
            throw ArgumentError("AugLagModel: convert inequalities with add_slacks first");
        if (lambda_.size() != problem_.n_eq)
            throw ArgumentError("AugLagModel: multiplier size mismatch");
    }

    const NlpProblem& problem() const { return problem_; }
    const Vector& lambda() const { return lambda_; }
    double mu() const { return mu_; }
    void set(Vector lambda, double mu) {
        lambda_ = std::move(lambda);
        mu_ = mu;
    }

    AugLagPoint evaluate(const Vector& x) const {
        AugLagPoint p;
        p.x = x;
        ObjectiveEval f = problem_.eval_objective(x);
        p.f = f.value;
        p.grad_f = std::move(f.gradient);
        ConstraintEval c = problem_.eval_eq(x);
        p.c = std::move(c.values);
        p.jac = std::move(c.jacobian);
        refresh(p);
        return p;
    }

    /// Recompute L and its gradient after lambda or mu changed.
    void refresh(AugLagPoint& p) const {
        const Vector w = lambda_ - mu_ * p.c;
        p.lagrangian = p.f - lambda_.dot(p.c) + 0.5 * mu_ * p.c.squaredNorm();
        p.grad_l = p.grad_f - p.jac.transpose() * w;
    }

    double pg_norm(const AugLagPoint& p) const {
        return projected_gradient_norm(p.x, p.grad_l, problem_.lower, problem_.upper);
    }

    KktResidual kkt(const AugLagPoint& p) const {
        const Vector g0 = p.grad_f - p.jac.transpose() * lambda_;
        return {projected_gradient_norm(p.x, g0, problem_.lower, problem_.upper),
                p.c.size() ? p.c.lpNorm<Eigen::Infinity>() : 0.0};
    }

private:
    const NlpProblem& problem_;
    Vector lambda_;
    double mu_;
};

/// KKT residuals for an equality + bound problem:
/// (||x - P(x - grad_x L(x, lambda, 0), l, u)||_inf, ||c(x)||_inf).
inline KktResidual kkt_residual(const NlpProblem& problem, const Vector& x, const Vector& lambda) {
    if (x.size() != problem.dim || lambda.size() != problem.n_eq + problem.n_ineq)
        throw ArgumentError("kkt_residual: dimension mismatch");
    if (problem.n_ineq != 0) {
        const SlackedProblem sp = add_slacks(problem);
        return kkt_residual(sp.problem, sp.lift(x, problem), lambda);
    }
    AugLagModel model(problem, lambda, 0.0);
    return model.kkt(model.evaluate(x));
}

struct InnerState {
    double delta = 1.0;
    long iteration_counter = 0;  // global trace index
    double eta_con = 0.0;        // for the trace only
};

struct InnerResult {
    bool success = false;
    int iterations = 0;
};

/// One inner solve: iterate until ||x - P(x - grad L)||_inf <= eta_grad or
/// j_max iterations. `point` holds the current iterate in and out; only
/// accepted steps move it. The quasi-Newton model is updated on every step
/// with a finite trial point, accepted or not.
inline InnerResult inner_solve(const AugLagModel& model, AugLagPoint& point, double eta_grad,
                               int j_max, HessianApprox& B, const AugLagConfig& cfg,
                               InnerState& state, SolveTrace* trace = nullptr, int outer = 0) {
    const NlpProblem& prob = model.problem();
    const int n = prob.dim;
    const Vector& l = prob.lower;
    const Vector& u = prob.upper;
    constexpr double eps = std::numeric_limits<double>::epsilon();

    InnerResult res;
    if (!(state.delta > cfg.delta_min)) state.delta = cfg.delta0;
    for (int j = 1; j <= j_max; ++j) {
        res.iterations = j;
        const double delta = state.delta;
        Vector lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            lo[i] = std::max(l[i] - point.x[i], -delta);
            hi[i] = std::min(u[i] - point.x[i], delta);
            lo[i] = std::min(lo[i], 0.0);
            hi[i] = std::max(hi[i], 0.0);
        }
        const Vector& g = point.grad_l;

        const Vector p = trust_region_step(B, g, lo, hi, eta_grad, cfg.precondition);

        const double pred = -model_value(B, g, p);
        const double pnorm = p.lpNorm<Eigen::Infinity>();
        double rho = 0.0;
        bool qn_skipped = false;
        bool accepted = false;
        if (pnorm > 0.0) {
            Vector xt = p + point.x;
            for (int i = 0; i < n; ++i) xt[i] = std::clamp(xt[i], l[i], u[i]);
            AugLagPoint trial = model.evaluate(xt);
            if (trial.finite() && std::isfinite(trial.lagrangian)) {
                const double ared = point.lagrangian - trial.lagrangian;
                const double noise = 10.0 * eps * (1.0 + std::abs(point.lagrangian));
                if (pred <= 0.0)
                    rho = 0.0;
                else if (std::abs(ared) <= noise && pred <= noise)
                    rho = 1.0;  // both reductions are at roundoff level
                else
                    rho = ared / pred;
                const Vector s = trial.x - point.x;
                if (s.squaredNorm() > 0.0) qn_skipped = !B.update(s, trial.grad_l - g);
                accepted = rho > cfg.rho_accept;
                if (accepted) point = std::move(trial);
            } else {
                rho = -1.0;
            }
        }
        state.delta = trust_region_update(rho, pnorm, delta);

        const double pg = model.pg_norm(point);
        if (trace) {
            const KktResidual k0 = model.kkt(point);
            TraceRecord r;
            r.iteration = state.iteration_counter;
            r.outer = outer;
            r.inner = j;
            r.objective = point.f;
            r.lagrangian = point.lagrangian;
            r.pg_norm = pg;
            r.feasibility = k0.feas;
            r.multiplier_norm =
                model.lambda().size() ? model.lambda().lpNorm<Eigen::Infinity>() : 0.0;
            r.mu = model.mu();
            r.delta = delta;
            r.rho = rho;
            r.accepted = accepted;
            r.qn_skipped = qn_skipped;
            r.kkt_grad = k0.grad;
            r.kkt_feas = k0.feas;
            r.eta_grad = eta_grad;
            r.eta_con = state.eta_con;
            trace->records.push_back(std::move(r));
        }
        ++state.iteration_counter;

        if (pg <= eta_grad) {
            res.success = true;
            return res;
        }
        const double scale = std::max(1.0, point.x.lpNorm<Eigen::Infinity>());
        if (state.delta < cfg.delta_min * scale) return res;
    }
    return res;
}

struct NlpSolution {
    Vector x_star;       // original variables
    Vector x_internal;   // including slacks
    Vector lambda_star;  // equalities first, then slack-converted inequalities
    SolveStatus status = SolveStatus::MaxIterations;
    SolveTrace trace;
    double objective = 0.0;
    KktResidual kkt;  // at (x_internal, lambda_star), mu = 0
    int outer_iterations = 0;
    long inner_iterations = 0;
    double final_mu = 0.0;
    long qn_applied = 0;
    long qn_skipped = 0;

    bool converged() const { return status == SolveStatus::Converged; }
};

inline nlohmann::json summary_json(const NlpSolution& s) {
    return nlohmann::json{{"status", std::string(to_string(s.status))},
                          {"objective", s.objective},
                          {"kkt_grad", s.kkt.grad},
                          {"kkt_feas", s.kkt.feas},
                          {"outer_iterations", s.outer_iterations},
                          {"inner_iterations", s.inner_iterations},
                          {"final_mu", s.final_mu},
                          {"qn_applied", s.qn_applied},
                          {"qn_skipped", s.qn_skipped},
                          {"x_star", std::vector<double>(s.x_star.data(),
                                                         s.x_star.data() + s.x_star.size())},
                          {"lambda_star",
                           std::vector<double>(s.lambda_star.data(),
                                               s.lambda_star.data() + s.lambda_star.size())}};
}

/// Outer augmented Lagrangian loop.
inline NlpSolution solve(const NlpProblem& problem, const Vector& x0, const AugLagConfig& cfg = {}) {
    cfg.validate();
    problem.validate();
    if (x0.size() != problem.dim)
        throw ArgumentError("solve: x0 has size " + std::to_string(x0.size()) + ", expected " +
                            std::to_string(problem.dim));
    if (!x0.allFinite()) throw ArgumentError("solve: x0 must be finite");

    const SlackedProblem sp = add_slacks(problem);
    const NlpProblem& prob = sp.problem;
    const Vector z0 = project_box(sp.lift(project_box(x0, problem.lower, problem.upper), problem),
                                  prob.lower, prob.upper);

    NlpSolution sol;
    double mu = cfg.mu0;
    double eta_con = std::pow(mu, -0.1);
    double eta_grad = 1.0 / mu;
    AugLagModel model(prob, Vector::Zero(prob.n_eq), mu);
    AugLagPoint point = model.evaluate(z0);
    if (!point.finite()) throw ArgumentError("solve: problem is not finite at x0");

    const double gamma = std::max(1.0, point.grad_f.lpNorm<Eigen::Infinity>());
    auto B = make_hessian(cfg.qn_kind, prob.dim, gamma, cfg.qn_options());
    InnerState state;
    state.delta = cfg.delta0;

    auto finish = [&](SolveStatus status) {
        sol.status = status;
        sol.x_internal = point.x;
        sol.x_star = sp.original_x(point.x);
        sol.lambda_star = model.lambda();
        sol.objective = point.f;
        sol.kkt = model.kkt(point);
        sol.inner_iterations = state.iteration_counter;
        sol.final_mu = model.mu();
        sol.qn_applied = B->applied();
        sol.qn_skipped = B->skipped();
        if (!sol.trace.empty()) sol.trace.records.back().status = std::string(to_string(status));
        return sol;
    };

    for (int k = 0; k < cfg.max_outer; ++k) {
        sol.outer_iterations = k + 1;
        for (;;) {
            state.eta_con = eta_con;
            const InnerResult r =
                inner_solve(model, point, eta_grad, cfg.j_max, *B, cfg, state, &sol.trace, k);
            if (r.success) break;
            mu *= cfg.theta_l;
            if (mu < cfg.mu_floor) return finish(SolveStatus::InnerFailure);
            eta_con = std::pow(mu, -0.1);
            eta_grad = 1.0 / mu;
            model.set(model.lambda(), mu);
            model.refresh(point);
        }

        const double feas = point.c.size() ? point.c.lpNorm<Eigen::Infinity>() : 0.0;
        if (feas <= eta_con) {
            const KktResidual k0 = model.kkt(point);
            if (feas <= cfg.eta_con_star && k0.grad <= cfg.eta_grad_star)
                return finish(SolveStatus::Converged);
            model.set(model.lambda() - mu * point.c, mu);
            eta_con /= std::pow(mu, 0.9);
            eta_grad /= mu;
        } else {
            mu *= cfg.theta_h;
            eta_con = std::pow(mu, -0.1);
            eta_grad = 1.0 / mu;
            model.set(model.lambda(), mu);
        }
        model.refresh(point);
    }
    return finish(SolveStatus::MaxIterations);
}

}  // namespace adis::nlp
