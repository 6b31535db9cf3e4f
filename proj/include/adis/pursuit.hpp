#pragma once

// Multistage projection pursuit on whitened data:
//   stage 0  random unit seeds in the orthogonal complement of earlier components
//   stage 1  deflation, one constrained solve per component in reduced coordinates
//   stage 2  joint refinement of all rows of Q under a single orthonormality constraint

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "adis/contrast.hpp"
#include "adis/error.hpp"
#include "adis/latdim.hpp"
#include "adis/nlp/solver.hpp"
#include "adis/random.hpp"
#include "adis/whiten.hpp"

namespace adis {

struct PursuitConfig {
    int n_s = 1000;
    int R = 2;
    bool run_stage2 = true;
    bool joint_only = false;  // skip deflation: one joint solve from the best stage 0 seed
    std::uint64_t rng_seed = 0;
    int threads = 1;          // concurrent seed solves within a component
    nlp::AugLagConfig solver;
    nlp::AugLagConfig joint_solver;

    void validate() const {
        if (n_s < 1) throw ArgumentError("PursuitConfig: n_s must be >= 1");
        if (R < 1 || R > n_s) throw ArgumentError("PursuitConfig: need 1 <= R <= n_s");
        if (threads < 1) throw ArgumentError("PursuitConfig: threads must be >= 1");
        solver.validate();
        joint_solver.validate();
    }
};

/// Every seed solve for a component failed.
class ComponentFailure : public NumericalError {
public:
    ComponentFailure(const std::string& what, int component, std::vector<nlp::SolveTrace> traces)
        : NumericalError(what), component_(component), traces_(std::move(traces)) {}
    int component() const noexcept { return component_; }
    const std::vector<nlp::SolveTrace>& traces() const noexcept { return traces_; }

private:
    int component_;
    std::vector<nlp::SolveTrace> traces_;
};

/// Orthonormal basis (columns) of the complement of the rows of P, by
/// modified Gram-Schmidt with one re-orthogonalization pass, trying the
/// standard basis vectors in index order.
inline Matrix orthogonal_complement(const Matrix& P, int q) {
    const Eigen::Index k = P.rows();
    if (k > 0 && P.cols() != q) throw ArgumentError("orthogonal_complement: width mismatch");
    if (k > 0 && (P * P.transpose() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-6)
        throw NumericalError("orthogonal_complement: prior rows are not orthonormal");
    std::vector<Vector> basis;
    for (Eigen::Index i = 0; i < k; ++i) basis.push_back(P.row(i).transpose());
    const std::size_t prior = basis.size();
    for (int e = 0; e < q && static_cast<int>(basis.size()) < q; ++e) {
        Vector v = Vector::Unit(q, e);
        for (int pass = 0; pass < 2; ++pass)
            for (const Vector& b : basis) v -= b.dot(v) * b;
        const double nv = v.norm();
        if (nv > 1e-8) basis.push_back(v / nv);
    }
    if (static_cast<int>(basis.size()) != q)
        throw NumericalError("orthogonal_complement: prior rows are not linearly independent");
    Matrix W(q, q - static_cast<Eigen::Index>(prior));
    for (std::size_t j = prior; j < basis.size(); ++j) W.col(static_cast<Eigen::Index>(j - prior)) = basis[j];
    return W;
}

struct Seed {
    Vector z;
    double value = 0.0;
    int draw = 0;
};

/// n_s uniform draws on (-1, 1)^r, normalized; the R with the largest
/// objective h(Wz) (ties to the lower draw index).
inline std::vector<Seed> seed_search(const ProblemFactory& factory, const Matrix& W, const Matrix& X,
                                     int n_s, int R, Rng& rng) {
    if (R < 1 || R > n_s) throw ArgumentError("seed_search: need 1 <= R <= n_s");
    const Eigen::Index r = W.cols();
    std::vector<Seed> seeds;
    seeds.reserve(static_cast<std::size_t>(n_s));
    for (int i = 0; i < n_s; ++i) {
        Vector z(r);
        do {
            for (Eigen::Index j = 0; j < r; ++j) z[j] = rng.uniform(-1.0, 1.0);
        } while (z.norm() < 1e-12);
        z.normalize();
        seeds.push_back({z, factory.component_value(W * z, X), i});
    }
    std::stable_sort(seeds.begin(), seeds.end(),
                     [](const Seed& a, const Seed& b) { return a.value > b.value; });
    seeds.resize(static_cast<std::size_t>(R));
    return seeds;
}

struct ComponentResult {
    Vector w;  // q
    Vector z;  // reduced coordinates
    double value = 0.0;
    int best_seed = -1;
    nlp::SolveTrace trace;  // of the chosen run
    std::vector<nlp::NlpSolution> runs;
    int failed_runs = 0;
};

/// Runs fn(i) for i in [0, count) on up to `threads` threads.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    const int T = std::min(threads, count);
    for (int t = 0; t < T; ++t) {
        pool.emplace_back([&, t] {
            for (int i = t; i < count; i += T) {
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Stage 0 + stage 1 for component k (0-based) given the earlier rows `prior`.
inline ComponentResult extract_component(int k, const Matrix& prior, const Matrix& X,
                                         const ProblemFactory& factory, const PursuitConfig& cfg) {
    const int q = static_cast<int>(X.rows());
    const Matrix W = orthogonal_complement(prior, q);
    Rng rng(split_seed(cfg.rng_seed, static_cast<std::uint64_t>(k)));
    const std::vector<Seed> seeds = seed_search(factory, W, X, cfg.n_s, cfg.R, rng);
    const nlp::NlpProblem problem = factory.component(W, X, "component-" + std::to_string(k + 1));

    ComponentResult res;
    res.runs.resize(seeds.size());
    parallel_for(static_cast<int>(seeds.size()), cfg.threads,
                 [&](int i) { res.runs[i] = nlp::solve(problem, seeds[i].z, cfg.solver); });

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const nlp::NlpSolution& s = res.runs[i];
        if (!s.converged() || s.x_star.norm() == 0.0) {
            ++res.failed_runs;
            continue;
        }
        const Vector z = s.x_star.normalized();
        const Vector w = W * z;
        const double v = factory.component_value(w, X);
        if (res.best_seed < 0 || v > res.value) {
            res.best_seed = static_cast<int>(i);
            res.value = v;
            res.z = z;
            res.w = w;
        }
    }
    if (res.best_seed < 0) {
        std::vector<nlp::SolveTrace> traces;
        for (const auto& s : res.runs) traces.push_back(s.trace);
        throw ComponentFailure("component " + std::to_string(k + 1) + ": all " +
                                   std::to_string(seeds.size()) + " seed solves failed to converge",
                               k + 1, std::move(traces));
    }
    res.trace = res.runs[static_cast<std::size_t>(res.best_seed)].trace;
    return res;
}

/// Nearest orthogonal matrix U V' from the SVD.
inline Matrix polar_orthogonalize(const Matrix& Q) {
    Eigen::JacobiSVD<Matrix> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

struct JointResult {
    Matrix Q;
    nlp::NlpSolution solution;
    double objective = 0.0;
    double initial_objective = 0.0;
    bool fallback = false;  // stage 1 result kept
    std::string warning;
};

/// Stage 2 from Q_init. The solver's point is projected back onto the
/// orthogonal matrices; if that loses more than 1e-8 of the joint objective,
/// or the solve fails, Q_init is returned with a warning.
inline JointResult refine_joint(const Matrix& Q_init, const Matrix& X, const ProblemFactory& factory,
                                const nlp::AugLagConfig& solver) {
    const int q = static_cast<int>(X.rows());
    if (Q_init.rows() != q || Q_init.cols() != q) throw ArgumentError("refine_joint: Q must be q x q");
    const double orth = (Q_init * Q_init.transpose() - Matrix::Identity(q, q)).cwiseAbs().maxCoeff();
    if (orth > 1e-6) throw ArgumentError("refine_joint: Q_init is not orthonormal");

    JointResult jr;
    jr.initial_objective = factory.joint_value(Q_init, X);
    jr.solution = nlp::solve(factory.joint(X, q), ProblemFactory::vec(Q_init), solver);
    jr.Q = Q_init;
    jr.objective = jr.initial_objective;
    if (!jr.solution.converged()) {
        jr.fallback = true;
        jr.warning = "joint refinement did not converge (" +
                     std::string(nlp::to_string(jr.solution.status)) + "); stage 1 result kept";
        return jr;
    }
    const Matrix Q = polar_orthogonalize(ProblemFactory::unvec(jr.solution.x_star, q));
    const double v = factory.joint_value(Q, X);
    if (v < jr.initial_objective - 1e-8) {
        jr.fallback = true;
        jr.warning = "joint refinement lowered the objective; stage 1 result kept";
        return jr;
    }
    jr.Q = Q;
    jr.objective = v;
    return jr;
}

/// Flips rows of Q so every source has positive skewness, or a positive
/// largest-magnitude entry when the skewness vanishes.
inline void fix_signs(Matrix& Q, const Matrix& X) {
    const Matrix S = Q * X;
    for (Eigen::Index k = 0; k < S.rows(); ++k) {
        const Eigen::ArrayXd c = S.row(k).array() - S.row(k).mean();
        const double m2 = c.square().mean();
        const double m3 = c.cube().mean();
        double sign = 1.0;
        if (m2 > 0.0 && std::abs(m3) > 1e-12 * std::pow(m2, 1.5)) {
            sign = m3 > 0.0 ? 1.0 : -1.0;
        } else {
            Eigen::Index j = 0;
            S.row(k).cwiseAbs().maxCoeff(&j);
            sign = S(k, j) >= 0.0 ? 1.0 : -1.0;
        }
        if (sign < 0.0) Q.row(k) *= -1.0;
    }
}

struct PursuitResult {
    Matrix Q;         // q x q, rows w_k
    Matrix Q_stage1;  // after deflation (sign fixed the same way)
    Matrix S_hat;     // Q x_tilde
    Matrix A_full;    // p x q mixing for this Q (filled by decompose)
    std::vector<nlp::SolveTrace> component_traces;
    nlp::SolveTrace joint_trace;
    std::vector<double> stage1_objectives;
    std::vector<double> stage2_objectives;
    double stage1_joint_objective = 0.0;
    double joint_objective = 0.0;
    bool stage2_run = false;
    bool stage2_fallback = false;
    std::vector<int> failed_seed_runs;
    std::vector<std::string> warnings;

    bool converged() const {
        for (const auto& t : component_traces)
            if (t.empty() || t.back().status != "converged") return false;
        return !stage2_run || stage2_fallback || (!joint_trace.empty() && joint_trace.back().status == "converged");
    }
};

inline std::vector<double> component_objectives(const Matrix& Q, const Matrix& X, const ProblemFactory& f) {
    std::vector<double> v;
    for (Eigen::Index k = 0; k < Q.rows(); ++k) v.push_back(f.component_value(Q.row(k).transpose(), X));
    return v;
}

/// Stages 0-2 on whitened data X (q x n).
inline PursuitResult pursue(const Matrix& X, const ProblemFactory& factory, const PursuitConfig& cfg) {
    cfg.validate();
    const int q = static_cast<int>(X.rows());
    if (q < 1 || X.cols() < 2) throw ArgumentError("pursue: whitened data is empty");
    PursuitResult res;
    Matrix Q(0, q);
    if (cfg.joint_only) {
        Rng rng(split_seed(cfg.rng_seed, 0));
        const Matrix I = Matrix::Identity(q, q);
        const std::vector<Seed> s = seed_search(factory, I, X, cfg.n_s, 1, rng);
        Q.resize(q, q);
        Q.row(0) = s[0].z.transpose();
        Q.bottomRows(q - 1) = orthogonal_complement(Q.topRows(1), q).transpose();
    } else {
        for (int k = 0; k < q; ++k) {
            ComponentResult c = extract_component(k, Q, X, factory, cfg);
            Q.conservativeResize(k + 1, q);
            Q.row(k) = c.w.transpose();
            res.component_traces.push_back(std::move(c.trace));
            res.failed_seed_runs.push_back(c.failed_runs);
            if (c.failed_runs > 0)
                res.warnings.push_back("component " + std::to_string(k + 1) + ": " +
                                       std::to_string(c.failed_runs) + " seed solve(s) did not converge");
        }
    }
    fix_signs(Q, X);
    res.Q_stage1 = Q;
    res.stage1_objectives = component_objectives(Q, X, factory);
    res.stage1_joint_objective = factory.joint_value(Q, X);
    res.joint_objective = res.stage1_joint_objective;

    if (cfg.run_stage2 || cfg.joint_only) {
        res.stage2_run = true;
        JointResult jr = refine_joint(Q, X, factory, cfg.joint_solver);
        res.joint_trace = jr.solution.trace;
        res.stage2_fallback = jr.fallback;
        if (jr.fallback) {
            res.warnings.push_back(jr.warning);
            if (cfg.joint_only) throw NumericalError("joint solve failed: " + jr.warning);
        }
        Q = jr.Q;
        fix_signs(Q, X);
        res.joint_objective = factory.joint_value(Q, X);
    }
    res.stage2_objectives = component_objectives(Q, X, factory);
    res.Q = Q;
    res.S_hat = Q * X;
    return res;
}

// ---------------------------------------------------------------------------
// Full pipeline.

struct DecomposeConfig {
    PursuitConfig pursuit;
    PpcaOptions ppca;
    LatDimOptions latdim;
    std::uint64_t latdim_seed = 0;
    std::string contrast = "negentropy-logcosh";
};

struct Decomposition {
    PursuitResult pursuit;
    PpcaModel model;
    std::optional<SourceStats> stats;  // absent when p = q
    std::optional<LatDimSummary> latdim;
    std::string q_source;              // "user" or "latdim"
};

namespace detail {
template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ComponentFailure&) {
        throw;
    } catch (const ArgumentError& e) {
        throw ArgumentError(std::string(stage) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(stage) + ": " + e.what());
    }
}
}  // namespace detail

inline Decomposition decompose(const Matrix& data, std::optional<int> q, const DecomposeConfig& cfg,
                               const ProblemFactory& factory) {
    Decomposition d;
    if (q) {
        d.q_source = "user";
    } else {
        d.q_source = "latdim";
        d.latdim = detail::staged("latdim", [&] {
            const Centered c = center(data, cfg.ppca.channel_centering);
            return estimate_q(c.data, cfg.latdim_seed, cfg.latdim);
        });
        q = d.latdim->q_hat;
    }
    d.model = detail::staged("whiten", [&] { return fit_ppca(data, *q, cfg.ppca); });
    d.pursuit = detail::staged("pursuit", [&] { return pursue(d.model.x_tilde, factory, cfg.pursuit); });
    d.pursuit.A_full = d.model.mixing(d.pursuit.Q);
    if (d.model.p() > d.model.q)
        d.stats = detail::staged("stats", [&] {
            return source_stats(d.model, data, d.pursuit.S_hat, d.pursuit.Q);
        });
    return d;
}

inline Decomposition decompose(const Matrix& data, std::optional<int> q, const DecomposeConfig& cfg = {}) {
    return decompose(data, q, cfg, ProblemFactory(contrast_by_name(cfg.contrast)));
}

}  // namespace adis
