// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "adis/adis.hpp"
#include "adis/bench/montecarlo.hpp"
#include "adis/bench/problems.hpp"

using namespace adis;
using namespace adis::bench;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(const std::string& id, bool ok, const std::string& detail) {
    std::printf("%s  %-4s %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failed;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int cores() { return std::max(1u, std::thread::hardware_concurrency()); }

// Lawson-Hanson active-set NNLS, independent of the augmented Lagrangian solver.
Vector lawson_hanson(const Matrix& A, const Vector& b) {
    const int n = static_cast<int>(A.cols());
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(n, false);
    for (int outer = 0; outer < 3 * n; ++outer) {
        const Vector w = A.transpose() * (b - A * x);
        int best = -1;
        for (int j = 0; j < n; ++j)
            if (!passive[j] && w[j] > 1e-10 && (best < 0 || w[j] > w[best])) best = j;
        if (best < 0) break;
        passive[best] = true;
        for (;;) {
            std::vector<int> idx;
            for (int j = 0; j < n; ++j)
                if (passive[j]) idx.push_back(j);
            Matrix Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
            const Vector zp = Ap.colPivHouseholderQr().solve(b);
            Vector z = Vector::Zero(n);
            for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
            if (zp.minCoeff() > 0) {
                x = z;
                break;
            }
            double alpha = 1.0;
            for (int j : idx)
                if (z[j] <= 0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
            x += alpha * (z - x);
            for (int j : idx)
                if (x[j] <= 1e-14) {
                    x[j] = 0;
                    passive[j] = false;
                }
        }
    }
    return x;
}

void electron() {
    const auto t0 = Clock::now();
    const auto s = nlp::solve(electron_problem(50), electron_start(50, 1));
    const double secs = since(t0);
    const double rel = std::abs(s.objective - 1055.1823) / 1055.1823;
    const bool ok = s.converged() && rel <= 1e-3 && s.kkt.grad <= 1e-6 && s.kkt.feas <= 1e-6 && secs <= 60 &&
                    s.outer_iterations <= 40;
    report("1", ok,
           fmt("electron n_p=50: f=%.6f rel %.2e, kkt grad %.1e feas %.1e, outer %d, %.2fs", s.objective, rel,
               s.kkt.grad, s.kkt.feas, s.outer_iterations, secs));
}

void polygon() {
    const auto t0 = Clock::now();
    double best = -1, feas = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = nlp::solve(polygon_problem(6), polygon_start(6, seed));
        const double area = polygon_area(s.x_star);
        if (s.converged() && area > best) {
            best = area;
            feas = std::max(0.0, polygon_max_sq_distance(s.x_star) - 1.0);
            feas = std::max(feas, s.kkt.feas);
        }
    }
    const double secs = since(t0);
    report("2", std::abs(best - 0.675) <= 1e-3 && feas <= 1e-6 && secs <= 60,
           fmt("polygon n_v=6 best of 5: area %.7f, feasibility %.1e, %.2fs", best, feas, secs));
}

void nnls() {
    double worst = 0;
    int unconverged = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const NnlsInstance in = random_nnls(40, 20, seed);
        const auto s = nlp::solve(nnls_problem(in.A, in.b, in.C, in.d), Vector::Zero(in.A.cols()));
        if (!s.converged()) ++unconverged;
        const Vector ref = lawson_hanson(in.A, in.b);
        const double f_ref = (in.A * ref - in.b).squaredNorm();
        worst = std::max(worst, std::abs(s.objective - f_ref) / std::max(1.0, std::abs(f_ref)));
    }
    report("3", worst <= 1e-6 && unconverged == 0,
           fmt("nnls 20 x (40x20) vs active-set oracle: worst rel %.1e, unconverged %d", worst, unconverged));
}

double latdim_total = 0;

void latdim_grid() {
    const auto t0 = Clock::now();
    LatGridConfig cfg;
    cfg.ratios = {1.0, 1.5, 2.0};
    cfg.q_fractions = {0.1, 0.3, 0.5};
    cfg.p = 50;
    cfg.n = 1000;
    cfg.reps = 20;
    cfg.master_seed = 2024;
    cfg.threads = cores();
    const auto cells = latdim_validation(cfg);
    double worst = 0;
    std::string where;
    for (const auto& c : cells)
        if (std::abs(c.mean_bias) >= worst) {
            worst = std::abs(c.mean_bias);
            where = fmt("%s ratio %.2f q %d", std::string(to_string(c.family)).c_str(), c.ratio, c.q);
        }
    latdim_total += since(t0);
    report("4a", worst <= 1.0,
           fmt("latdim reduced grid (%zu cells x 20): max |mean bias| %.2f at %s, %.1fs", cells.size(), worst,
               where.c_str(), since(t0)));
}

void latdim_low_snr() {
    const auto t0 = Clock::now();
    std::vector<int> q_hat(20);
    parallel_for(20, cores(), [&](int r) {
        q_hat[static_cast<std::size_t>(r)] =
            latdim_replicate(SourceFamily::Gaussian, 100, 35, 1000, 0.75, split_seed(35, static_cast<std::uint64_t>(r)));
    });
    const int hits = static_cast<int>(std::count(q_hat.begin(), q_hat.end(), 35));
    const auto [lo, hi] = std::minmax_element(q_hat.begin(), q_hat.end());
    latdim_total += since(t0);
    report("4b", hits >= 15,
           fmt("latdim Gaussian q=35 p=100 ratio 0.75: q_hat = 35 in %d/20 (range %d..%d), %.1fs", hits, *lo, *hi,
               since(t0)));
    report("4c", latdim_total <= 600, fmt("latdim runtime %.1fs (limit 600s)", latdim_total));
}

void separation() {
    const auto t0 = Clock::now();
    McConfig cfg;
    cfg.n_b = 20;
    cfg.master_seed = 1;
    cfg.threads = cores();
    cfg.pursuit.solver.eta_grad_star = 1e-8;
    const McReport rep = monte_carlo_bss(synth5(2000, 1), cfg);
    int joint_bad = 0, sir_bad = 0, fallbacks = 0;
    for (const McRun& r : rep.runs) {
        if (!r.ok) continue;
        if (r.joint_final < r.joint_stage1) ++joint_bad;
        if (r.sir_mean < r.sir_mean_stage1 - 0.1) ++sir_bad;
        if (r.stage2_fallback) ++fallbacks;
    }
    const bool ok = rep.failures == 0 && rep.median >= 15 && rep.S <= 2 && joint_bad == 0 && sir_bad == 0;
    report("5", ok,
           fmt("synth5 n=2000 n_b=20 (component eta_grad 1e-8): median %.2f dB, S %.2f dB, M %.2f dB; "
               "joint<stage1 %d, sir<stage1-0.1 %d, failed runs %d, stage-2 fallbacks %d, %.1fs",
               rep.median, rep.S, rep.M, joint_bad, sir_bad, rep.failures, fallbacks, since(t0)));
}

// --- property suites ---------------------------------------------------------

void prop_gradients() {
    Rng rng(61);
    double worst = 0;
    const ProblemFactory f(negentropy_logcosh());
    for (int t = 0; t < 5; ++t) {
        const Matrix X = rng.normal_matrix(4, 300);
        const Matrix W = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(4, 4)).householderQ() *
                         Matrix::Identity(4, 3);
        worst = std::max(worst, nlp::audit_gradients(f.component(W, X), rng.normal_matrix(3, 1)).max_error());
        worst = std::max(worst, nlp::audit_gradients(f.joint(X, 4), rng.normal_matrix(16, 1)).max_error());
        worst = std::max(worst, nlp::audit_gradients(electron_problem(6), electron_start(6, 10 + t), 1e-6).max_error());
        worst = std::max(worst, nlp::audit_gradients(polygon_problem(6), polygon_start(6, 20 + t)).max_error());
        const NnlsInstance in = random_nnls(12, 6, 30 + t);
        worst = std::max(worst, nlp::audit_gradients(nnls_problem(in.A, in.b, in.C, in.d),
                                                     rng.uniform_matrix(6, 1, 0.1, 2.0)).max_error());
    }
    report("6a", worst <= 1e-5, fmt("finite-difference gradient audits: worst rel error %.1e", worst));
}

void prop_sir() {
    Rng rng(62);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const int q = 2 + t % 5;
        const Matrix S = rng.normal_matrix(q, 400);
        const Matrix basis = span_basis(S);
        const Vector s_hat = Vector(rng.normal_matrix(400, 1)) + S.transpose() * Vector(rng.normal_matrix(q, 1));
        const SirParts p = sir_parts(basis, S.row(t % q).transpose(), s_hat);
        const Vector resid = s_hat - p.target - p.interf;
        const double scale = s_hat.squaredNorm();
        worst = std::max({worst, std::abs(p.target.dot(p.interf)) / scale,
                          std::abs(scale - p.target.squaredNorm() - p.interf.squaredNorm() - resid.squaredNorm()) / scale,
                          (basis.transpose() * resid).norm() / std::sqrt(scale)});
    }
    report("6b", worst <= 1e-10, fmt("SIR orthogonal decomposition identity: worst %.1e", worst));
}

void prop_whitening() {
    Rng rng(63);
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        const int q = 2 + t % 4;
        const Matrix X = rng.normal_matrix(10, q) * rng.normal_matrix(q, 3000);
        const PpcaModel m = fit_ppca(X, q);
        worst = std::max(worst, (covariance(m.x_tilde) - Matrix::Identity(q, q)).cwiseAbs().maxCoeff());
    }
    report("6c", worst <= 1e-8, fmt("whitened covariance = I (noiseless rank-q data): worst %.1e", worst));
}

void prop_orthonormality() {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Matrix S = synth5(1500, 70 + seed);
        PpcaOptions opt;
        opt.channel_centering = false;
        opt.allow_empty_tail = true;
        const PpcaModel m = fit_ppca(gen_mixing({MixingFamily::UniformRandom, 5, 80 + seed}) * S, 5, opt);
        PursuitConfig cfg;
        cfg.n_s = 300;
        cfg.rng_seed = seed;
        const PursuitResult r = pursue(m.x_tilde, ProblemFactory(negentropy_logcosh()), cfg);
        worst = std::max(worst, (r.Q * r.Q.transpose() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff());
    }
    report("6d", worst <= 1e-6, fmt("Q orthonormality after stage 2: worst %.1e", worst));
}

void prop_secant() {
    Rng rng(64);
    double worst = 0;
    long applied = 0;
    for (nlp::QnKind kind : {nlp::QnKind::SR1, nlp::QnKind::BFGS, nlp::QnKind::LSR1, nlp::QnKind::LBFGS}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 4 + trial;
            const Matrix G = rng.normal_matrix(n, n);
            const Matrix H = G * G.transpose() + Matrix::Identity(n, n);
            auto B = nlp::make_hessian(kind, n, 1.0, nlp::QnOptions{});
            for (int k = 0; k < 20; ++k) {
                const Vector s = rng.normal_matrix(n, 1);
                const Vector y = H * s + 0.1 * Vector(rng.normal_matrix(n, 1));
                if (B->update(s, y)) {
                    ++applied;
                    worst = std::max(worst, (B->apply(s) - y).norm() / (1.0 + y.norm()));
                }
            }
        }
    }
    report("6e", worst <= 1e-10 && applied > 0,
           fmt("quasi-Newton secant residual on %ld applied updates: worst %.1e", applied, worst));
}

void prop_steihaug() {
    Rng rng(65);
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + static_cast<int>(rng.below(9));
        const Matrix A = rng.normal_matrix(n, n);
        const Matrix B = 0.5 * (A + A.transpose());
        const Vector g = rng.normal_matrix(n, 1);
        const double delta = rng.uniform(0.05, 3.0);
        const nlp::DenseOperator op(B);
        const nlp::CgResult cg = nlp::steihaug_cg(op, g, delta, 1e-10);
        const Vector lo = Vector::Constant(n, -delta), hi = Vector::Constant(n, delta);
        const Vector p = nlp::trust_region_step(op, g, lo, hi, 1e-8);
        const double mc = nlp::model_value(op, g, nlp::cauchy_point(op, g, lo, hi).step);
        if (cg.step.lpNorm<Eigen::Infinity>() > delta * (1 + 1e-14)) ++bad;
        if (nlp::model_value(op, g, cg.step) > 1e-14) ++bad;
        if (p.lpNorm<Eigen::Infinity>() > delta * (1 + 1e-14)) ++bad;
        if (mc > 0 || nlp::model_value(op, g, p) > mc + 1e-12 * (1 + std::abs(mc))) ++bad;
    }
    report("6f", bad == 0, fmt("Steihaug boundary and model decrease on 100 random (B, g, delta): %d violations", bad));
}

void prop_reproducibility() {
    const NoisyMixture mx = noisy_mixture(SourceFamily::Uniform, 12, 3, 1500, 3.0, 90);
    DecomposeConfig dc;
    dc.pursuit.n_s = 300;
    dc.pursuit.rng_seed = 91;
    dc.latdim_seed = 92;
    const Decomposition a = decompose(mx.X, std::nullopt, dc);
    dc.pursuit.threads = 3;
    const Decomposition b = decompose(mx.X, std::nullopt, dc);
    const bool dec = a.pursuit.Q == b.pursuit.Q && a.pursuit.S_hat == b.pursuit.S_hat;

    McConfig mc;
    mc.n_b = 3;
    mc.master_seed = 93;
    mc.pursuit.n_s = 300;
    const std::string m1 = mc_csv(monte_carlo_bss(synth5(800, 94), mc));
    mc.threads = 3;
    const std::string m2 = mc_csv(monte_carlo_bss(synth5(800, 94), mc));

    LatGridConfig lg;
    lg.ratios = {1.0};
    lg.q_fractions = {0.2};
    lg.reps = 4;
    lg.master_seed = 95;
    const std::string l1 = latgrid_csv(latdim_validation(lg));
    lg.threads = 4;
    const std::string l2 = latgrid_csv(latdim_validation(lg));
    report("6g", dec && m1 == m2 && l1 == l2,
           fmt("seeded bit-exact reruns across thread counts: decompose %s, sir-mc %s, latdim-grid %s",
               dec ? "same" : "DIFFERENT", m1 == m2 ? "same" : "DIFFERENT", l1 == l2 ? "same" : "DIFFERENT"));
}

void spectrum() {
    const NoisyMixture mx = noisy_mixture(SourceFamily::Uniform, 50, 5, 10000, 1.0, 7);
    const PpcaModel m = fit_ppca(mx.X, 5);
    const double tail = m.eigvals.segment(5, 44).mean();
    const double last = m.eigvals[49];
    report("7", std::abs(tail - 1.0) <= 0.05 && std::abs(last) <= 1e-10,
           fmt("p=50 q=5 n=10000 sigma=%.1f: tail mean %.4f (sigma^2 = 1), lambda_p %.1e", mx.sigma, tail, last));
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> steps = {
        electron,     polygon,      nnls,          latdim_grid,    latdim_low_snr,        separation,
        prop_gradients, prop_sir,   prop_whitening, prop_orthonormality, prop_secant, prop_steihaug,
        prop_reproducibility, spectrum};
    const auto t0 = Clock::now();
    for (const auto& step : steps) {
        try {
            step();
        } catch (const std::exception& e) {
            report("?", false, std::string("exception: ") + e.what());
        }
    }
    std::printf("%d failed, total %.1fs\n", g_failed, since(t0));
    return g_failed == 0 ? 0 : 1;
}
