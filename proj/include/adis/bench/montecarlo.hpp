#pragma once

// Monte-Carlo harnesses: square noiseless separation over random mixings,
// and the latent-dimensionality validation grid. Every run draws its seed
// from the master seed with split_seed(master, run index), so results do
// not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "adis/bench/mixing.hpp"
#include "adis/bench/signals.hpp"
#include "adis/bench/sir.hpp"
#include "adis/latdim.hpp"
#include "adis/pursuit.hpp"
#include "adis/random.hpp"

namespace adis::bench {

struct McRun {
    int index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double sir_mean = 0.0;         // final sources
    double sir_mean_stage1 = 0.0;  // deflation only
    double joint_stage1 = 0.0;
    double joint_final = 0.0;
    bool stage2_fallback = false;
    Eigen::VectorXd sir_db;
};

struct McReport {
    std::vector<McRun> runs;
    int failures = 0;
    double M = 0.0;        // mean of per-run mean SIR
    double S = 0.0;        // sample std of per-run mean SIR
    double median = 0.0;
    double M_stage1 = 0.0;
};

struct McConfig {
    MixingFamily family = MixingFamily::UniformRandom;
    int n_b = 100;
    std::uint64_t master_seed = 0;
    int threads = 1;
    PursuitConfig pursuit;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Decomposes n_b square mixtures A_i S (A_i fresh per run) with q known and
/// scores the recovered sources against S.
inline McReport monte_carlo_bss(const Matrix& sources, const McConfig& cfg) {
    if (cfg.n_b < 1) throw ArgumentError("monte_carlo_bss: n_b must be >= 1");
    const int q = static_cast<int>(sources.rows());
    Matrix S = sources;
    S.colwise() -= S.rowwise().mean();
    span_basis(S);  // rejects rank-deficient sources up front

    DecomposeConfig dc;
    dc.ppca.channel_centering = false;
    dc.ppca.allow_empty_tail = true;
    dc.pursuit = cfg.pursuit;
    dc.pursuit.threads = 1;
    const ProblemFactory factory(contrast_by_name(dc.contrast));

    McReport rep;
    rep.runs.resize(static_cast<std::size_t>(cfg.n_b));
    parallel_for(cfg.n_b, cfg.threads, [&](int i) {
        McRun& r = rep.runs[static_cast<std::size_t>(i)];
        r.index = i;
        r.seed = split_seed(cfg.master_seed, static_cast<std::uint64_t>(i));
        try {
            MixingSpec spec;
            spec.family = cfg.family;
            spec.dim = q;
            spec.seed = split_seed(r.seed, 0);
            const Matrix X = gen_mixing(spec) * S;
            DecomposeConfig local = dc;
            local.pursuit.rng_seed = split_seed(r.seed, 1);
            const Decomposition d = decompose(X, q, local, factory);
            const SirReport s = sir(S, d.pursuit.S_hat);
            const SirReport s1 = sir(S, d.pursuit.Q_stage1 * d.model.x_tilde);
            r.sir_db = s.sir_db;
            r.sir_mean = s.mean;
            r.sir_mean_stage1 = s1.mean;
            r.joint_stage1 = d.pursuit.stage1_joint_objective;
            r.joint_final = d.pursuit.joint_objective;
            r.stage2_fallback = d.pursuit.stage2_fallback;
            r.ok = true;
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    });

    std::vector<double> means, means1;
    for (const McRun& r : rep.runs) {
        if (!r.ok) {
            ++rep.failures;
            continue;
        }
        means.push_back(r.sir_mean);
        means1.push_back(r.sir_mean_stage1);
    }
    if (!means.empty()) {
        const Eigen::Map<const Eigen::VectorXd> m(means.data(), static_cast<Eigen::Index>(means.size()));
        rep.M = m.mean();
        rep.S = means.size() > 1 ? std::sqrt((m.array() - rep.M).square().sum() / (means.size() - 1)) : 0.0;
        rep.median = median_of(means);
        rep.M_stage1 = Eigen::Map<const Eigen::VectorXd>(means1.data(), static_cast<Eigen::Index>(means1.size())).mean();
    }
    return rep;
}

inline std::string mc_csv(const McReport& rep) {
    std::string out = "run,seed,ok,sir_mean,sir_mean_stage1,joint_stage1,joint_final,stage2_fallback,error\n";
    char buf[256];
    for (const McRun& r : rep.runs) {
        std::snprintf(buf, sizeof buf, "%d,%llu,%d,%.17g,%.17g,%.17g,%.17g,%d,", r.index,
                      static_cast<unsigned long long>(r.seed), r.ok ? 1 : 0, r.sir_mean, r.sir_mean_stage1,
                      r.joint_stage1, r.joint_final, r.stage2_fallback ? 1 : 0);
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out += buf + err + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const McReport& rep) {
    std::vector<double> hist;
    for (const McRun& r : rep.runs)
        if (r.ok) hist.push_back(r.sir_mean);
    return nlohmann::json{{"M", rep.M},
                          {"S", rep.S},
                          {"median", rep.median},
                          {"M_stage1", rep.M_stage1},
                          {"failures", rep.failures},
                          {"runs", rep.runs.size()},
                          {"per_run_mean_sir", hist}};
}

// ---------------------------------------------------------------------------

struct LatGridConfig {
    std::vector<SourceFamily> families = {SourceFamily::Gaussian, SourceFamily::Uniform, SourceFamily::Gamma};
    std::vector<double> ratios = {0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<double> q_fractions = {0.1, 0.2, 0.3, 0.4, 0.5};
    int p = 50;
    int n = 1000;
    int reps = 20;
    std::uint64_t master_seed = 0;
    int threads = 1;
    LatDimOptions latdim;
};

struct LatGridCell {
    SourceFamily family = SourceFamily::Gaussian;
    double ratio = 1.0;
    int q = 1;
    std::vector<int> q_hat;
    double mean_bias = 0.0;
    double std_bias = 0.0;
};

/// One replicate: noisy mixture through center -> estimate_q.
inline int latdim_replicate(SourceFamily family, int p, int q, int n, double ratio, std::uint64_t seed,
                            const LatDimOptions& opt = {}) {
    const NoisyMixture m = noisy_mixture(family, p, q, n, ratio, split_seed(seed, 0));
    const Centered c = center(m.X);
    return estimate_q(c.data, split_seed(seed, 1), opt).q_hat;
}

inline std::vector<LatGridCell> latdim_validation(const LatGridConfig& cfg) {
    std::vector<LatGridCell> cells;
    for (SourceFamily f : cfg.families)
        for (double r : cfg.ratios)
            for (double frac : cfg.q_fractions) {
                LatGridCell c;
                c.family = f;
                c.ratio = r;
                c.q = std::max(1, static_cast<int>(std::lround(frac * cfg.p)));
                c.q_hat.assign(static_cast<std::size_t>(cfg.reps), 0);
                cells.push_back(std::move(c));
            }
    const int total = static_cast<int>(cells.size()) * cfg.reps;
    parallel_for(total, cfg.threads, [&](int t) {
        const int ci = t / cfg.reps, rep = t % cfg.reps;
        LatGridCell& c = cells[static_cast<std::size_t>(ci)];
        const std::uint64_t seed = split_seed(cfg.master_seed, static_cast<std::uint64_t>(t));
        c.q_hat[static_cast<std::size_t>(rep)] = latdim_replicate(c.family, cfg.p, c.q, cfg.n, c.ratio, seed, cfg.latdim);
    });
    for (LatGridCell& c : cells) {
        double s = 0.0, s2 = 0.0;
        for (int v : c.q_hat) {
            s += v - c.q;
            s2 += double(v - c.q) * (v - c.q);
        }
        const double k = static_cast<double>(c.q_hat.size());
        c.mean_bias = s / k;
        c.std_bias = k > 1 ? std::sqrt(std::max(0.0, (s2 - k * c.mean_bias * c.mean_bias) / (k - 1))) : 0.0;
    }
    return cells;
}

inline std::string latgrid_csv(const std::vector<LatGridCell>& cells) {
    std::string out = "family,ratio,q,mean_bias,std_bias\n";
    char buf[128];
    for (const LatGridCell& c : cells) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,%.17g\n", std::string(to_string(c.family)).c_str(),
                      c.ratio, c.q, c.mean_bias, c.std_bias);
        out += buf;
    }
    return out;
}

}  // namespace adis::bench
