// adis: command-line front end.
//
// Exit codes: 0 success, 2 bad input or configuration, 3 a solver did not
// converge (partial traces are still written).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adis/adis.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using adis::cli::RunConfig;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitNoConvergence = 3;

/// A run finished but some solve did not meet its tolerances.
class ConvergenceFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class OutputDir {
public:
    explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

    void create() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw adis::IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    std::string path(const std::string& name) {
        files_.push_back(name);
        return (dir_ / name).string();
    }

    void text(const std::string& name, const std::string& content) {
        std::ofstream os(path(name), std::ios::binary);
        if (!os) throw adis::IoError("cannot write " + (dir_ / name).string());
        os << content;
    }

    void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

    void matrix(const std::string& stem, const adis::Matrix& m, bool binary,
                const std::vector<std::string>& header = {}) {
        adis::io::save_csv(path(stem + ".csv"), m, header);
        if (binary) adis::io::save_binary(path(stem + ".bin"), m);
    }

    void trace(const std::string& name, const adis::nlp::SolveTrace& t) { t.save_jsonl(path(name)); }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

json manifest_base(const RunConfig& rc) {
    return json{{"manifest_version", 1},
                {"tool", "adis"},
                {"version", ADIS_VERSION},
                {"subcommand", rc.subcommand()},
                {"config", rc.get()},
                {"started_utc", utc_now()}};
}

void write_manifest(OutputDir& out, json m) {
    out.path("manifest.json");
    m["outputs"] = out.files();
    std::ofstream os((out.dir() / "manifest.json").string(), std::ios::binary);
    if (!os) throw adis::IoError("cannot write manifest.json");
    os << m.dump(2) << "\n";
}

adis::io::LabeledMatrix load_input(const std::string& path) {
    if (path.empty()) throw adis::ArgumentError("input: no input file given (--input)");
    if (!fs::exists(path)) throw adis::IoError("input: no such file " + path);
    try {
        return adis::io::load_matrix(path);
    } catch (const adis::IoError& e) {
        throw adis::IoError(std::string("input: ") + e.what());
    }
}

std::uint64_t seed_of(const json& c) { return c.at("seed").get<std::uint64_t>(); }

void apply_solver(adis::nlp::AugLagConfig& s, const json& c) {
    s.qn_kind = adis::nlp::qn_kind_from_string(c.at("qn").get<std::string>());
    s.eta_grad_star = c.at("eta_grad").get<double>();
    s.eta_con_star = c.at("eta_con").get<double>();
    s.max_outer = c.at("max_outer").get<int>();
    s.j_max = c.at("j_max").get<int>();
    s.validate();
}

json solver_defaults() {
    const adis::nlp::AugLagConfig d;
    return json{{"qn", std::string(adis::nlp::to_string(d.qn_kind))},
                {"eta_grad", d.eta_grad_star},
                {"eta_con", d.eta_con_star},
                {"max_outer", d.max_outer},
                {"j_max", d.j_max}};
}

void add_solver_flags(RunConfig& rc, CLI::App* app) {
    rc.option<std::string>(app, "--qn", "qn", "Quasi-Newton update: SR1, BFGS, L-SR1, L-BFGS");
    rc.option<double>(app, "--eta-grad", "eta_grad", "Stationarity tolerance");
    rc.option<double>(app, "--eta-con", "eta_con", "Feasibility tolerance");
    rc.option<int>(app, "--max-outer", "max_outer", "Outer iteration cap");
    rc.option<int>(app, "--j-max", "j_max", "Inner iteration cap");
}

json merged(json a, const json& b) {
    a.update(b);
    return a;
}

int threads_of(const json& c) {
    const int t = c.at("threads").get<int>();
    if (t < 1) throw adis::ArgumentError("threads must be >= 1");
    return t;
}

// ---------------------------------------------------------------------------
// decompose

json decompose_defaults() {
    const adis::PursuitConfig pc;
    return merged(json{{"input", ""},
                       {"output", "adis-out"},
                       {"q", nullptr},
                       {"seed", 0},
                       {"threads", adis::cli::default_threads()},
                       {"n_s", pc.n_s},
                       {"R", pc.R},
                       {"stage2", pc.run_stage2},
                       {"channel_centering", true},
                       {"allow_empty_tail", false},
                       {"strict_spectrum", false},
                       {"latdim_replicates", 1},
                       {"contrast", "negentropy-logcosh"},
                       {"binary", false}},
                  solver_defaults());
}

void add_decompose_flags(RunConfig& rc, CLI::App* app) {
    rc.config_option(app);
    rc.option<std::string>(app, "-i,--input", "input", "Data matrix (CSV or binary), rows = channels");
    rc.option<std::string>(app, "-o,--output", "output", "Output directory");
    rc.option<int>(app, "--q", "q", "Number of sources; estimated when omitted");
    rc.option<std::uint64_t>(app, "--seed", "seed", "Master seed");
    rc.option<int>(app, "--threads", "threads", "Worker threads (also ADIS_THREADS)");
    rc.option<int>(app, "--n-s", "n_s", "Random seed directions per component");
    rc.option<int>(app, "--retain", "R", "Seeds solved per component");
    rc.option<bool>(app, "--stage2", "stage2", "Run the joint refinement");
    rc.option<bool>(app, "--channel-centering", "channel_centering", "Remove the per-sample channel mean");
    rc.option<bool>(app, "--allow-empty-tail", "allow_empty_tail", "Accept q with no noise tail");
    rc.option<bool>(app, "--strict-spectrum", "strict_spectrum", "Fail instead of clipping a degenerate spectrum");
    rc.option<int>(app, "--latdim-replicates", "latdim_replicates", "Permutation replicates for the bound");
    rc.option<std::string>(app, "--contrast", "contrast", "Contrast function");
    rc.option<bool>(app, "--binary", "binary", "Also write binary matrices");
    add_solver_flags(rc, app);
}

std::string stats_csv(const adis::SourceStats& st) {
    std::string out = "sample,sigma2";
    for (Eigen::Index i = 0; i < st.rv.rows(); ++i) out += ",rv_" + std::to_string(i + 1);
    out += "\n";
    char buf[64];
    for (Eigen::Index t = 0; t < st.rv.cols(); ++t) {
        out += std::to_string(t);
        std::snprintf(buf, sizeof buf, ",%.17g", st.sigma2_i[t]);
        out += buf;
        for (Eigen::Index i = 0; i < st.rv.rows(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", st.rv(i, t));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

int cmd_decompose(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();

    adis::DecomposeConfig dc;
    dc.pursuit.n_s = c.at("n_s").get<int>();
    dc.pursuit.R = c.at("R").get<int>();
    dc.pursuit.run_stage2 = c.at("stage2").get<bool>();
    dc.pursuit.rng_seed = adis::split_seed(seed_of(c), 1);
    dc.pursuit.threads = threads_of(c);
    apply_solver(dc.pursuit.solver, c);
    apply_solver(dc.pursuit.joint_solver, c);
    dc.pursuit.validate();
    dc.ppca.channel_centering = c.at("channel_centering").get<bool>();
    dc.ppca.allow_empty_tail = c.at("allow_empty_tail").get<bool>();
    dc.ppca.strict_spectrum = c.at("strict_spectrum").get<bool>();
    dc.latdim.replicates = c.at("latdim_replicates").get<int>();
    dc.latdim_seed = adis::split_seed(seed_of(c), 0);
    dc.contrast = c.at("contrast").get<std::string>();
    const adis::ProblemFactory factory(adis::contrast_by_name(dc.contrast));
    std::optional<int> q;
    if (!c.at("q").is_null()) q = c.at("q").get<int>();
    const bool binary = c.at("binary").get<bool>();

    const adis::io::LabeledMatrix in = load_input(c.at("input").get<std::string>());
    const double t_load = seconds_since(t0);

    OutputDir out(c.at("output").get<std::string>());
    json manifest = manifest_base(rc);
    manifest["seeds"] = {{"master", seed_of(c)}, {"latdim", dc.latdim_seed}, {"pursuit", dc.pursuit.rng_seed}};
    manifest["input_shape"] = {in.values.rows(), in.values.cols()};

    const auto t1 = Clock::now();
    adis::Decomposition d;
    try {
        d = adis::decompose(in.values, q, dc, factory);
    } catch (const adis::ComponentFailure& e) {
        out.create();
        for (std::size_t r = 0; r < e.traces().size(); ++r)
            out.trace("trace-component-" + std::to_string(e.component()) + "-seed-" + std::to_string(r + 1) +
                          ".jsonl",
                      e.traces()[r]);
        manifest["status"] = "failed";
        manifest["error"] = std::string("pursuit: ") + e.what();
        manifest["timings"] = {{"load", t_load}, {"decompose", seconds_since(t1)}, {"total", seconds_since(t0)}};
        write_manifest(out, manifest);
        throw;
    }
    const double t_decompose = seconds_since(t1);

    out.create();
    const adis::PursuitResult& pr = d.pursuit;
    out.matrix("Q", pr.Q, binary);
    out.matrix("sources", pr.S_hat, binary);
    out.matrix("mixing", pr.A_full, binary);
    out.json_file("model.json", to_json(d.model));
    if (binary) {
        adis::io::save_binary(out.path("model-U.bin"), d.model.U);
        adis::io::save_binary(out.path("model-A_hat.bin"), d.model.A_hat);
    }
    if (d.stats) out.text("stats.csv", stats_csv(*d.stats));
    if (d.latdim) {
        out.json_file("latdim.json", to_json(*d.latdim));
        out.text("latdim-profile.csv", adis::profile_csv(*d.latdim));
    }
    for (std::size_t k = 0; k < pr.component_traces.size(); ++k)
        out.trace("trace-component-" + std::to_string(k + 1) + ".jsonl", pr.component_traces[k]);
    if (pr.stage2_run) out.trace("trace-joint.jsonl", pr.joint_trace);

    std::vector<std::string> warnings = d.model.warnings;
    warnings.insert(warnings.end(), pr.warnings.begin(), pr.warnings.end());
    manifest["q"] = d.model.q;
    manifest["q_source"] = d.q_source;
    manifest["status"] = pr.converged() ? "converged" : "not_converged";
    manifest["stage1_objectives"] = pr.stage1_objectives;
    manifest["stage2"] = {{"run", pr.stage2_run},
                          {"fallback", pr.stage2_fallback},
                          {"stage1_joint_objective", pr.stage1_joint_objective},
                          {"joint_objective", pr.joint_objective}};
    if (!d.stats) manifest["stats"] = "not defined for p = q (no residual degrees of freedom)";
    manifest["warnings"] = warnings;
    manifest["timings"] = {{"load", t_load}, {"decompose", t_decompose}, {"total", seconds_since(t0)}};
    write_manifest(out, manifest);

    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "q = " << d.model.q << " (" << d.q_source << "), outputs in " << out.dir().string() << "\n";
    if (!pr.converged()) throw ConvergenceFailure("pursuit: a component solve did not converge");
    return 0;
}

// ---------------------------------------------------------------------------
// latdim

json latdim_defaults() {
    return json{{"input", ""},
                {"output", "adis-latdim"},
                {"seed", 0},
                {"replicates", 1},
                {"channel_centering", true}};
}

void add_latdim_flags(RunConfig& rc, CLI::App* app) {
    rc.config_option(app);
    rc.option<std::string>(app, "-i,--input", "input", "Data matrix (CSV or binary), rows = channels");
    rc.option<std::string>(app, "-o,--output", "output", "Output directory");
    rc.option<std::uint64_t>(app, "--seed", "seed", "Permutation seed");
    rc.option<int>(app, "--replicates", "replicates", "Permutation replicates");
    rc.option<bool>(app, "--channel-centering", "channel_centering", "Remove the per-sample channel mean");
}

int cmd_latdim(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    const adis::io::LabeledMatrix in = load_input(c.at("input").get<std::string>());
    adis::LatDimOptions opt;
    opt.replicates = c.at("replicates").get<int>();
    const adis::Centered centered = adis::center(in.values, c.at("channel_centering").get<bool>());
    const adis::LatDimSummary s = adis::estimate_q(centered.data, seed_of(c), opt);

    OutputDir out(c.at("output").get<std::string>());
    out.create();
    out.json_file("latdim.json", to_json(s));
    out.text("latdim-profile.csv", adis::profile_csv(s));
    json manifest = manifest_base(rc);
    manifest["seeds"] = {{"master", seed_of(c)}};
    manifest["q_hat"] = s.q_hat;
    manifest["timings"] = {{"total", seconds_since(t0)}};
    write_manifest(out, manifest);
    std::cout << s.q_hat << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench sir-mc

json sirmc_defaults() {
    const adis::PursuitConfig pc;
    return merged(json{{"sources", "synth5"},
                       {"q", 5},
                       {"n", 2000},
                       {"family", "uniform-random"},
                       {"nb", 20},
                       {"seed", 0},
                       {"threads", adis::cli::default_threads()},
                       {"n_s", pc.n_s},
                       {"R", pc.R},
                       {"stage2", pc.run_stage2},
                       {"output", "adis-sir-mc"}},
                  solver_defaults());
}

void add_sirmc_flags(RunConfig& rc, CLI::App* app) {
    rc.config_option(app);
    rc.option<std::string>(app, "--sources", "sources",
                           "synth5, bells, narrow-band, speech, or a source matrix file");
    rc.option<int>(app, "--q", "q", "Source count for the generated families other than synth5");
    rc.option<int>(app, "--n", "n", "Samples per generated source");
    rc.option<std::string>(app, "--family", "family", "Mixing family");
    rc.option<int>(app, "--nb", "nb", "Monte-Carlo runs");
    rc.option<std::uint64_t>(app, "--seed", "seed", "Master seed");
    rc.option<int>(app, "--threads", "threads", "Worker threads (also ADIS_THREADS)");
    rc.option<int>(app, "--n-s", "n_s", "Random seed directions per component");
    rc.option<int>(app, "--retain", "R", "Seeds solved per component");
    rc.option<bool>(app, "--stage2", "stage2", "Run the joint refinement");
    rc.option<std::string>(app, "-o,--output", "output", "Output directory");
    add_solver_flags(rc, app);
}

adis::Matrix bench_sources(const std::string& kind, int q, int n, std::uint64_t seed) {
    if (kind == "synth5") return adis::bench::synth5(n, seed);
    if (kind == "bells") return adis::bench::sparse_bells(q, n, seed);
    if (kind == "narrow-band") return adis::bench::narrow_band(q, n, seed);
    if (kind == "speech") return adis::bench::speech_like(q, n, seed);
    return load_input(kind).values;
}

int cmd_sirmc(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    adis::bench::McConfig mc;
    mc.family = adis::bench::mixing_family_from_string(c.at("family").get<std::string>());
    mc.n_b = c.at("nb").get<int>();
    mc.master_seed = seed_of(c);
    mc.threads = threads_of(c);
    mc.pursuit.n_s = c.at("n_s").get<int>();
    mc.pursuit.R = c.at("R").get<int>();
    mc.pursuit.run_stage2 = c.at("stage2").get<bool>();
    apply_solver(mc.pursuit.solver, c);
    apply_solver(mc.pursuit.joint_solver, c);
    mc.pursuit.validate();
    const adis::Matrix S =
        bench_sources(c.at("sources").get<std::string>(), c.at("q").get<int>(), c.at("n").get<int>(), seed_of(c));
    const adis::bench::McReport rep = adis::bench::monte_carlo_bss(S, mc);

    OutputDir out(c.at("output").get<std::string>());
    out.create();
    out.text("sir-mc.csv", adis::bench::mc_csv(rep));
    out.json_file("sir-mc.json", adis::bench::to_json(rep));
    json manifest = manifest_base(rc);
    manifest["seeds"] = {{"master", seed_of(c)}};
    manifest["summary"] = adis::bench::to_json(rep);
    manifest["timings"] = {{"total", seconds_since(t0)}};
    write_manifest(out, manifest);
    std::printf("runs %zu failures %d  M %.4f dB  S %.4f dB  median %.4f dB  (stage 1: M %.4f dB)\n",
                rep.runs.size(), rep.failures, rep.M, rep.S, rep.median, rep.M_stage1);
    if (rep.failures == static_cast<int>(rep.runs.size())) throw ConvergenceFailure("sir-mc: every run failed");
    return 0;
}

// ---------------------------------------------------------------------------
// bench latdim-grid

json latgrid_defaults() {
    const adis::bench::LatGridConfig g;
    std::vector<std::string> fam;
    for (auto f : g.families) fam.emplace_back(adis::bench::to_string(f));
    return json{{"families", fam},
                {"ratios", g.ratios},
                {"fractions", g.q_fractions},
                {"p", g.p},
                {"n", g.n},
                {"reps", g.reps},
                {"seed", 0},
                {"replicates", 1},
                {"threads", adis::cli::default_threads()},
                {"output", "adis-latdim-grid"}};
}

void add_latgrid_flags(RunConfig& rc, CLI::App* app) {
    rc.config_option(app);
    rc.option<std::vector<std::string>>(app, "--families", "families", "gaussian, uniform, gamma")
        ->delimiter(',');
    rc.option<std::vector<double>>(app, "--ratios", "ratios", "sigma_min(A) / sigma values")->delimiter(',');
    rc.option<std::vector<double>>(app, "--fractions", "fractions", "q / p values")->delimiter(',');
    rc.option<int>(app, "--p", "p", "Channels");
    rc.option<int>(app, "--n", "n", "Samples");
    rc.option<int>(app, "--reps", "reps", "Replicates per cell");
    rc.option<std::uint64_t>(app, "--seed", "seed", "Master seed");
    rc.option<int>(app, "--replicates", "replicates", "Permutation replicates inside each estimate");
    rc.option<int>(app, "--threads", "threads", "Worker threads (also ADIS_THREADS)");
    rc.option<std::string>(app, "-o,--output", "output", "Output directory");
}

adis::bench::SourceFamily source_family_from_string(const std::string& s) {
    for (auto f : {adis::bench::SourceFamily::Gaussian, adis::bench::SourceFamily::Uniform,
                   adis::bench::SourceFamily::Gamma})
        if (adis::bench::to_string(f) == s) return f;
    throw adis::ArgumentError("unknown source family '" + s + "'");
}

int cmd_latgrid(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    adis::bench::LatGridConfig g;
    g.families.clear();
    for (const auto& f : c.at("families")) g.families.push_back(source_family_from_string(f.get<std::string>()));
    g.ratios = c.at("ratios").get<std::vector<double>>();
    g.q_fractions = c.at("fractions").get<std::vector<double>>();
    g.p = c.at("p").get<int>();
    g.n = c.at("n").get<int>();
    g.reps = c.at("reps").get<int>();
    g.master_seed = seed_of(c);
    g.threads = threads_of(c);
    g.latdim.replicates = c.at("replicates").get<int>();
    if (g.p < 8) throw adis::ArgumentError("latdim-grid: p must be >= 8");
    if (g.reps < 1 || g.n < 2) throw adis::ArgumentError("latdim-grid: need reps >= 1 and n >= 2");
    const auto cells = adis::bench::latdim_validation(g);

    OutputDir out(c.at("output").get<std::string>());
    out.create();
    out.text("latdim-grid.csv", adis::bench::latgrid_csv(cells));
    json jc = json::array();
    for (const auto& cell : cells)
        jc.push_back({{"family", adis::bench::to_string(cell.family)},
                      {"ratio", cell.ratio},
                      {"q", cell.q},
                      {"q_hat", cell.q_hat},
                      {"mean_bias", cell.mean_bias},
                      {"std_bias", cell.std_bias}});
    out.json_file("latdim-grid.json", jc);
    json manifest = manifest_base(rc);
    manifest["seeds"] = {{"master", seed_of(c)}};
    manifest["timings"] = {{"total", seconds_since(t0)}};
    write_manifest(out, manifest);
    std::cout << adis::bench::latgrid_csv(cells);
    return 0;
}

// ---------------------------------------------------------------------------
// bench nlp

void print_solution(const std::string& what, const adis::nlp::NlpSolution& s, double value) {
    std::printf("%s: status %s  objective %.10g  kkt_grad %.3e  kkt_feas %.3e  outer %d  inner %ld\n",
                what.c_str(), std::string(adis::nlp::to_string(s.status)).c_str(), value, s.kkt.grad, s.kkt.feas,
                s.outer_iterations, s.inner_iterations);
}

int finish_nlp(RunConfig& rc, Clock::time_point t0, const adis::nlp::NlpSolution& s, json extra) {
    OutputDir out(rc.get().at("output").get<std::string>());
    out.create();
    out.json_file("summary.json", merged(summary_json(s), extra));
    out.trace("trace.jsonl", s.trace);
    s.trace.save_csv(out.path("trace.csv"));
    json manifest = manifest_base(rc);
    manifest["seeds"] = {{"master", seed_of(rc.get())}};
    manifest["status"] = std::string(adis::nlp::to_string(s.status));
    manifest["timings"] = {{"total", seconds_since(t0)}};
    write_manifest(out, manifest);
    if (!s.converged()) throw ConvergenceFailure(rc.subcommand() + ": solver stopped with status " +
                                                 std::string(adis::nlp::to_string(s.status)));
    return 0;
}

int cmd_electron(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    adis::nlp::AugLagConfig cfg;
    apply_solver(cfg, c);
    const int np = c.at("np").get<int>();
    const auto s = adis::nlp::solve(adis::bench::electron_problem(np), adis::bench::electron_start(np, seed_of(c)),
                                    cfg);
    print_solution("electron n_p=" + std::to_string(np), s, s.objective);
    return finish_nlp(rc, t0, s, {{"seconds", seconds_since(t0)}});
}

int cmd_nnls(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    adis::nlp::AugLagConfig cfg;
    apply_solver(cfg, c);
    adis::bench::NnlsInstance inst;
    const std::string file = c.at("file").get<std::string>();
    if (!file.empty()) {
        // Columns 1..m-1 hold A, the last column holds b; constraint x >= 0.
        const adis::Matrix Ab = load_input(file).values;
        if (Ab.cols() < 2) throw adis::ArgumentError("nnls: file needs at least two columns (A | b)");
        const Eigen::Index m = Ab.cols() - 1;
        inst.A = Ab.leftCols(m);
        inst.b = Ab.col(m);
        inst.C = adis::Matrix::Identity(m, m);
        inst.d = adis::Vector::Zero(m);
    } else {
        inst = adis::bench::random_nnls(c.at("rows").get<int>(), c.at("cols").get<int>(), seed_of(c));
    }
    const auto s = adis::nlp::solve(adis::bench::nnls_problem(inst.A, inst.b, inst.C, inst.d),
                                    adis::Vector::Zero(inst.A.cols()), cfg);
    print_solution("nnls " + std::to_string(inst.A.rows()) + "x" + std::to_string(inst.A.cols()), s, s.objective);
    return finish_nlp(rc, t0, s, {{"seconds", seconds_since(t0)}});
}

int cmd_polygon(RunConfig& rc) {
    const auto t0 = Clock::now();
    const json& c = rc.resolve();
    adis::nlp::AugLagConfig cfg;
    apply_solver(cfg, c);
    const int nv = c.at("nv").get<int>();
    const int starts = c.at("starts").get<int>();
    if (starts < 1) throw adis::ArgumentError("polygon: starts must be >= 1");
    // Best converged start; the first start when none converged.
    std::optional<adis::nlp::NlpSolution> best;
    bool best_converged = false;
    json areas = json::array();
    for (int k = 0; k < starts; ++k) {
        // Start 0 is the regular fan; the others jitter it.
        const std::uint64_t start_seed = k == 0 ? 0 : adis::split_seed(seed_of(c), k);
        auto s = adis::nlp::solve(adis::bench::polygon_problem(nv), adis::bench::polygon_start(nv, start_seed), cfg);
        const double area = adis::bench::polygon_area(s.x_star);
        areas.push_back({{"start", k}, {"area", area}, {"status", std::string(adis::nlp::to_string(s.status))}});
        const bool take = !best || (s.converged() && (!best_converged || area > adis::bench::polygon_area(best->x_star)));
        if (take) {
            best_converged = s.converged();
            best = std::move(s);
        }
    }
    const double area = adis::bench::polygon_area(best->x_star);
    print_solution("polygon n_v=" + std::to_string(nv) + " (best of " + std::to_string(starts) + ")", *best, area);
    std::printf("area %.10g  max squared diameter %.10g\n", area,
                adis::bench::polygon_max_sq_distance(best->x_star));
    return finish_nlp(rc, t0, *best, {{"area", area}, {"starts", areas}, {"seconds", seconds_since(t0)}});
}

json nlp_defaults(json specific, const std::string& output) {
    return merged(merged(json{{"seed", 1}, {"output", output}}, solver_defaults()), specific);
}

void add_nlp_common(RunConfig& rc, CLI::App* app) {
    rc.config_option(app);
    rc.option<std::uint64_t>(app, "--seed", "seed", "Seed for the start point or instance");
    rc.option<std::string>(app, "-o,--output", "output", "Output directory");
    add_solver_flags(rc, app);
}

// ---------------------------------------------------------------------------
// gen

json gen_noisy_defaults() {
    return json{{"p", 10}, {"q", 3}, {"n", 2000}, {"family", "gamma"}, {"ratio", 2.0},
                {"seed", 0}, {"binary", false}, {"output", "adis-fixture"}};
}

int cmd_gen_noisy(RunConfig& rc) {
    const json& c = rc.resolve();
    const auto m = adis::bench::noisy_mixture(source_family_from_string(c.at("family").get<std::string>()),
                                              c.at("p").get<int>(), c.at("q").get<int>(), c.at("n").get<int>(),
                                              c.at("ratio").get<double>(), seed_of(c));
    OutputDir out(c.at("output").get<std::string>());
    out.create();
    const bool binary = c.at("binary").get<bool>();
    out.matrix("X", m.X, binary);
    out.matrix("A", m.A, binary);
    out.matrix("S", m.S, binary);
    json manifest = manifest_base(rc);
    manifest["sigma"] = m.sigma;
    write_manifest(out, manifest);
    std::cout << (out.dir() / "X.csv").string() << "\n";
    return 0;
}

json gen_sources_defaults() {
    return json{{"kind", "synth5"}, {"q", 5}, {"n", 2000}, {"seed", 0},
                {"mix", ""}, {"binary", false}, {"output", "adis-fixture"}};
}

int cmd_gen_sources(RunConfig& rc) {
    const json& c = rc.resolve();
    const std::string kind = c.at("kind").get<std::string>();
    if (kind != "synth5" && kind != "bells" && kind != "narrow-band" && kind != "speech")
        throw adis::ArgumentError("gen sources: unknown kind '" + kind + "'");
    const adis::Matrix S = bench_sources(kind, c.at("q").get<int>(), c.at("n").get<int>(), seed_of(c));
    OutputDir out(c.at("output").get<std::string>());
    out.create();
    const bool binary = c.at("binary").get<bool>();
    out.matrix("S", S, binary);
    const std::string mix = c.at("mix").get<std::string>();
    if (!mix.empty()) {
        adis::bench::MixingSpec spec;
        spec.family = adis::bench::mixing_family_from_string(mix);
        spec.dim = static_cast<int>(S.rows());
        spec.seed = adis::split_seed(seed_of(c), 0);
        const adis::Matrix A = adis::bench::gen_mixing(spec);
        out.matrix("A", A, binary);
        out.matrix("X", A * S, binary);
    }
    write_manifest(out, manifest_base(rc));
    std::cout << out.dir().string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adis: blind source separation by projection pursuit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ADIS_VERSION);

    std::vector<std::pair<CLI::App*, std::function<int()>>> commands;
    std::vector<std::unique_ptr<RunConfig>> configs;
    auto reg = [&](CLI::App* sub, const std::string& name, json defaults,
                   const std::function<void(RunConfig&, CLI::App*)>& flags, int (*run)(RunConfig&)) {
        configs.push_back(std::make_unique<RunConfig>(name, std::move(defaults)));
        RunConfig* rc = configs.back().get();
        flags(*rc, sub);
        commands.emplace_back(sub, [rc, run] { return run(*rc); });
    };

    reg(app.add_subcommand("decompose", "Separate sources from a data matrix"), "decompose", decompose_defaults(),
        add_decompose_flags, cmd_decompose);
    reg(app.add_subcommand("latdim", "Estimate the number of sources"), "latdim", latdim_defaults(),
        add_latdim_flags, cmd_latdim);

    CLI::App* bench = app.add_subcommand("bench", "Benchmarks");
    bench->require_subcommand(1);
    reg(bench->add_subcommand("sir-mc", "Monte-Carlo separation quality"), "bench-sir-mc", sirmc_defaults(),
        add_sirmc_flags, cmd_sirmc);
    reg(bench->add_subcommand("latdim-grid", "Latent dimensionality bias grid"), "bench-latdim-grid",
        latgrid_defaults(), add_latgrid_flags, cmd_latgrid);
    CLI::App* nlp = bench->add_subcommand("nlp", "Solver benchmarks");
    nlp->require_subcommand(1);
    reg(nlp->add_subcommand("electron", "Charges on the unit sphere"), "bench-nlp-electron",
        nlp_defaults({{"np", 50}}, "adis-electron"),
        [](RunConfig& rc, CLI::App* a) {
            add_nlp_common(rc, a);
            rc.option<int>(a, "--np", "np", "Number of charges");
        },
        cmd_electron);
    reg(nlp->add_subcommand("nnls", "Nonnegative least squares"), "bench-nlp-nnls",
        nlp_defaults({{"file", ""}, {"rows", 40}, {"cols", 20}}, "adis-nnls"),
        [](RunConfig& rc, CLI::App* a) {
            add_nlp_common(rc, a);
            rc.option<std::string>(a, "--file", "file", "Matrix file [A | b]; random instance when omitted");
            rc.option<int>(a, "--rows", "rows", "Rows of the random instance");
            rc.option<int>(a, "--cols", "cols", "Columns of the random instance");
        },
        cmd_nnls);
    reg(nlp->add_subcommand("polygon", "Largest small polygon"), "bench-nlp-polygon",
        nlp_defaults({{"nv", 6}, {"starts", 5}}, "adis-polygon"),
        [](RunConfig& rc, CLI::App* a) {
            add_nlp_common(rc, a);
            rc.option<int>(a, "--nv", "nv", "Number of vertices");
            rc.option<int>(a, "--starts", "starts", "Multi-start count");
        },
        cmd_polygon);

    CLI::App* gen = app.add_subcommand("gen", "Fixture generators");
    gen->require_subcommand(1);
    reg(gen->add_subcommand("noisy", "Noisy mixture x = A s + sigma e"), "gen-noisy", gen_noisy_defaults(),
        [](RunConfig& rc, CLI::App* a) {
            rc.config_option(a);
            rc.option<int>(a, "--p", "p", "Channels");
            rc.option<int>(a, "--q", "q", "Sources");
            rc.option<int>(a, "--n", "n", "Samples");
            rc.option<std::string>(a, "--family", "family", "gaussian, uniform, gamma");
            rc.option<double>(a, "--ratio", "ratio", "sigma_min(A) / sigma");
            rc.option<std::uint64_t>(a, "--seed", "seed", "Seed");
            rc.option<bool>(a, "--binary", "binary", "Also write binary matrices");
            rc.option<std::string>(a, "-o,--output", "output", "Output directory");
        },
        cmd_gen_noisy);
    reg(gen->add_subcommand("sources", "Synthetic sources, optionally mixed"), "gen-sources",
        gen_sources_defaults(),
        [](RunConfig& rc, CLI::App* a) {
            rc.config_option(a);
            rc.option<std::string>(a, "--kind", "kind", "synth5, bells, narrow-band, speech");
            rc.option<int>(a, "--q", "q", "Sources (ignored by synth5)");
            rc.option<int>(a, "--n", "n", "Samples");
            rc.option<std::uint64_t>(a, "--seed", "seed", "Seed");
            rc.option<std::string>(a, "--mix", "mix", "Mixing family; writes A and X when given");
            rc.option<bool>(a, "--binary", "binary", "Also write binary matrices");
            rc.option<std::string>(a, "-o,--output", "output", "Output directory");
        },
        cmd_gen_sources);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitBadInput;
    }

    try {
        for (auto& [sub, run] : commands)
            if (sub->parsed()) return run();
        return kExitBadInput;
    } catch (const adis::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const adis::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const adis::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const ConvergenceFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConvergence;
    }
}
