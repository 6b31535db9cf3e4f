#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adis/error.hpp"

namespace adis::nlp {

/// One inner iteration of the augmented Lagrangian solver.
struct TraceRecord {
    long iteration = 0;        // global, 0-based, monotone
    int outer = 0;             // F1 outer index k
    int inner = 0;             // 1-based index inside the inner solve
    double objective = 0.0;    // f(x) at the current iterate
    double lagrangian = 0.0;   // f - lambda'c + mu/2 ||c||^2
    double pg_norm = 0.0;      // ||x - P(x - grad L(x, lambda, mu))||_inf
    double feasibility = 0.0;  // ||c(x)||_inf
    double multiplier_norm = 0.0;
    double mu = 0.0;
    double delta = 0.0;        // radius used for this step
    double rho = 0.0;
    bool accepted = false;
    bool qn_skipped = false;
    double kkt_grad = 0.0;     // ||x - P(x - grad L(x, lambda, 0))||_inf
    double kkt_feas = 0.0;
    double eta_grad = 0.0;
    double eta_con = 0.0;
    std::string status = "running";

    bool operator==(const TraceRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const TraceRecord& r) {
    j = nlohmann::json{{"iteration", r.iteration},
                       {"outer", r.outer},
                       {"inner", r.inner},
                       {"objective", r.objective},
                       {"lagrangian", r.lagrangian},
                       {"pg_norm", r.pg_norm},
                       {"feasibility", r.feasibility},
                       {"multiplier_norm", r.multiplier_norm},
                       {"mu", r.mu},
                       {"delta", r.delta},
                       {"rho", r.rho},
                       {"accepted", r.accepted},
                       {"qn_skipped", r.qn_skipped},
                       {"kkt_grad", r.kkt_grad},
                       {"kkt_feas", r.kkt_feas},
                       {"eta_grad", r.eta_grad},
                       {"eta_con", r.eta_con},
                       {"status", r.status}};
}

inline void from_json(const nlohmann::json& j, TraceRecord& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("outer").get_to(r.outer);
    j.at("inner").get_to(r.inner);
    j.at("objective").get_to(r.objective);
    j.at("lagrangian").get_to(r.lagrangian);
    j.at("pg_norm").get_to(r.pg_norm);
    j.at("feasibility").get_to(r.feasibility);
    j.at("multiplier_norm").get_to(r.multiplier_norm);
    j.at("mu").get_to(r.mu);
    j.at("delta").get_to(r.delta);
    j.at("rho").get_to(r.rho);
    j.at("accepted").get_to(r.accepted);
    j.at("qn_skipped").get_to(r.qn_skipped);
    j.at("kkt_grad").get_to(r.kkt_grad);
    j.at("kkt_feas").get_to(r.kkt_feas);
    j.at("eta_grad").get_to(r.eta_grad);
    j.at("eta_con").get_to(r.eta_con);
    j.at("status").get_to(r.status);
}

struct SolveTrace {
    std::vector<TraceRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    const TraceRecord& back() const { return records.back(); }

    void write_jsonl(std::ostream& os) const {
        for (const auto& r : records) os << nlohmann::json(r).dump() << '\n';
    }

    static SolveTrace read_jsonl(std::istream& is) {
        SolveTrace t;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            try {
                t.records.push_back(nlohmann::json::parse(line).get<TraceRecord>());
            } catch (const nlohmann::json::exception& e) {
                throw IoError(std::string("trace: malformed JSON-lines record: ") + e.what());
            }
        }
        return t;
    }

    static constexpr const char* kCsvHeader =
        "iteration,outer,inner,objective,lagrangian,pg_norm,feasibility,multiplier_norm,mu,"
        "delta,rho,accepted,qn_skipped,kkt_grad,kkt_feas,eta_grad,eta_con,status";

    void write_csv(std::ostream& os) const {
        os << kCsvHeader << '\n';
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        for (const auto& r : records) {
            os << r.iteration << ',' << r.outer << ',' << r.inner << ',' << num(r.objective) << ','
               << num(r.lagrangian) << ',' << num(r.pg_norm) << ',' << num(r.feasibility) << ','
               << num(r.multiplier_norm) << ',' << num(r.mu) << ',' << num(r.delta) << ','
               << num(r.rho) << ',' << (r.accepted ? 1 : 0) << ',' << (r.qn_skipped ? 1 : 0)
               << ',' << num(r.kkt_grad) << ',' << num(r.kkt_feas) << ',' << num(r.eta_grad)
               << ',' << num(r.eta_con) << ',' << r.status << '\n';
        }
    }

    static SolveTrace read_csv(std::istream& is) {
        SolveTrace t;
        std::string line;
        if (!std::getline(is, line) || line != kCsvHeader)
            throw IoError("trace: CSV header mismatch");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) f.push_back(cell);
            if (f.size() != 18) throw IoError("trace: CSV row has " + std::to_string(f.size()) +
                                              " fields, expected 18");
            TraceRecord r;
            r.iteration = std::stol(f[0]);
            r.outer = std::stoi(f[1]);
            r.inner = std::stoi(f[2]);
            r.objective = std::stod(f[3]);
            r.lagrangian = std::stod(f[4]);
            r.pg_norm = std::stod(f[5]);
            r.feasibility = std::stod(f[6]);
            r.multiplier_norm = std::stod(f[7]);
            r.mu = std::stod(f[8]);
            r.delta = std::stod(f[9]);
            r.rho = std::stod(f[10]);
            r.accepted = f[11] == "1";
            r.qn_skipped = f[12] == "1";
            r.kkt_grad = std::stod(f[13]);
            r.kkt_feas = std::stod(f[14]);
            r.eta_grad = std::stod(f[15]);
            r.eta_con = std::stod(f[16]);
            r.status = f[17];
            t.records.push_back(std::move(r));
        }
        return t;
    }

    void save_jsonl(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write " + path);
        write_jsonl(os);
    }
    void save_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write " + path);
        write_csv(os);
    }
};

}  // namespace adis::nlp
