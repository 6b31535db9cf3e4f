#pragma once

#include <cmath>
#include <deque>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "adis/error.hpp"

namespace adis::nlp {

enum class QnKind { SR1, BFGS, LSR1, LBFGS };

inline std::string_view to_string(QnKind k) {
    switch (k) {
        case QnKind::SR1: return "SR1";
        case QnKind::BFGS: return "BFGS";
        case QnKind::LSR1: return "L-SR1";
        case QnKind::LBFGS: return "L-BFGS";
    }
    return "?";
}

inline QnKind qn_kind_from_string(std::string_view s) {
    if (s == "SR1" || s == "sr1") return QnKind::SR1;
    if (s == "BFGS" || s == "bfgs") return QnKind::BFGS;
    if (s == "L-SR1" || s == "l-sr1" || s == "LSR1") return QnKind::LSR1;
    if (s == "L-BFGS" || s == "l-bfgs" || s == "LBFGS") return QnKind::LBFGS;
    throw ArgumentError("unknown quasi-Newton kind '" + std::string(s) + "'");
}

struct QnOptions {
    double sr1_skip = 1e-8;       // skip SR1 when |(y-Bs)'s| < r ||s|| ||y-Bs||
    double bfgs_floor = 1e-12;    // skip BFGS when y's <= floor ||s|| ||y||
    int memory = 10;              // pairs kept by the limited-memory variants
};

/// Symmetric approximation B to a Hessian, seen as a linear operator.
class HessianApprox {
public:
    virtual ~HessianApprox() = default;

    virtual void reset(int n, double gamma) = 0;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& v) const = 0;
    virtual Eigen::VectorXd column(int i) const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
        e[i] = 1.0;
        return apply(e);
    }
    virtual Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m(dim(), dim());
        for (int i = 0; i < dim(); ++i) m.col(i) = column(i);
        return m;
    }

    /// Returns true when the pair was used, false when the safeguard skipped it.
    virtual bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) = 0;

    virtual QnKind kind() const = 0;
    long applied() const { return applied_; }
    long skipped() const { return skipped_; }

protected:
    bool count(bool used) {
        (used ? applied_ : skipped_)++;
        return used;
    }
    void clear_counts() { applied_ = skipped_ = 0; }

private:
    long applied_ = 0;
    long skipped_ = 0;
};

class DenseSR1 final : public HessianApprox {
public:
    explicit DenseSR1(QnOptions opt = {}) : opt_(opt) {}
    void reset(int n, double gamma) override {
        B_ = gamma * Eigen::MatrixXd::Identity(n, n);
        clear_counts();
    }
    int dim() const override { return static_cast<int>(B_.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return B_ * v; }
    Eigen::VectorXd column(int i) const override { return B_.col(i); }
    Eigen::MatrixXd dense() const override { return B_; }
    QnKind kind() const override { return QnKind::SR1; }
    void set(Eigen::MatrixXd B) {
        if (B.rows() != B.cols()) throw ArgumentError("quasi-Newton: matrix must be square");
        B_ = std::move(B);
    }

    bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) override {
        const Eigen::VectorXd v = y - B_ * s;
        const double denom = v.dot(s);
        const double vn = v.norm();
        if (vn == 0.0 || std::abs(denom) <= opt_.sr1_skip * s.norm() * vn) return count(false);
        B_.noalias() += (v * v.transpose()) / denom;
        return count(true);
    }

private:
    QnOptions opt_;
    Eigen::MatrixXd B_;
};

class DenseBFGS final : public HessianApprox {
public:
    explicit DenseBFGS(QnOptions opt = {}) : opt_(opt) {}
    void reset(int n, double gamma) override {
        B_ = gamma * Eigen::MatrixXd::Identity(n, n);
        clear_counts();
    }
    int dim() const override { return static_cast<int>(B_.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return B_ * v; }
    Eigen::VectorXd column(int i) const override { return B_.col(i); }
    Eigen::MatrixXd dense() const override { return B_; }
    QnKind kind() const override { return QnKind::BFGS; }
    void set(Eigen::MatrixXd B) {
        if (B.rows() != B.cols()) throw ArgumentError("quasi-Newton: matrix must be square");
        B_ = std::move(B);
    }

    bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) override {
        const double ys = y.dot(s);
        if (!(ys > opt_.bfgs_floor * s.norm() * y.norm())) return count(false);
        const Eigen::VectorXd Bs = B_ * s;
        const double sBs = s.dot(Bs);
        if (!(sBs > 0.0)) return count(false);
        B_.noalias() -= (Bs * Bs.transpose()) / sBs;
        B_.noalias() += (y * y.transpose()) / ys;
        return count(true);
    }

private:
    QnOptions opt_;
    Eigen::MatrixXd B_;
};

/// Shared storage for the compact limited-memory forms; gamma stays fixed.
class LimitedMemoryBase : public HessianApprox {
public:
    explicit LimitedMemoryBase(QnOptions opt) : opt_(opt) {
        if (opt_.memory < 1) throw ArgumentError("limited-memory quasi-Newton needs memory >= 1");
    }
    void reset(int n, double gamma) override {
        n_ = n;
        gamma_ = gamma;
        S_.clear();
        Y_.clear();
        rebuild();
        clear_counts();
    }
    int dim() const override { return n_; }
    int stored() const { return static_cast<int>(S_.size()); }

protected:
    Eigen::MatrixXd stack(const std::deque<Eigen::VectorXd>& d) const {
        Eigen::MatrixXd m(n_, static_cast<Eigen::Index>(d.size()));
        for (std::size_t j = 0; j < d.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = d[j];
        return m;
    }
    void push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
        S_.push_back(s);
        Y_.push_back(y);
        if (static_cast<int>(S_.size()) > opt_.memory) {
            S_.pop_front();
            Y_.pop_front();
        }
    }
    void pop_newest() {
        S_.pop_back();
        Y_.pop_back();
    }
    virtual bool rebuild() = 0;

    QnOptions opt_;
    int n_ = 0;
    double gamma_ = 1.0;
    std::deque<Eigen::VectorXd> S_, Y_;
};

/// B = gamma I + Psi M^{-1} Psi',  Psi = Y - gamma S,  M = D + L + L' - gamma S'S.
class LimitedSR1 final : public LimitedMemoryBase {
public:
    explicit LimitedSR1(QnOptions opt = {}) : LimitedMemoryBase(opt) {}
    QnKind kind() const override { return QnKind::LSR1; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override {
        Eigen::VectorXd r = gamma_ * v;
        if (!S_.empty()) r.noalias() += Psi_ * lu_.solve(Psi_.transpose() * v);
        return r;
    }

    bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) override {
        const Eigen::VectorXd v = y - apply(s);
        const double vn = v.norm();
        if (vn == 0.0 || std::abs(v.dot(s)) <= opt_.sr1_skip * s.norm() * vn) return count(false);
        auto S_old = S_;
        auto Y_old = Y_;
        push(s, y);
        if (!rebuild()) {
            S_ = std::move(S_old);
            Y_ = std::move(Y_old);
            rebuild();
            return count(false);
        }
        return count(true);
    }

private:
    bool rebuild() override {
        if (S_.empty()) return true;
        const Eigen::MatrixXd S = stack(S_);
        const Eigen::MatrixXd Y = stack(Y_);
        const Eigen::MatrixXd SY = S.transpose() * Y;
        const Eigen::Index k = SY.rows();
        Eigen::MatrixXd M = -gamma_ * (S.transpose() * S);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) M(i, j) += (i >= j) ? SY(i, j) : SY(j, i);
        Psi_ = Y - gamma_ * S;
        lu_.compute(M);
        return lu_.isInvertible() && lu_.rcond() > 1e-14;
    }

    Eigen::MatrixXd Psi_;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

/// B = gamma I - W K^{-1} W',  W = [gamma S, Y],  K = [[gamma S'S, L], [L', -D]].
class LimitedBFGS final : public LimitedMemoryBase {
public:
    explicit LimitedBFGS(QnOptions opt = {}) : LimitedMemoryBase(opt) {}
    QnKind kind() const override { return QnKind::LBFGS; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override {
        Eigen::VectorXd r = gamma_ * v;
        if (!S_.empty()) r.noalias() -= W_ * lu_.solve(W_.transpose() * v);
        return r;
    }

    bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) override {
        const double ys = y.dot(s);
        if (!(ys > opt_.bfgs_floor * s.norm() * y.norm())) return count(false);
        auto S_old = S_;
        auto Y_old = Y_;
        push(s, y);
        if (!rebuild()) {
            S_ = std::move(S_old);
            Y_ = std::move(Y_old);
            rebuild();
            return count(false);
        }
        return count(true);
    }

private:
    bool rebuild() override {
        if (S_.empty()) return true;
        const Eigen::MatrixXd S = stack(S_);
        const Eigen::MatrixXd Y = stack(Y_);
        const Eigen::MatrixXd SY = S.transpose() * Y;
        const Eigen::Index k = SY.rows();
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * k, 2 * k);
        K.topLeftCorner(k, k) = gamma_ * (S.transpose() * S);
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < i; ++j) L(i, j) = SY(i, j);
        K.topRightCorner(k, k) = L;
        K.bottomLeftCorner(k, k) = L.transpose();
        K.bottomRightCorner(k, k) = -SY.diagonal().asDiagonal().toDenseMatrix();
        W_.resize(n_, 2 * k);
        W_.leftCols(k) = gamma_ * S;
        W_.rightCols(k) = Y;
        lu_.compute(K);
        return lu_.isInvertible() && lu_.rcond() > 1e-14;
    }

    Eigen::MatrixXd W_;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

inline std::unique_ptr<HessianApprox> make_hessian(QnKind kind, int n, double gamma,
                                                   QnOptions opt = {}) {
    std::unique_ptr<HessianApprox> h;
    switch (kind) {
        case QnKind::SR1: h = std::make_unique<DenseSR1>(opt); break;
        case QnKind::BFGS: h = std::make_unique<DenseBFGS>(opt); break;
        case QnKind::LSR1: h = std::make_unique<LimitedSR1>(opt); break;
        case QnKind::LBFGS: h = std::make_unique<LimitedBFGS>(opt); break;
    }
    h->reset(n, gamma);
    return h;
}

}  // namespace adis::nlp
