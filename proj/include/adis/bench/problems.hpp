#pragma once

// Solver fixtures: charges on a sphere, constrained least squares, and the
// largest small polygon.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "adis/error.hpp"
#include "adis/nlp/problem.hpp"
#include "adis/random.hpp"

namespace adis::bench {

using nlp::ConstraintEval;
using nlp::Matrix;
using nlp::NlpProblem;
using nlp::ObjectiveEval;
using nlp::Vector;

/// Minimal Coulomb potential of n_p unit charges on the unit sphere.
/// Variables are (x_1, y_1, z_1, ..., x_np, y_np, z_np).
inline NlpProblem electron_problem(int n_p) {
    if (n_p < 2) throw ArgumentError("electron_problem: n_p must be >= 2");
    NlpProblem p;
    p.name = "electron-" + std::to_string(n_p);
    p.dim = 3 * n_p;
    p.n_eq = n_p;
    p.lower = Vector::Constant(p.dim, -nlp::kInf);
    p.upper = Vector::Constant(p.dim, nlp::kInf);
    p.objective = [n_p](const Vector& x) {
        ObjectiveEval e;
        e.gradient = Vector::Zero(3 * n_p);
        for (int i = 0; i < n_p; ++i) {
            for (int j = i + 1; j < n_p; ++j) {
                const Eigen::Vector3d d = x.segment<3>(3 * i) - x.segment<3>(3 * j);
                const double r2 = d.squaredNorm();
                const double inv = 1.0 / std::sqrt(r2);
                e.value += inv;
                const Eigen::Vector3d gr = -(inv * inv * inv) * d;
                e.gradient.segment<3>(3 * i) += gr;
                e.gradient.segment<3>(3 * j) -= gr;
            }
        }
        return e;
    };
    p.eq_constraints = [n_p](const Vector& x) {
        ConstraintEval c;
        c.values.resize(n_p);
        c.jacobian = Matrix::Zero(n_p, 3 * n_p);
        for (int i = 0; i < n_p; ++i) {
            const Eigen::Vector3d v = x.segment<3>(3 * i);
            c.values[i] = v.squaredNorm() - 1.0;
            c.jacobian.block<1, 3>(i, 3 * i) = 2.0 * v.transpose();
        }
        return c;
    };
    return p;
}

/// Seeded uniform points in the cube, pushed onto the sphere.
inline Vector electron_start(int n_p, std::uint64_t seed) {
    Rng rng(seed);
    Vector x(3 * n_p);
    for (int i = 0; i < n_p; ++i) {
        Eigen::Vector3d v;
        do {
            for (int k = 0; k < 3; ++k) v[k] = rng.uniform(-1.0, 1.0);
        } while (v.norm() < 1e-3);
        x.segment<3>(3 * i) = v.normalized();
    }
    return x;
}

/// Potential energy of a configuration (no constraint handling).
inline double electron_energy(const Vector& x) {
    const int n_p = static_cast<int>(x.size() / 3);
    double f = 0.0;
    for (int i = 0; i < n_p; ++i)
        for (int j = i + 1; j < n_p; ++j)
            f += 1.0 / (x.segment<3>(3 * i) - x.segment<3>(3 * j)).norm();
    return f;
}

/// min ||Ax - b||^2  s.t.  Cx - d >= 0. The norm is squared so the objective
/// stays smooth at an exact fit; the minimizer is unchanged.
inline NlpProblem nnls_problem(Matrix A, Vector b, Matrix C, Vector d) {
    if (A.rows() != b.size() || C.cols() != A.cols() || C.rows() != d.size())
        throw ArgumentError("nnls_problem: inconsistent shapes");
    const int n = static_cast<int>(A.cols());
    const int L = static_cast<int>(C.rows());
    auto data = std::make_shared<const std::tuple<Matrix, Vector, Matrix, Vector>>(
        std::move(A), std::move(b), std::move(C), std::move(d));
    NlpProblem p;
    p.name = "nnls";
    p.dim = n;
    p.n_ineq = L;
    p.lower = Vector::Constant(n, -nlp::kInf);
    p.upper = Vector::Constant(n, nlp::kInf);
    p.objective = [data](const Vector& x) {
        const auto& [A, b, C, d] = *data;
        const Vector r = A * x - b;
        return ObjectiveEval{r.squaredNorm(), 2.0 * (A.transpose() * r)};
    };
    p.ineq_constraints = [data](const Vector& x) {
        const auto& [A, b, C, d] = *data;
        return ConstraintEval{C * x - d, C};
    };
    return p;
}

struct NnlsInstance {
    Matrix A;
    Vector b;
    Matrix C;
    Vector d;
};

/// Random instance with x >= 0 (C = I, d = 0); b is drawn so that a fair
/// share of the unconstrained least-squares coefficients are negative.
inline NnlsInstance random_nnls(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    NnlsInstance inst;
    inst.A = rng.normal_matrix(rows, cols);
    Vector x_true(cols);
    for (int i = 0; i < cols; ++i) x_true[i] = rng.normal();
    inst.b = inst.A * x_true;
    for (int i = 0; i < rows; ++i) inst.b[i] += 0.5 * rng.normal();
    inst.C = Matrix::Identity(cols, cols);
    inst.d = Vector::Zero(cols);
    return inst;
}

/// Largest area of a polygon with n_v vertices and diameter <= 1, in polar
/// coordinates (r_1..r_nv, theta_1..theta_nv). The area is negated so the
/// solver minimizes.
///
/// The area is a fan from the origin, so the origin is itself a vertex: as
/// in the COPS model the last vertex is pinned there (r_nv = 0,
/// theta_nv = pi) and r_i <= 1 keeps every vertex within unit distance of
/// it. Without the pin the fan area is unbounded.
inline NlpProblem polygon_problem(int n_v) {
    if (n_v < 3) throw ArgumentError("polygon_problem: n_v must be >= 3");
    const int n = 2 * n_v;
    const int n_pairs = n_v * (n_v - 1) / 2;
    NlpProblem p;
    p.name = "polygon-" + std::to_string(n_v);
    p.dim = n;
    p.n_ineq = n_pairs + (n_v - 1);
    p.lower = Vector::Zero(n);
    p.upper.resize(n);
    p.upper.head(n_v).setConstant(1.0);
    p.upper.tail(n_v).setConstant(std::numbers::pi);
    p.upper[n_v - 1] = 0.0;
    p.lower[n - 1] = std::numbers::pi;
    p.objective = [n_v, n](const Vector& x) {
        ObjectiveEval e;
        e.gradient = Vector::Zero(n);
        for (int i = 0; i + 1 < n_v; ++i) {
            const double ri = x[i], rj = x[i + 1];
            const double dt = x[n_v + i + 1] - x[n_v + i];
            const double s = std::sin(dt), c = std::cos(dt);
            e.value -= 0.5 * ri * rj * s;
            e.gradient[i] -= 0.5 * rj * s;
            e.gradient[i + 1] -= 0.5 * ri * s;
            e.gradient[n_v + i + 1] -= 0.5 * ri * rj * c;
            e.gradient[n_v + i] += 0.5 * ri * rj * c;
        }
        return e;
    };
    p.ineq_constraints = [n_v, n, n_pairs](const Vector& x) {
        ConstraintEval c;
        c.values.resize(n_pairs + n_v - 1);
        c.jacobian = Matrix::Zero(n_pairs + n_v - 1, n);
        int row = 0;
        for (int i = 0; i < n_v; ++i) {
            for (int j = i + 1; j < n_v; ++j, ++row) {
                const double ri = x[i], rj = x[j];
                const double dt = x[n_v + i] - x[n_v + j];
                const double cs = std::cos(dt), sn = std::sin(dt);
                c.values[row] = 1.0 - (ri * ri + rj * rj - 2.0 * ri * rj * cs);
                c.jacobian(row, i) = -(2.0 * ri - 2.0 * rj * cs);
                c.jacobian(row, j) = -(2.0 * rj - 2.0 * ri * cs);
                c.jacobian(row, n_v + i) = -(2.0 * ri * rj * sn);
                c.jacobian(row, n_v + j) = 2.0 * ri * rj * sn;
            }
        }
        for (int i = 0; i + 1 < n_v; ++i, ++row) {
            c.values[row] = x[n_v + i + 1] - x[n_v + i];
            c.jacobian(row, n_v + i + 1) = 1.0;
            c.jacobian(row, n_v + i) = -1.0;
        }
        return c;
    };
    return p;
}

/// r_i = 0.5, theta_i = i pi / (n_v + 1), with the pinned vertex moved to
/// the origin. Seeds other than 0 jitter this fan.
inline Vector polygon_start(int n_v, std::uint64_t seed = 0) {
    Vector x(2 * n_v);
    Rng rng(seed);
    for (int i = 0; i < n_v; ++i) {
        x[i] = 0.5;
        x[n_v + i] = (i + 1) * std::numbers::pi / (n_v + 1);
    }
    if (seed != 0) {
        const double h = std::numbers::pi / (n_v + 1);
        for (int i = 0; i < n_v; ++i) {
            x[i] = 0.5 + 0.1 * rng.uniform(-1.0, 1.0);
            x[n_v + i] += 0.25 * h * rng.uniform(-1.0, 1.0);
        }
    }
    x[n_v - 1] = 0.0;
    x[2 * n_v - 1] = std::numbers::pi;
    return x;
}

/// Area of the polygon (original, maximized objective).
inline double polygon_area(const Vector& x) {
    const int n_v = static_cast<int>(x.size() / 2);
    double a = 0.0;
    for (int i = 0; i + 1 < n_v; ++i) a += 0.5 * x[i] * x[i + 1] * std::sin(x[n_v + i + 1] - x[n_v + i]);
    return a;
}

/// Largest squared distance between any two vertices.
inline double polygon_max_sq_distance(const Vector& x) {
    const int n_v = static_cast<int>(x.size() / 2);
    double m = 0.0;
    for (int i = 0; i < n_v; ++i)
        for (int j = i + 1; j < n_v; ++j)
            m = std::max(m, x[i] * x[i] + x[j] * x[j] -
                                2.0 * x[i] * x[j] * std::cos(x[n_v + i] - x[n_v + j]));
    return m;
}

}  // namespace adis::bench
