#include "sgeig/solver.hpp"

#include "sgeig/errors.hpp"

#include <cmath>

namespace sgeig {

GmresResult gmres(const LinearMap& apply_A, const LinearMap& apply_P, const Eigen::VectorXd& b,
                  double rel_tol, int max_it) {
    if (!(rel_tol > 0.0)) fail(ErrorCode::Config, "gmres: rel_tol must be positive");
    if (max_it < 1) fail(ErrorCode::Config, "gmres: max_it must be at least 1");

    const int n = static_cast<int>(b.size());
    GmresResult res;
    res.residual_history.push_back(1.0);
    const double beta = b.norm();
    if (beta == 0.0) {
        res.x = Eigen::VectorXd::Zero(n);
        res.rel_residual = 0.0;
        res.converged = true;
        res.residual_history.back() = 0.0;
        return res;
    }

    const int m = max_it;
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd Hh = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    V.col(0) = b / beta;
    g(0) = beta;

    auto finish = [&](int k) {
        // solve the k x k least-squares triangle and map back through P
        const Eigen::VectorXd y =
            Hh.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        res.x = apply_P(V.leftCols(k) * y);
        res.iterations = k;
        res.rel_residual = std::abs(g(k)) / beta;
    };

    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd w = apply_A(apply_P(V.col(j)));
        if (w.size() != n)
            fail(ErrorCode::DimensionMismatch, "gmres: operator changed the vector length");
        const double pre_norm = w.norm();
        for (int i = 0; i <= j; ++i) {
            Hh(i, j) = V.col(i).dot(w);
            w -= Hh(i, j) * V.col(i);
        }
        Hh(j + 1, j) = w.norm();
        const bool breakdown = Hh(j + 1, j) <= 1e-14 * pre_norm;
        if (!breakdown) V.col(j + 1) = w / Hh(j + 1, j);

        for (int i = 0; i < j; ++i) {
            const double t = cs(i) * Hh(i, j) + sn(i) * Hh(i + 1, j);
            Hh(i + 1, j) = -sn(i) * Hh(i, j) + cs(i) * Hh(i + 1, j);
            Hh(i, j) = t;
        }
        const double denom = std::hypot(Hh(j, j), Hh(j + 1, j));
        if (denom == 0.0) {
            cs(j) = 1.0;
            sn(j) = 0.0;
        } else {
            cs(j) = Hh(j, j) / denom;
            sn(j) = Hh(j + 1, j) / denom;
        }
        Hh(j, j) = cs(j) * Hh(j, j) + sn(j) * Hh(j + 1, j);
        Hh(j + 1, j) = 0.0;
        g(j + 1) = -sn(j) * g(j);
        g(j) = cs(j) * g(j);

        const double rel = std::abs(g(j + 1)) / beta;
        res.residual_history.push_back(rel);
        if (rel <= rel_tol) {
            finish(j + 1);
            res.converged = true;
            return res;
        }
        if (breakdown) {
            // the Krylov space is exhausted; anything above tolerance now is
            // unreachable
            fail(ErrorCode::Numerical, "gmres: Arnoldi breakdown with relative residual " +
                                           std::to_string(rel) + " above tolerance");
        }
    }
    finish(m);
    res.converged = false; // flagged, the caller decides
    return res;
}

} // namespace sgeig
