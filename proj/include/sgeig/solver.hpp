#pragma once

#include "sgeig/gpc.hpp"
#include "sgeig/operators.hpp"
#include "sgeig/precond.hpp"
#include "sgeig/sg_state.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <string>
#include <vector>

namespace sgeig {

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct GmresResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double rel_residual = 0.0; // recurrence estimate of ||b - A x|| / ||b||
    bool converged = false;    // false when max_it was reached (not fatal)
    std::vector<double> residual_history; // starts at 1, one entry per iteration after
};

// Full (non-restarted) right-preconditioned GMRES with modified Gram-Schmidt
// and Givens rotations, zero initial guess: minimizes ||b - A P(y)|| over the
// Krylov space of A o P and returns x = P(y).  apply_P is the preconditioner
// action (an approximate inverse); pass the identity for unpreconditioned use.
GmresResult gmres(const LinearMap& apply_A, const LinearMap& apply_P, const Eigen::VectorXd& b,
                  double rel_tol, int max_it);

struct NewtonOptions {
    double rho = 0.9;        // backtracking factor in (0,1)
    double c = 0.25;         // Armijo constant in (0,1)
    double tau = 0.1;        // inner-tolerance factor
    double tol = 1e-10;      // outer residual norm target
    int max_newton = 30;
    int max_gmres = 200;
    int max_backtracks = 50;
};

// GMRES relative target for a Newton step given the previous outer residual
// norm: min(tau * prev, tau).  The first step uses prev = 1 by convention.
inline double inner_gmres_tol(double tau, double prev_residual_norm) {
    return std::min(tau * prev_residual_norm, tau);
}

struct IterationRecord {
    int step = 0;         // 0 is the baseline row (initial residual, no step)
    int gmres_iters = 0;
    double residual = 0.0; // outer residual norm after this step
    double alpha = 0.0;    // accepted step length (0 on the baseline row)
    int backtracks = 0;
};

struct IterationLog {
    std::vector<IterationRecord> records;
    bool converged = false;
    int total_gmres = 0;
};

// CSV with header step,gmres_iters,residual,alpha,backtracks (one row per
// record, %.17g numbers).
void save_iteration_log(const IterationLog& log, const std::string& path);

struct NewtonResult {
    SGEigenState state;
    IterationLog log;
};

// Line-search inexact Newton on the coupled SG eigenvalue system, starting
// from `init` (normally init_from_mean, possibly perturbed).  The
// preconditioner is built once from `init`; when pcfg.update is set it is
// refreshed from the current iterate before every step after the first.
// Returns the final state and per-step log; a run that exhausts max_newton
// is flagged via log.converged, while a failed line search (max_backtracks
// exceeded or a non-descent direction) throws a stagnation error.
NewtonResult newton_solve(const AffineOperator& A, const TripleProductTensor& H,
                          const SGEigenState& init, const PrecondConfig& pcfg,
                          const NewtonOptions& opts);

} // namespace sgeig
