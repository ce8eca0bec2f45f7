#pragma once

#include "sgeig/gpc.hpp"
#include "sgeig/operators.hpp"
#include "sgeig/sg_state.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

namespace sgeig {

// The four preconditioners for the Newton-GMRES systems:
//   MB   block-diagonal mean solve: shifted block A~ plus its small Schur
//        complement over the eigenvalue rows,
//   cMB  one bordered (constraint) mean matrix per basis column,
//   cMBu cMB with a Sherman-Morrison-Woodbury rank <= 4 (complex) / <= 2
//        (real) refresh of the mean eigenvector columns each Newton step,
//   chGS symmetric block Gauss-Seidel sweep over the degree blocks of the
//        basis with cMB core solves and truncated coupling updates.
enum class PrecondKind { MB, cMB, cMBu, chGS };

std::string precond_name(PrecondKind kind);
PrecondKind precond_from_name(const std::string& name);

struct PrecondConfig {
    PrecondKind kind = PrecondKind::cMB;
    double eps_re = 1.0; // shift scale in A~ = K_1 - eps_Re mu_Re M +- eps_Im mu_Im M
    double eps_im = 1.0;
    int p_t = 0;         // chGS coupling truncation degree; 0 collapses to cMB
    bool update = false; // refresh (SMW and chGS coefficient data) each Newton step
};

// Per-kind defaults: eps = 0.97 for MB (the plain mean block is sensitive to
// an exact shift), 1 otherwise; update on for cMBu/chGS; chGS untruncated
// (p_t = basis degree p, which the caller supplies).
PrecondConfig precond_defaults(PrecondKind kind, int p = 0);

// A fixed linear operator between Newton steps, applied to flat residual
// vectors in the state layout ([vec(V_Re); vec(V_Im); lam_Re; lam_Im]).
class Preconditioner {
public:
    virtual ~Preconditioner() = default;

    virtual Eigen::VectorXd apply(const Eigen::VectorXd& r) const = 0;

    // Refresh from the current Newton iterate (no-op for MB/cMB).  The caller
    // decides per PrecondConfig::update whether to invoke this each step.
    virtual void update(const SGEigenState& s);

    // Cumulative number of K_t * (dense block) products performed by apply
    // (nonzero only for chGS with p_t >= 1).
    virtual std::int64_t term_mults() const;

    // True when the last SMW refresh hit a singular capacitance matrix and
    // the base factorization was kept instead.
    virtual bool last_update_rejected() const;

    // Low-rank factors (Y, Z) of the active SMW update, so Y Z^T is the
    // difference between the updated and the base bordered matrix.  Empty
    // when no update is active (MB/cMB always; cMBu/chGS before update()).
    virtual std::pair<Eigen::MatrixXd, Eigen::MatrixXd> smw_factors() const;
};

// Build the configured preconditioner around the initial state (the mean
// eigenpair sits in column 1 with unit-norm parts).  The tensor supplies the
// chGS coupling slices; MB/cMB ignore it.
std::unique_ptr<Preconditioner> build_preconditioner(const AffineOperator& A,
                                                     const TripleProductTensor& H,
                                                     const SGEigenState& init,
                                                     const PrecondConfig& cfg);

} // namespace sgeig
