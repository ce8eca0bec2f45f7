#pragma once

#include "sgeig/gpc.hpp"
#include "sgeig/operators.hpp"
#include "sgeig/sg_state.hpp"

#include <Eigen/Dense>

namespace sgeig {

// Stacked nonlinear residual r_hat = [F; -G/2] in the flat state layout.
// F couples the operator terms (l = 1..n_nu) and the eigenvalue expansion
// (l = 1..n_xi) through the triple-product slices; G_i = tr(V H_i V^T) -
// delta_{1i} per part enforces unit norm of each part's expansion.
struct SGResidual {
    Eigen::VectorXd rhat;
    double norm = 0.0; // cached ||rhat||_2
    int n_x = 0;
    int n_xi = 0;
    bool real_mode = false;
};

// The tensor must carry at least max(A.n_nu(), state.n_xi()) slices of size
// state.n_xi(): operator sums run over n_nu terms, eigenvalue couplings over
// n_xi, shorter expansions being zero-padded.
SGResidual residual(const SGEigenState& s, const AffineOperator& A, const TripleProductTensor& H);

// Matrix-free product of the rescaled Jacobian of r_hat with a flat direction.
Eigen::VectorXd apply_jacobian(const SGEigenState& s, const AffineOperator& A,
                               const TripleProductTensor& H, const Eigen::VectorXd& direction);

// Euclidean adjoint of apply_jacobian.
Eigen::VectorXd apply_jacobian_transpose(const SGEigenState& s, const AffineOperator& A,
                                         const TripleProductTensor& H, const Eigen::VectorXd& y);

// Both evaluation routes of the normalization gap G_i = <v, (H_i x I) v> -
// delta_{1i}: the trace form tr(V H_i V^T) and the vectorized Kronecker
// identity v^T vec(V H_i^T).  They agree to roundoff; both are kept so the
// identity can be cross-checked.
Eigen::VectorXd g_block_trace(const Eigen::MatrixXd& V, const TripleProductTensor& H);
Eigen::VectorXd g_block_kron(const Eigen::MatrixXd& V, const TripleProductTensor& H);

} // namespace sgeig
