#pragma once

#include "sgeig/operators.hpp"

#include <Eigen/Dense>
#include <filesystem>

namespace sgeig {

// Matricized gPC coefficients of the eigenpair expansion.  Column k of V_Re /
// V_Im pairs with basis function psi_k; lam_Re / lam_Im hold the eigenvalue
// coefficients.  Real mode stores only the real blocks; the flat layout is
//   complex: [vec(V_Re); vec(V_Im); lam_Re; lam_Im]   (column-major vec)
//   real:    [vec(V_Re); lam_Re]
struct SGEigenState {
    Eigen::MatrixXd V_re; // n_x x n_xi
    Eigen::MatrixXd V_im; // n_x x n_xi, 0x0 in real mode
    Eigen::VectorXd lam_re;
    Eigen::VectorXd lam_im; // empty in real mode
    bool real_mode = false;

    int n_x() const { return static_cast<int>(V_re.rows()); }
    int n_xi() const { return static_cast<int>(V_re.cols()); }
    int flat_size() const { return (real_mode ? 1 : 2) * (n_x() + 1) * n_xi(); }

    Eigen::VectorXd flatten() const;
    static SGEigenState unflatten(const Eigen::VectorXd& x, int n_x, int n_xi, bool real_mode);
};

// Mean-problem initialization: the rightmost eigenpair of (K_1, M) fills
// column 1, every other coefficient is zero.  For a complex pair the
// eigenvector phase is rotated so the real and imaginary parts have equal
// norms, then both are scaled to unit 2-norm (an exact eigenpair with
// unit-norm parts).  Mode is real when |Im lambda| <= 1e-12 |lambda|.
SGEigenState init_from_mean(const AffineOperator& A, int n_xi);

// Drop the imaginary blocks.  Rejects states whose imaginary content is not
// negligible (||V_Im||_F > 1e-8).
SGEigenState reduce_to_real(const SGEigenState& s);

// Checkpoint: dimensions header plus the flat coefficient dump at 17
// significant digits (bit-exact round trip).
void save_state(const SGEigenState& s, const std::filesystem::path& file);
SGEigenState load_state(const std::filesystem::path& file);

} // namespace sgeig
