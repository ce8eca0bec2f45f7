#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace sgeig {

// One eigenpair of the pencil K v = lambda M v, with ||v||_2 = 1.
struct EigenPair {
    std::complex<double> lambda;
    Eigen::VectorXcd v;
};

// Dense QZ solve returning the k finite eigenpairs of largest real part,
// sorted by descending real part; ties order nonnegative imaginary parts
// first, then smaller |Im|.  Eigenvalues with |beta| <= 1e-12 max|beta| are
// classified as infinite and excluded.
std::vector<EigenPair> solve_generalized(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M, int k);

// Maximal real part with the same tie-break convention as solve_generalized.
EigenPair rightmost(const std::vector<EigenPair>& pairs);

// e^{i theta} v with theta maximizing Re<ref, e^{i theta} v>.  When the inner
// product vanishes the phase is undefined: v is returned unchanged and
// *undefined (if given) is set.
Eigen::VectorXcd align_eigvec(const Eigen::VectorXcd& v, const Eigen::VectorXcd& ref,
                              bool* undefined = nullptr);

// Deterministic phase: rotate so the entry of largest magnitude is positive real.
Eigen::VectorXcd canonicalize_phase(const Eigen::VectorXcd& v);

} // namespace sgeig
