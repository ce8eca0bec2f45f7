#include "sgeig/dense_eig.hpp"

#include "sgeig/errors.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace sgeig {

namespace {

// Ordering: descending Re; ties put Im >= 0 before Im < 0, then smaller |Im|.
bool eig_before(const std::complex<double>& a, const std::complex<double>& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    const bool an = a.imag() >= 0.0, bn = b.imag() >= 0.0;
    if (an != bn) return an;
    return std::abs(a.imag()) < std::abs(b.imag());
}

} // namespace

std::vector<EigenPair> solve_generalized(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M, int k) {
    const int n = static_cast<int>(K.rows());
    if (K.cols() != n || M.rows() != n || M.cols() != n)
        fail(ErrorCode::DimensionMismatch, "solve_generalized: K and M must be square of equal size");
    if (k < 1 || k > n) fail(ErrorCode::Config, "solve_generalized: k out of range");

    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges;
    ges.compute(K, M, /*computeEigenvectors=*/true);
    if (ges.info() != Eigen::Success)
        fail(ErrorCode::NotConverged, "solve_generalized: QZ iteration failed to converge");

    const Eigen::VectorXcd alphas = ges.alphas();
    const Eigen::VectorXd betas = ges.betas();
    const double beta_max = betas.cwiseAbs().maxCoeff();
    if (beta_max == 0.0) fail(ErrorCode::Numerical, "solve_generalized: singular pencil (all beta = 0)");

    std::vector<EigenPair> finite;
    finite.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (std::abs(betas(i)) <= 1e-12 * beta_max) continue; // infinite eigenvalue
        EigenPair p;
        p.lambda = alphas(i) / betas(i);
        p.v = ges.eigenvectors().col(i);
        const double nrm = p.v.norm();
        if (nrm == 0.0) fail(ErrorCode::Numerical, "solve_generalized: zero eigenvector returned");
        p.v /= nrm;
        finite.push_back(std::move(p));
    }
    if (static_cast<int>(finite.size()) < k)
        fail(ErrorCode::Numerical, "solve_generalized: fewer finite eigenvalues than requested");

    std::stable_sort(finite.begin(), finite.end(),
                     [](const EigenPair& a, const EigenPair& b) { return eig_before(a.lambda, b.lambda); });
    finite.resize(static_cast<std::size_t>(k));

    const double scale = K.norm(); // Frobenius
    const double mnorm = M.norm();
    for (const EigenPair& p : finite) {
        const double res = (K * p.v - p.lambda * (M * p.v)).norm();
        if (res > 1e-8 * (scale + std::abs(p.lambda) * mnorm))
            fail(ErrorCode::Numerical, "solve_generalized: eigenpair residual check failed");
    }
    return finite;
}

EigenPair rightmost(const std::vector<EigenPair>& pairs) {
    if (pairs.empty()) fail(ErrorCode::Config, "rightmost: empty eigenpair list");
    const EigenPair* best = &pairs.front();
    for (const EigenPair& p : pairs)
        if (eig_before(p.lambda, best->lambda)) best = &p;
    return *best;
}

Eigen::VectorXcd align_eigvec(const Eigen::VectorXcd& v, const Eigen::VectorXcd& ref,
                              bool* undefined) {
    if (v.size() != ref.size()) fail(ErrorCode::DimensionMismatch, "align_eigvec: length mismatch");
    if (undefined) *undefined = false;
    const std::complex<double> ip = ref.dot(v); // conjugates ref
    if (std::abs(ip) < 1e-14) {
        if (undefined) *undefined = true;
        return v;
    }
    const std::complex<double> rot = std::polar(1.0, -std::arg(ip));
    return rot * v;
}

Eigen::VectorXcd canonicalize_phase(const Eigen::VectorXcd& v) {
    int imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (std::abs(v(imax)) == 0.0) return v;
    const std::complex<double> rot = std::polar(1.0, -std::arg(v(imax)));
    return rot * v;
}

} // namespace sgeig
