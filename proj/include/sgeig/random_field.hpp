#pragma once

#include "sgeig/gpc.hpp"

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace sgeig {

// Separable exponential covariance of the underlying Gaussian field:
//   C(X1, X2) = sigma_g^2 * exp(-|x2-x1|/L_x - |y2-y1|/L_y).
struct CovarianceKernel {
    double sigma_g = 1.0; // standard deviation of the Gaussian field
    double L_x = 0.25;    // correlation lengths (fractions of the unit domain)
    double L_y = 0.25;
};

double covariance(const CovarianceKernel& k, const Eigen::Vector2d& X1, const Eigen::Vector2d& X2);

// Quadrature grid carrying the discrete KL expansion: points in the plane
// with positive weights (cell measures).
struct FieldGrid {
    Eigen::MatrixX2d points; // n_pts x 2
    Eigen::VectorXd weights; // n_pts

    int size() const { return static_cast<int>(weights.size()); }
};

// Interior nodes of the unit interval/square with spacing h = 1/n and cell
// weights h^dims.  Ordering matches the synthetic operators: x-index fastest,
// y-index outer; 1D grids sit on the line y = 0.
FieldGrid interior_grid(int n, int dims);

// Discrete Karhunen-Loeve expansion: leading eigenpairs of the weighted
// covariance operator on the grid (Nystrom).
struct DiscreteKL {
    FieldGrid grid;
    Eigen::VectorXd lambda; // descending, nonnegative
    Eigen::MatrixXd modes;  // n_pts x n_modes, orthonormal in the weighted inner product
};

DiscreteKL discrete_kl(const CovarianceKernel& k, const FieldGrid& grid, int n_modes);

// Viscosity expansion on the grid.
//
// lognormal: nu(x, xi) = sum_l coeff(:, l) * psi_l(xi) with psi the
//   orthonormal Hermite functions of `indices` and xi standard Gaussian.
// affine:    nu(x, xi) = coeff(:, 0) + sum_j coeff(:, j) * xi_j with xi_j
//   independent uniform on (-1, 1); `indices` records the pairing
//   [zero, e_1, ..., e_m].
struct ViscosityExpansion {
    enum class Kind { Lognormal, Affine };

    Kind kind = Kind::Affine;
    PolyFamily family = PolyFamily::Legendre;
    int m_xi = 0;
    Eigen::MatrixXd coeff; // n_pts x n_nu
    std::vector<MultiIndex> indices;
    bool positivity_warning = false; // affine floor check (see affine_viscosity)

    int n_nu() const { return static_cast<int>(coeff.cols()); }
    int n_pts() const { return static_cast<int>(coeff.rows()); }

    // Pointwise field value at grid point i.
    double eval(int i, const Eigen::VectorXd& xi) const;

    // Coefficient field paired with the *orthonormal* basis function of the
    // given multi-index (converts the affine raw-xi pairing; zero vector if
    // the index is absent from the expansion).
    Eigen::VectorXd ortho_field(const MultiIndex& alpha) const;
};

// Coefficients of the truncated lognormal field exp(g(x, xi)) with
// g = g0(x) + sum_j g_j(x) xi_j:
//   nu_l(x) = (E[psi_l(eta)] / E[psi_l^2(eta)]) * exp(g0 + 1/2 sum_j g_j^2),
//   eta_j = xi_j - g_j(x),
// both expectations over the standard Gaussian law of xi by Gauss-Hermite
// quadrature.  `basis` must be Hermite; its index set must cover n_nu.
ViscosityExpansion lognormal_coeffs(const Eigen::VectorXd& g0, const Eigen::MatrixXd& g,
                                    const GpcBasis& basis, int n_nu);

// Affine uniform expansion: nu(x, xi) = nu1 + sigma_nu sum_l sqrt(3 lambda_l)
// v_l(x) xi_l with sigma_nu = CoV * nu1 and xi uniform on (-1, 1).
ViscosityExpansion affine_viscosity(double nu1, double cov, const DiscreteKL& kl, int m_xi);

// CSV I/O for grid fields, columns x,y,value.
void save_field_csv(const FieldGrid& grid, const Eigen::VectorXd& values,
                    const std::filesystem::path& file);
Eigen::VectorXd load_field_csv(const FieldGrid& grid, const std::filesystem::path& file);

} // namespace sgeig
