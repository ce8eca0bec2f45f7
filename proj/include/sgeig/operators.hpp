#pragma once

#include "sgeig/gpc.hpp"
#include "sgeig/random_field.hpp"

#include <Eigen/SparseCore>
#include <filesystem>
#include <vector>

namespace sgeig {

// Affine operator expansion K(xi) = sum_l K_l psi_l(xi) together with the
// (symmetric, possibly indefinite) mass matrix of the pencil K(xi) v = lambda M v.
// Term l pairs with the l-th function of the graded basis described by
// (family, m_xi, p).
struct AffineOperator {
    std::vector<Eigen::SparseMatrix<double>> terms; // l = 1..n_nu (0-based storage)
    Eigen::SparseMatrix<double> mass;               // n_x x n_x, symmetric
    PolyFamily family = PolyFamily::Legendre;
    int m_xi = 0;
    int p = 0; // total degree of the generating expansion

    int n_x() const { return static_cast<int>(mass.rows()); }
    int n_nu() const { return static_cast<int>(terms.size()); }

    // Multi-indices paired with the terms: the first n_nu entries of the
    // graded index set over m_xi variables.
    std::vector<MultiIndex> term_indices() const;
};

// Shifted mass matrix [[-G, sigma B^T], [sigma B, 0]] of a saddle-point pencil
// with velocity mass G (n_u x n_u, SPD) and divergence B (n_p x n_u).
Eigen::SparseMatrix<double> shift_mass(const Eigen::SparseMatrix<double>& G,
                                       const Eigen::SparseMatrix<double>& B, double sigma);

// Deterministic wind field for the synthetic convection-diffusion generator.
struct WindSpec {
    enum class Kind { None, Constant, Vortex };

    Kind kind = Kind::None;
    double wx = 0.0, wy = 0.0; // constant wind components
    double amp = 0.0;          // vortex amplitude: w(x, y) = amp * (y - 1/2, 1/2 - x)

    static WindSpec none() { return {}; }
    static WindSpec constant(double wx, double wy);
    static WindSpec vortex(double amp);
};

// Finite-difference convection-diffusion operator on the interior nodes of the
// unit interval/square with spacing h = 1/n (homogeneous Dirichlet boundary):
//   K_l = diffusion stencil with coefficient field nu_l(x), l = 1..n_nu,
//   central-difference convection for the wind added to K_1 only,
//   M = -h^2 I.
// The viscosity grid must be interior_grid(n, 1) or interior_grid(n, 2).
AffineOperator synth_convection_diffusion(int n, const WindSpec& wind,
                                          const ViscosityExpansion& visc);

// K(xi) = sum_l K_l psi_l(xi).
Eigen::SparseMatrix<double> sample_operator(const AffineOperator& A, const Eigen::VectorXd& xi);

// Bundle I/O: a directory with a key=value manifest (n_x, n_nu, family, m_xi,
// p, mass = <file>, k_1..k_n_nu = <file>) and Matrix Market matrices.
void save_bundle(const AffineOperator& A, const std::filesystem::path& dir);
AffineOperator load_bundle(const std::filesystem::path& dir);

} // namespace sgeig
