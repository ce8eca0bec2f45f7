#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sgeig {

enum class PolyFamily { Hermite, Legendre };

std::string family_name(PolyFamily f);
PolyFamily family_from_name(const std::string& name);

using MultiIndex = std::vector<int>;

// All multi-indices alpha in N^m with |alpha| <= p, graded lexicographic:
// sorted by total degree, ties broken by ascending lexicographic comparison.
// The zero index comes first.
std::vector<MultiIndex> multi_index_set(int m, int p);

// Orthonormal gPC basis: probabilists' Hermite polynomials normalized under
// the standard Gaussian measure, or Legendre polynomials normalized under
// the uniform measure on (-1,1).  psi_1 == 1.
struct GpcBasis {
    PolyFamily family = PolyFamily::Legendre;
    int m_xi = 0;
    int p = 0;
    std::vector<MultiIndex> indices;

    int size() const { return static_cast<int>(indices.size()); }
    int degree(int k) const; // total degree of basis function k (0-based)
};

GpcBasis make_basis(PolyFamily family, int m_xi, int p);

// Univariate orthonormal polynomial value of the given degree.
double eval_poly1(PolyFamily family, int degree, double x);

// Values of all n basis functions at one point xi (length m_xi).
Eigen::VectorXd eval_basis(const GpcBasis& basis, const Eigen::VectorXd& xi);

// Value of the (possibly extended-set) multivariate polynomial with the
// given multi-index at xi.
double eval_index(PolyFamily family, const MultiIndex& alpha, const Eigen::VectorXd& xi);

// Quadrature rule for the basis probability measure; weights sum to 1.
struct QuadratureRule {
    Eigen::MatrixXd points;  // n_q x m
    Eigen::VectorXd weights; // n_q

    int size() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

// Univariate Gauss rule with n nodes for the family's probability density.
void gauss_rule_1d(PolyFamily family, int n, Eigen::VectorXd& x, Eigen::VectorXd& w);

// Full tensor rule with n_points nodes per dimension.
QuadratureRule gauss_rule(PolyFamily family, int n_points, int m_xi);

// Smolyak sparse grid.  Linear growth: the univariate rule at level i has i
// Gauss nodes; level L combines tensor grids with m <= |i| <= m+L-1 using the
// standard combination coefficients.  Duplicate points (coordinates equal
// within 1e-12) are merged with summed weights.
QuadratureRule smolyak_grid(PolyFamily family, int m_xi, int level);

// Triple products h_{l,jk} = E[psi_l psi_j psi_k] for l = 1..n_nu (extended
// index set of the same family, graded order), j,k = 1..n_xi.  Slices are
// sparse symmetric n_xi x n_xi; entries below the drop tolerance are not
// stored.  H_1 is the identity.
struct TripleProductTensor {
    int n_xi = 0;
    int n_nu = 0;
    double drop_tol = 1e-12;
    std::vector<Eigen::SparseMatrix<double>> H; // size n_nu

    std::int64_t nonzeros() const;
};

TripleProductTensor triple_product_tensor(const GpcBasis& basis, int n_nu,
                                          const QuadratureRule& rule);

// Tensor rule with exactness degree >= 3*(2p) covering the extended index set;
// the default input for triple_product_tensor.
QuadratureRule default_triple_rule(const GpcBasis& basis);

// Diagnostic dump: one "l j k value" line per stored entry, 1-based indices,
// ordered by (l, j, k).
void dump_tensor(const TripleProductTensor& t, std::ostream& os);

// C(n, k) with overflow detection (throws Error(Config) on overflow).
std::int64_t binomial_checked(int n, int k);

} // namespace sgeig
