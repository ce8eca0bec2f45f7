#pragma once

#include "sgeig/dense_eig.hpp"
#include "sgeig/gpc.hpp"
#include "sgeig/operators.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sgeig {

// Ensemble of parameter points with the rightmost eigenpair at each point.
// Weights sum to 1 (uniform 1/n for Monte Carlo, quadrature weights for
// collocation).  Flagged entries mark failed eigensolves; their pair slots are
// empty and they are excluded from every estimate.
struct SampleSet {
    PolyFamily family = PolyFamily::Legendre;
    Eigen::MatrixXd points;       // n_q x m_xi
    Eigen::VectorXd weights;      // n_q, sums to 1
    std::vector<EigenPair> pairs; // n_q entries
    std::vector<char> flagged;    // n_q entries
    bool is_collocation = false;
    std::uint64_t seed = 0;
    EigenPair mean_pair; // rightmost of (K_1, M), canonical phase; alignment reference

    int size() const { return static_cast<int>(weights.size()); }
    int n_flagged() const;
};

// Monte Carlo: i.i.d. draws from the basis measure with per-sample RNG streams
// derived from (seed, sample index), so results are independent of thread
// scheduling.  Eigenvectors are aligned to the mean-problem eigenvector.
SampleSet run_mc(const AffineOperator& A, int n_samples, std::uint64_t seed, int threads = 1);

// Stochastic collocation: one solve per quadrature point, aligned as in run_mc.
SampleSet run_sc(const AffineOperator& A, const QuadratureRule& rule, int threads = 1);

// gPC coefficient tables of the rightmost eigenpair.
struct GpcCoefficients {
    GpcBasis basis;
    Eigen::VectorXcd lambda;   // n_xi
    Eigen::MatrixXcd vectors;  // n_x x n_xi; empty when not projected
    std::string method;        // "mc" | "sc" | "sg"
};

// Discrete projection lambda_k = sum_q w_q lambda(xi_q) psi_k(xi_q) (and the
// same per eigenvector entry).  A flagged collocation point is an error, since
// quadrature weights are not redundant; flagged Monte Carlo samples are
// excluded and the uniform weights renormalized.
GpcCoefficients project_coefficients(const SampleSet& set, const GpcBasis& basis,
                                     bool with_vectors = true);

// sum_k lambda_k psi_k(xi) for each row of xi_points.
Eigen::VectorXcd sample_gpc(const GpcCoefficients& coeffs, const Eigen::MatrixXd& xi_points);

// Weighted ensemble statistics over unflagged samples.
struct SampleStats {
    std::complex<double> mean;
    double std_re = 0.0, std_im = 0.0; // per-part standard deviation
    double se_re = 0.0, se_im = 0.0;   // per-part standard error of the mean
    int n_used = 0;
};
SampleStats sample_stats(const SampleSet& set);

// Gaussian kernel density estimate on a grid; samples are n x d with d in
// {1, 2}.  A nonpositive bandwidth entry selects Silverman's rule
// h_i = sigma_i (4 / ((d+2) n))^{1/(d+4)} for that dimension.
Eigen::VectorXd kde(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& grid,
                    Eigen::VectorXd bandwidth = Eigen::VectorXd());
Eigen::VectorXd silverman_bandwidth(const Eigen::MatrixXd& samples);

// CSV schemas (fixed column order):
//   samples:      xi_1..xi_m, re_lambda, im_lambda, flagged
//   coefficients: k, degree, re_lambda, im_lambda
void save_samples_csv(const SampleSet& set, const std::filesystem::path& file);
void save_coeff_csv(const GpcCoefficients& coeffs, const std::filesystem::path& file);

struct CoeffRow {
    int k = 0;
    int degree = 0;
    double re = 0.0;
    double im = 0.0;
};
std::vector<CoeffRow> load_coeff_csv(const std::filesystem::path& file);

} // namespace sgeig
