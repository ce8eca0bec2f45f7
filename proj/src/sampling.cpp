#include "sgeig/sampling.hpp"

#include "sgeig/errors.hpp"
#include "sgeig/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace sgeig {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Solve every sample of `points` in parallel, writing results into fixed
// per-sample slots so the outcome is schedule independent.
void solve_samples(const AffineOperator& A, SampleSet& set, int threads) {
    const int n = set.size();
    set.pairs.assign(static_cast<std::size_t>(n), EigenPair{});
    set.flagged.assign(static_cast<std::size_t>(n), 0);

    const Eigen::MatrixXd Md = Eigen::MatrixXd(A.mass);
    const auto worker = [&](std::atomic<int>& next) {
        for (;;) {
            const int q = next.fetch_add(1);
            if (q >= n) return;
            try {
                const Eigen::MatrixXd Kd =
                    Eigen::MatrixXd(sample_operator(A, set.points.row(q).transpose()));
                const auto pairs = solve_generalized(Kd, Md, static_cast<int>(Kd.rows()));
                EigenPair p = rightmost(pairs);
                p.v = align_eigvec(p.v, set.mean_pair.v);
                set.pairs[static_cast<std::size_t>(q)] = std::move(p);
            } catch (const std::exception&) {
                set.flagged[static_cast<std::size_t>(q)] = 1;
            }
        }
    };

    const int n_threads = std::max(1, std::min(threads, n));
    if (n_threads == 1) {
        std::atomic<int> next{0};
        worker(next);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back([&] { worker(next); });
        for (std::thread& t : pool) t.join();
    }
}

EigenPair mean_problem_pair(const AffineOperator& A) {
    const auto pairs =
        solve_generalized(Eigen::MatrixXd(A.terms[0]), Eigen::MatrixXd(A.mass), A.n_x());
    EigenPair p = rightmost(pairs);
    p.v = canonicalize_phase(p.v);
    return p;
}

} // namespace

int SampleSet::n_flagged() const {
    return static_cast<int>(std::count(flagged.begin(), flagged.end(), char(1)));
}

SampleSet run_mc(const AffineOperator& A, int n_samples, std::uint64_t seed, int threads) {
    if (n_samples < 1) fail(ErrorCode::Config, "run_mc: n_samples must be >= 1");

    SampleSet set;
    set.family = A.family;
    set.seed = seed;
    set.is_collocation = false;
    set.points.resize(n_samples, A.m_xi);
    for (int q = 0; q < n_samples; ++q) {
        RandomStream rs(seed, static_cast<std::uint64_t>(q));
        for (int j = 0; j < A.m_xi; ++j)
            set.points(q, j) = A.family == PolyFamily::Hermite ? rs.normal() : rs.uniform_sym();
    }
    set.weights = Eigen::VectorXd::Constant(n_samples, 1.0 / n_samples);
    set.mean_pair = mean_problem_pair(A);
    solve_samples(A, set, threads);
    return set;
}

SampleSet run_sc(const AffineOperator& A, const QuadratureRule& rule, int threads) {
    if (rule.dim() != A.m_xi)
        fail(ErrorCode::DimensionMismatch, "run_sc: rule dimension does not match the operator");
    if (std::abs(rule.weights.sum() - 1.0) > 1e-12)
        fail(ErrorCode::Config, "run_sc: quadrature weights must sum to 1");

    SampleSet set;
    set.family = A.family;
    set.is_collocation = true;
    set.points = rule.points;
    set.weights = rule.weights;
    set.mean_pair = mean_problem_pair(A);
    solve_samples(A, set, threads);
    return set;
}

GpcCoefficients project_coefficients(const SampleSet& set, const GpcBasis& basis,
                                     bool with_vectors) {
    if (basis.family != set.family)
        fail(ErrorCode::Config, "project_coefficients: basis family does not match the samples");
    if (basis.m_xi != set.points.cols())
        fail(ErrorCode::DimensionMismatch, "project_coefficients: basis dimension mismatch");
    const int n_flag = set.n_flagged();
    if (set.is_collocation && n_flag > 0)
        fail(ErrorCode::NotConverged,
             "project_coefficients: flagged collocation point invalidates the projection");
    const int n_used = set.size() - n_flag;
    if (n_used < 1) fail(ErrorCode::Config, "project_coefficients: no usable samples");

    // Monte Carlo: renormalize the uniform weights over the unflagged samples.
    const double renorm = set.is_collocation ? 1.0 : static_cast<double>(set.size()) / n_used;

    GpcCoefficients out;
    out.basis = basis;
    out.method = set.is_collocation ? "sc" : "mc";
    out.lambda = Eigen::VectorXcd::Zero(basis.size());
    int n_x = static_cast<int>(set.mean_pair.v.size());
    if (n_x == 0)
        for (int q = 0; q < set.size(); ++q)
            if (!set.flagged[static_cast<std::size_t>(q)]) {
                n_x = static_cast<int>(set.pairs[static_cast<std::size_t>(q)].v.size());
                break;
            }
    if (with_vectors) out.vectors = Eigen::MatrixXcd::Zero(n_x, basis.size());

    for (int q = 0; q < set.size(); ++q) {
        if (set.flagged[static_cast<std::size_t>(q)]) continue;
        const Eigen::VectorXd psi = eval_basis(basis, set.points.row(q).transpose());
        const double w = renorm * set.weights(q);
        const EigenPair& p = set.pairs[static_cast<std::size_t>(q)];
        out.lambda += (w * p.lambda) * psi.cast<std::complex<double>>();
        if (with_vectors) {
            if (p.v.size() != n_x)
                fail(ErrorCode::DimensionMismatch, "project_coefficients: eigenvector length mismatch");
            out.vectors += (w * p.v) * psi.transpose().cast<std::complex<double>>();
        }
    }
    return out;
}

Eigen::VectorXcd sample_gpc(const GpcCoefficients& coeffs, const Eigen::MatrixXd& xi_points) {
    if (xi_points.cols() != coeffs.basis.m_xi)
        fail(ErrorCode::DimensionMismatch, "sample_gpc: point dimension does not match the basis");
    Eigen::VectorXcd out(xi_points.rows());
    for (int q = 0; q < xi_points.rows(); ++q) {
        const Eigen::VectorXd psi = eval_basis(coeffs.basis, xi_points.row(q).transpose());
        out(q) = coeffs.lambda.cwiseProduct(psi.cast<std::complex<double>>()).sum();
    }
    return out;
}

SampleStats sample_stats(const SampleSet& set) {
    SampleStats s;
    double wsum = 0.0;
    for (int q = 0; q < set.size(); ++q)
        if (!set.flagged[static_cast<std::size_t>(q)]) {
            wsum += set.weights(q);
            ++s.n_used;
        }
    if (s.n_used == 0) fail(ErrorCode::Config, "sample_stats: no usable samples");

    std::complex<double> mean(0.0, 0.0);
    for (int q = 0; q < set.size(); ++q)
        if (!set.flagged[static_cast<std::size_t>(q)])
            mean += (set.weights(q) / wsum) * set.pairs[static_cast<std::size_t>(q)].lambda;
    s.mean = mean;

    if (s.n_used > 1) {
        double vre = 0.0, vim = 0.0;
        for (int q = 0; q < set.size(); ++q) {
            if (set.flagged[static_cast<std::size_t>(q)]) continue;
            const std::complex<double> d = set.pairs[static_cast<std::size_t>(q)].lambda - mean;
            vre += (set.weights(q) / wsum) * d.real() * d.real();
            vim += (set.weights(q) / wsum) * d.imag() * d.imag();
        }
        const double ddof = static_cast<double>(s.n_used) / (s.n_used - 1);
        s.std_re = std::sqrt(vre * ddof);
        s.std_im = std::sqrt(vim * ddof);
        s.se_re = s.std_re / std::sqrt(static_cast<double>(s.n_used));
        s.se_im = s.std_im / std::sqrt(static_cast<double>(s.n_used));
    }
    return s;
}

Eigen::VectorXd silverman_bandwidth(const Eigen::MatrixXd& samples) {
    const int n = static_cast<int>(samples.rows());
    const int d = static_cast<int>(samples.cols());
    if (n < 2) fail(ErrorCode::Config, "silverman_bandwidth: need at least 2 samples");
    Eigen::VectorXd h(d);
    const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
    for (int j = 0; j < d; ++j) {
        const double mean = samples.col(j).mean();
        const double var = (samples.col(j).array() - mean).square().sum() / (n - 1);
        if (!(var > 0.0))
            fail(ErrorCode::Numerical, "silverman_bandwidth: degenerate (zero-variance) samples");
        h(j) = std::sqrt(var) * factor;
    }
    return h;
}

Eigen::VectorXd kde(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& grid,
                    Eigen::VectorXd bandwidth) {
    const int n = static_cast<int>(samples.rows());
    const int d = static_cast<int>(samples.cols());
    if (d != 1 && d != 2) fail(ErrorCode::Config, "kde: sample dimension must be 1 or 2");
    if (n < 2) fail(ErrorCode::Config, "kde: need at least 2 samples");
    if (!samples.allFinite()) fail(ErrorCode::Config, "kde: non-finite samples");
    if (grid.cols() != d) fail(ErrorCode::DimensionMismatch, "kde: grid dimension mismatch");

    const Eigen::VectorXd silverman = silverman_bandwidth(samples);
    if (bandwidth.size() == 0) bandwidth = silverman;
    if (bandwidth.size() != d) fail(ErrorCode::DimensionMismatch, "kde: bandwidth dimension mismatch");
    for (int j = 0; j < d; ++j)
        if (!(bandwidth(j) > 0.0)) bandwidth(j) = silverman(j);

    double norm = static_cast<double>(n);
    for (int j = 0; j < d; ++j) norm *= bandwidth(j) / kInvSqrt2Pi;

    Eigen::VectorXd out(grid.rows());
    for (int g = 0; g < grid.rows(); ++g) {
        double acc = 0.0;
        if (d == 1) {
            const double x = grid(g, 0), h = bandwidth(0);
            for (int s = 0; s < n; ++s) {
                const double z = (x - samples(s, 0)) / h;
                acc += std::exp(-0.5 * z * z);
            }
        } else {
            const double x = grid(g, 0), y = grid(g, 1);
            const double hx = bandwidth(0), hy = bandwidth(1);
            for (int s = 0; s < n; ++s) {
                const double zx = (x - samples(s, 0)) / hx;
                const double zy = (y - samples(s, 1)) / hy;
                acc += std::exp(-0.5 * (zx * zx + zy * zy));
            }
        }
        out(g) = acc / norm;
    }
    return out;
}

void save_samples_csv(const SampleSet& set, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "save_samples_csv: cannot open " + file.string());
    const int m = static_cast<int>(set.points.cols());
    for (int j = 0; j < m; ++j) os << "xi_" << (j + 1) << ',';
    os << "re_lambda,im_lambda,flagged\n";
    char buf[64];
    for (int q = 0; q < set.size(); ++q) {
        for (int j = 0; j < m; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g,", set.points(q, j));
            os << buf;
        }
        const bool bad = set.flagged[static_cast<std::size_t>(q)] != 0;
        const std::complex<double> l = bad ? std::complex<double>(0, 0)
                                           : set.pairs[static_cast<std::size_t>(q)].lambda;
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", l.real(), l.imag(), bad ? 1 : 0);
        os << buf;
    }
    if (!os) fail(ErrorCode::Io, "save_samples_csv: write failure on " + file.string());
}

void save_coeff_csv(const GpcCoefficients& coeffs, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "save_coeff_csv: cannot open " + file.string());
    os << "k,degree,re_lambda,im_lambda\n";
    char buf[96];
    for (int k = 0; k < coeffs.lambda.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", k + 1, coeffs.basis.degree(k),
                      coeffs.lambda(k).real(), coeffs.lambda(k).imag());
        os << buf;
    }
    if (!os) fail(ErrorCode::Io, "save_coeff_csv: write failure on " + file.string());
}

std::vector<CoeffRow> load_coeff_csv(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) fail(ErrorCode::MissingFile, "load_coeff_csv: cannot open " + file.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("k,degree,re_lambda,im_lambda", 0) != 0)
        fail(ErrorCode::Parse, "load_coeff_csv: bad header in " + file.string());
    std::vector<CoeffRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        CoeffRow r;
        if (std::sscanf(line.c_str(), "%d,%d,%lg,%lg", &r.k, &r.degree, &r.re, &r.im) != 4)
            fail(ErrorCode::Parse, "load_coeff_csv: malformed row in " + file.string());
        rows.push_back(r);
    }
    return rows;
}

} // namespace sgeig
