#include "doctest.h"

#include "sgeig/errors.hpp"
#include "sgeig/rng.hpp"
#include "sgeig/sampling.hpp"

#include <cmath>
#include <complex>
#include <fstream>

using namespace sgeig;
using cd = std::complex<double>;

namespace {

AffineOperator unit_operator_1d(int n) {
    DiscreteKL dummy;
    dummy.grid = interior_grid(n, 1);
    return synth_convection_diffusion(n, WindSpec::none(), affine_viscosity(1.0, 0.0, dummy, 1));
}

AffineOperator affine_operator(int n, int m, double cov, double wind_amp = 0.0) {
    CovarianceKernel kern;
    kern.L_x = 0.125;
    kern.L_y = 0.25;
    const DiscreteKL kl = discrete_kl(kern, interior_grid(n, 2), m);
    const ViscosityExpansion visc = affine_viscosity(1.0, cov, kl, m);
    const WindSpec w = wind_amp == 0.0 ? WindSpec::none() : WindSpec::vortex(wind_amp);
    return synth_convection_diffusion(n, w, visc);
}

// Collocation-shaped sample set with an injected scalar functional.
template <typename Fn>
SampleSet inject_functional(const QuadratureRule& rule, PolyFamily family, Fn&& f) {
    SampleSet set;
    set.family = family;
    set.is_collocation = true;
    set.points = rule.points;
    set.weights = rule.weights;
    set.flagged.assign(static_cast<std::size_t>(rule.size()), 0);
    for (int q = 0; q < rule.size(); ++q) {
        EigenPair p;
        p.lambda = f(rule.points.row(q).transpose());
        p.v = Eigen::VectorXcd::Zero(1);
        set.pairs.push_back(std::move(p));
    }
    return set;
}

} // namespace

TEST_CASE("run_mc: deterministic seeding, schedule independence, trivial operator") {
    const AffineOperator A = unit_operator_1d(5);
    const SampleSet set = run_mc(A, 16, 2024);
    REQUIRE(set.size() == 16);
    CHECK(set.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(set.n_flagged() == 0);

    // single-term operator: every sample equals the mean-problem eigenvalue
    for (const auto& p : set.pairs) {
        CHECK(std::abs(p.lambda - set.mean_pair.lambda) < 1e-12 * std::abs(set.mean_pair.lambda));
        CHECK(std::abs(p.lambda.imag()) < 1e-12);
    }

    // bit-identical re-run, also under thread parallelism
    const SampleSet again = run_mc(A, 16, 2024);
    const SampleSet threaded = run_mc(A, 16, 2024, 4);
    CHECK((set.points - again.points).cwiseAbs().maxCoeff() == 0.0);
    CHECK((set.points - threaded.points).cwiseAbs().maxCoeff() == 0.0);
    for (int q = 0; q < 16; ++q) {
        CHECK(set.pairs[q].lambda == again.pairs[q].lambda);
        CHECK(set.pairs[q].lambda == threaded.pairs[q].lambda);
        CHECK((set.pairs[q].v - threaded.pairs[q].v).norm() == 0.0);
    }

    // a different seed moves the points
    const SampleSet other = run_mc(A, 16, 2025);
    CHECK((set.points - other.points).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("run_mc: draws follow the basis measure") {
    // Legendre family: uniform on (-1, 1)
    const AffineOperator A = affine_operator(4, 2, 0.01);
    SampleSet set;
    {
        // only the points matter here; use a tiny ensemble of actual solves
        // plus a larger raw sample of the generator path
        set = run_mc(A, 400, 7);
    }
    CHECK(set.points.minCoeff() > -1.0);
    CHECK(set.points.maxCoeff() < 1.0);
    const double mean = set.points.mean();
    CHECK(std::abs(mean) < 3.0 * std::sqrt((1.0 / 3.0) / 800.0));

    // Hermite family: standard normal
    const GpcBasis hb = make_basis(PolyFamily::Hermite, 1, 2);
    const FieldGrid grid = interior_grid(5, 1);
    Eigen::VectorXd g0 = Eigen::VectorXd::Zero(grid.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(grid.size(), 1, 0.1);
    const ViscosityExpansion visc = lognormal_coeffs(g0, g, hb, hb.size());
    const AffineOperator H = synth_convection_diffusion(5, WindSpec::none(), visc);
    const SampleSet hset = run_mc(H, 2000, 11);
    const double hmean = hset.points.mean();
    const double hvar = (hset.points.array() - hmean).square().mean();
    CHECK(std::abs(hmean) < 3.0 / std::sqrt(2000.0));
    CHECK(hvar == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("run_sc: level-4 Smolyak has 29 solves; one-point rule reproduces the mean problem") {
    const AffineOperator A = affine_operator(4, 2, 0.1);
    const QuadratureRule grid = smolyak_grid(PolyFamily::Legendre, 2, 4);
    const SampleSet set = run_sc(A, grid);
    REQUIRE(set.size() == 29);
    CHECK(std::abs(set.weights.sum() - 1.0) < 1e-12);
    CHECK(set.n_flagged() == 0);

    const QuadratureRule one = smolyak_grid(PolyFamily::Legendre, 2, 1);
    const SampleSet mset = run_sc(A, one);
    const GpcBasis constant = make_basis(PolyFamily::Legendre, 2, 0);
    const GpcCoefficients c = project_coefficients(mset, constant);
    CHECK(std::abs(c.lambda(0) - mset.mean_pair.lambda) < 1e-12 * std::abs(mset.mean_pair.lambda));
    CHECK((c.vectors.col(0) - mset.mean_pair.v).norm() < 1e-12);

    // dimension mismatch between rule and operator
    CHECK_THROWS_AS(run_sc(A, smolyak_grid(PolyFamily::Legendre, 3, 2)), Error);
}

TEST_CASE("project_coefficients: constant and injected-functional oracles") {
    const GpcBasis basis = make_basis(PolyFamily::Legendre, 2, 3);
    const QuadratureRule rule = gauss_rule(PolyFamily::Legendre, 4, 2);

    // constant functional
    const SampleSet cset = inject_functional(rule, PolyFamily::Legendre,
                                             [](const Eigen::VectorXd&) { return cd(2.5, -0.5); });
    const GpcCoefficients cc = project_coefficients(cset, basis, false);
    CHECK(std::abs(cc.lambda(0) - cd(2.5, -0.5)) < 1e-12);
    for (int k = 1; k < basis.size(); ++k) CHECK(std::abs(cc.lambda(k)) < 1e-12);

    // lambda(xi) = psi_2(xi): projection returns e_2
    const SampleSet pset = inject_functional(rule, PolyFamily::Legendre, [&](const Eigen::VectorXd& xi) {
        return cd(eval_basis(basis, xi)(1), 0.0);
    });
    const GpcCoefficients pc = project_coefficients(pset, basis, false);
    for (int k = 0; k < basis.size(); ++k)
        CHECK(std::abs(pc.lambda(k) - (k == 1 ? cd(1, 0) : cd(0, 0))) < 1e-10);

    // permutation invariance of the weighted sum
    SampleSet perm = pset;
    const int n = perm.size();
    for (int q = 0; q < n / 2; ++q) {
        perm.points.row(q).swap(perm.points.row(n - 1 - q));
        std::swap(perm.weights(q), perm.weights(n - 1 - q));
        std::swap(perm.pairs[q], perm.pairs[n - 1 - q]);
    }
    const GpcCoefficients pcp = project_coefficients(perm, basis, false);
    CHECK((pcp.lambda - pc.lambda).cwiseAbs().maxCoeff() < 1e-12);

    // flagged collocation point is fatal
    SampleSet bad = pset;
    bad.flagged[3] = 1;
    try {
        project_coefficients(bad, basis, false);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotConverged);
    }
}

TEST_CASE("project_coefficients: Monte Carlo CLT bound and flagged exclusion") {
    const GpcBasis basis = make_basis(PolyFamily::Legendre, 1, 2);
    const int n = 100000;
    SampleSet set;
    set.family = PolyFamily::Legendre;
    set.is_collocation = false;
    set.points.resize(n, 1);
    set.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    set.flagged.assign(n, 0);
    RandomStream rs(515, 0);
    std::vector<double> prods;
    prods.reserve(n);
    for (int q = 0; q < n; ++q) {
        set.points(q, 0) = rs.uniform_sym();
        EigenPair p;
        const double psi2 = eval_basis(basis, set.points.row(q).transpose())(1);
        p.lambda = cd(psi2, 0.0);
        p.v = Eigen::VectorXcd::Zero(1);
        set.pairs.push_back(std::move(p));
        prods.push_back(psi2 * psi2);
    }
    const GpcCoefficients c = project_coefficients(set, basis, false);
    double pm = 0.0, pv = 0.0;
    for (double x : prods) pm += x;
    pm /= n;
    for (double x : prods) pv += (x - pm) * (x - pm);
    pv /= (n - 1);
    CHECK(std::abs(c.lambda(1).real() - 1.0) < 3.0 * std::sqrt(pv / n));

    // flagging half the samples renormalizes the estimate instead of biasing it
    SampleSet half = set;
    for (int q = 0; q < n; q += 2) half.flagged[q] = 1;
    const GpcCoefficients ch = project_coefficients(half, basis, false);
    CHECK(std::abs(ch.lambda(1).real() - 1.0) < 0.05);

    const SampleStats st = sample_stats(half);
    CHECK(st.n_used == n / 2);
}

TEST_CASE("sample_gpc: constants, linearity, evaluate-project round trip") {
    const GpcBasis basis = make_basis(PolyFamily::Legendre, 2, 3);
    GpcCoefficients c;
    c.basis = basis;
    c.method = "sc";
    c.lambda = Eigen::VectorXcd::Zero(basis.size());
    c.lambda(0) = cd(3.25, 1.5);

    Eigen::MatrixXd pts(3, 2);
    pts << 0.1, -0.2, 0.9, 0.4, -0.7, 0.0;
    const Eigen::VectorXcd vals = sample_gpc(c, pts);
    for (int q = 0; q < 3; ++q) CHECK(std::abs(vals(q) - cd(3.25, 1.5)) < 1e-14);

    // linearity
    RandomStream rs(88, 3);
    GpcCoefficients a = c, b = c;
    for (int k = 0; k < basis.size(); ++k) {
        a.lambda(k) = cd(rs.normal(), rs.normal());
        b.lambda(k) = cd(rs.normal(), rs.normal());
    }
    GpcCoefficients both = c;
    both.lambda = 2.0 * a.lambda + 0.5 * b.lambda;
    const Eigen::VectorXcd va = sample_gpc(a, pts), vb = sample_gpc(b, pts),
                          vc = sample_gpc(both, pts);
    CHECK((vc - (2.0 * va + 0.5 * vb)).cwiseAbs().maxCoeff() < 1e-13);

    // evaluate at an exact rule, project back, recover the coefficients
    const QuadratureRule rule = gauss_rule(PolyFamily::Legendre, 4, 2);
    const Eigen::VectorXcd on_rule = sample_gpc(a, rule.points);
    SampleSet set;
    set.family = PolyFamily::Legendre;
    set.is_collocation = true;
    set.points = rule.points;
    set.weights = rule.weights;
    set.flagged.assign(rule.size(), 0);
    for (int q = 0; q < rule.size(); ++q) {
        EigenPair p;
        p.lambda = on_rule(q);
        p.v = Eigen::VectorXcd::Zero(1);
        set.pairs.push_back(std::move(p));
    }
    const GpcCoefficients back = project_coefficients(set, basis, false);
    CHECK((back.lambda - a.lambda).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eigenvector coefficients are reproducible under injected phases") {
    const AffineOperator A = affine_operator(5, 2, 0.1, 15.0);
    const QuadratureRule rule = smolyak_grid(PolyFamily::Legendre, 2, 3);
    const SampleSet set = run_sc(A, rule);
    const GpcBasis basis = make_basis(PolyFamily::Legendre, 2, 2);
    const GpcCoefficients ref = project_coefficients(set, basis);

    // re-derive the coefficients after scrambling every sample's phase
    RandomStream rs(4242, 0);
    SampleSet scrambled = set;
    for (auto& p : scrambled.pairs) {
        const cd rot = std::polar(1.0, 2.0 * M_PI * rs.uniform01());
        p.v = align_eigvec(rot * p.v, set.mean_pair.v);
    }
    const GpcCoefficients redo = project_coefficients(scrambled, basis);
    CHECK((redo.vectors - ref.vectors).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((redo.lambda - ref.lambda).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("affine coefficients scale linearly as CoV -> 0") {
    const QuadratureRule rule = smolyak_grid(PolyFamily::Legendre, 2, 3);
    const GpcBasis basis = make_basis(PolyFamily::Legendre, 2, 2);
    double prev_max = 0.0;
    std::vector<double> maxima;
    for (double cov : {1e-3, 1e-4}) {
        const AffineOperator A = affine_operator(4, 2, cov);
        const GpcCoefficients c = project_coefficients(run_sc(A, rule), basis, false);
        double mx = 0.0;
        for (int k = 1; k < basis.size(); ++k) mx = std::max(mx, std::abs(c.lambda(k)));
        maxima.push_back(mx);
        prev_max = mx;
    }
    (void)prev_max;
    const double ratio = maxima[0] / maxima[1];
    CHECK(ratio > 8.0);
    CHECK(ratio < 12.0);
}

TEST_CASE("kde: normal density, normalization, symmetry, degeneracy") {
    RandomStream rs(31337, 0);
    const int n_big = 1000000;
    Eigen::MatrixXd draws(n_big, 1);
    for (int i = 0; i < n_big; ++i) draws(i, 0) = rs.normal();

    Eigen::MatrixXd origin(1, 1);
    origin << 0.0;
    const double at0 = kde(draws, origin)(0);
    CHECK(std::abs(at0 - 0.39894) < 0.01);

    // trapezoid integral over a wide grid
    const int n_mid = 100000;
    const Eigen::MatrixXd mid = draws.topRows(n_mid);
    const int g = 401;
    Eigen::MatrixXd grid(g, 1);
    for (int i = 0; i < g; ++i) grid(i, 0) = -5.0 + 10.0 * i / (g - 1);
    const Eigen::VectorXd dens = kde(mid, grid);
    CHECK(dens.minCoeff() >= 0.0);
    double integral = 0.0;
    const double dx = 10.0 / (g - 1);
    for (int i = 0; i + 1 < g; ++i) integral += 0.5 * (dens(i) + dens(i + 1)) * dx;
    CHECK(integral >= 0.98);
    CHECK(integral <= 1.0);

    // mirrored samples on a symmetric grid
    Eigen::MatrixXd sym(2000, 1);
    for (int i = 0; i < 1000; ++i) {
        const double x = rs.normal();
        sym(2 * i, 0) = x;
        sym(2 * i + 1, 0) = -x;
    }
    const Eigen::VectorXd sd = kde(sym, grid);
    for (int i = 0; i < g; ++i) CHECK(std::abs(sd(i) - sd(g - 1 - i)) < 1e-12);

    // degenerate data
    Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(10, 1);
    try {
        kde(flat, grid);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Numerical);
    }

    // 2D sanity: product normal peak near 1/(2 pi)
    Eigen::MatrixXd d2(20000, 2);
    for (int i = 0; i < 20000; ++i) {
        d2(i, 0) = rs.normal();
        d2(i, 1) = rs.normal();
    }
    Eigen::MatrixXd o2(1, 2);
    o2 << 0.0, 0.0;
    CHECK(std::abs(kde(d2, o2)(0) - 0.15915) < 0.015);
}

TEST_CASE("samples and coefficient CSV round trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "sgeig_sampling_csv";
    fs::create_directories(dir);

    const AffineOperator A = affine_operator(4, 2, 0.1);
    const SampleSet set = run_sc(A, smolyak_grid(PolyFamily::Legendre, 2, 2));
    save_samples_csv(set, dir / "samples.csv");
    std::ifstream is(dir / "samples.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "xi_1,xi_2,re_lambda,im_lambda,flagged");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == set.size());

    const GpcBasis basis = make_basis(PolyFamily::Legendre, 2, 2);
    const GpcCoefficients c = project_coefficients(set, basis, false);
    save_coeff_csv(c, dir / "coeff.csv");
    const auto loaded = load_coeff_csv(dir / "coeff.csv");
    REQUIRE(static_cast<int>(loaded.size()) == basis.size());
    for (int k = 0; k < basis.size(); ++k) {
        CHECK(loaded[k].k == k + 1);
        CHECK(loaded[k].degree == basis.degree(k));
        CHECK(loaded[k].re == c.lambda(k).real()); // %.17g round trip
        CHECK(loaded[k].im == c.lambda(k).imag());
    }
    CHECK_THROWS_AS(load_coeff_csv(dir / "nope.csv"), Error);
    fs::remove_all(dir);
}
