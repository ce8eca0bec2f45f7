#include "sgeig/random_field.hpp"

#include "sgeig/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgeig {

double covariance(const CovarianceKernel& k, const Eigen::Vector2d& X1, const Eigen::Vector2d& X2) {
    if (!(k.sigma_g > 0.0) || !(k.L_x > 0.0) || !(k.L_y > 0.0))
        fail(ErrorCode::Config, "covariance: sigma_g, L_x, L_y must be positive");
    if (!X1.allFinite() || !X2.allFinite()) fail(ErrorCode::Config, "covariance: non-finite point");
    const double ex = std::abs(X2.x() - X1.x()) / k.L_x;
    const double ey = std::abs(X2.y() - X1.y()) / k.L_y;
    return k.sigma_g * k.sigma_g * std::exp(-ex - ey);
}

FieldGrid interior_grid(int n, int dims) {
    if (n < 2) fail(ErrorCode::Config, "interior_grid: n must be >= 2");
    if (dims != 1 && dims != 2) fail(ErrorCode::Config, "interior_grid: dims must be 1 or 2");
    const double h = 1.0 / n;
    const int ni = n - 1;
    FieldGrid g;
    if (dims == 1) {
        g.points.resize(ni, 2);
        g.weights = Eigen::VectorXd::Constant(ni, h);
        for (int i = 0; i < ni; ++i) {
            g.points(i, 0) = (i + 1) * h;
            g.points(i, 1) = 0.0;
        }
    } else {
        g.points.resize(ni * ni, 2);
        g.weights = Eigen::VectorXd::Constant(ni * ni, h * h);
        int r = 0;
        for (int iy = 1; iy <= ni; ++iy)
            for (int ix = 1; ix <= ni; ++ix, ++r) {
                g.points(r, 0) = ix * h;
                g.points(r, 1) = iy * h;
            }
    }
    return g;
}

DiscreteKL discrete_kl(const CovarianceKernel& k, const FieldGrid& grid, int n_modes) {
    const int n = grid.size();
    if (n < 1) fail(ErrorCode::Config, "discrete_kl: empty grid");
    if (n_modes < 1 || n_modes > n)
        fail(ErrorCode::Config, "discrete_kl: n_modes must be in [1, grid size]");

    Eigen::MatrixXd C(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = covariance(k, grid.points.row(i).transpose(), grid.points.row(j).transpose());
            C(i, j) = v;
            C(j, i) = v;
        }
    const Eigen::VectorXd sqw = grid.weights.cwiseSqrt();
    Eigen::MatrixXd B = sqw.asDiagonal() * C * sqw.asDiagonal();
    B = 0.5 * (B + B.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success) fail(ErrorCode::Numerical, "discrete_kl: eigendecomposition failed");

    const Eigen::VectorXd evals = es.eigenvalues(); // ascending
    const double lam_max = evals(n - 1);
    if (evals(0) < -1e-10 * std::max(lam_max, 1.0))
        fail(ErrorCode::Numerical, "discrete_kl: covariance matrix numerically indefinite");

    DiscreteKL kl;
    kl.grid = grid;
    kl.lambda.resize(n_modes);
    kl.modes.resize(n, n_modes);
    for (int m = 0; m < n_modes; ++m) {
        const int src = n - 1 - m; // descending order
        kl.lambda(m) = std::max(evals(src), 0.0);
        Eigen::VectorXd v = es.eigenvectors().col(src).cwiseQuotient(sqw);
        // deterministic sign: entry of largest magnitude positive
        int imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        kl.modes.col(m) = v;
    }
    return kl;
}

double ViscosityExpansion::eval(int i, const Eigen::VectorXd& xi) const {
    if (xi.size() != m_xi) fail(ErrorCode::DimensionMismatch, "ViscosityExpansion::eval: point dimension");
    if (kind == Kind::Affine) {
        double v = coeff(i, 0);
        for (int l = 1; l < n_nu(); ++l) v += coeff(i, l) * xi(l - 1);
        return v;
    }
    double v = 0.0;
    for (int l = 0; l < n_nu(); ++l)
        v += coeff(i, l) * eval_index(family, indices[static_cast<std::size_t>(l)], xi);
    return v;
}

Eigen::VectorXd ViscosityExpansion::ortho_field(const MultiIndex& alpha) const {
    if (kind == Kind::Lognormal) {
        for (int l = 0; l < n_nu(); ++l)
            if (indices[static_cast<std::size_t>(l)] == alpha) return coeff.col(l);
        return Eigen::VectorXd::Zero(n_pts());
    }
    // affine: constant term, or e_j paired with xi_j = psi_{e_j}/sqrt(3)
    int total = 0;
    int var = -1;
    for (std::size_t d = 0; d < alpha.size(); ++d) {
        total += alpha[d];
        if (alpha[d] == 1) var = static_cast<int>(d);
    }
    if (total == 0) return coeff.col(0);
    if (total == 1 && var >= 0 && var + 1 < n_nu())
        return coeff.col(var + 1) / std::sqrt(3.0);
    return Eigen::VectorXd::Zero(n_pts());
}

ViscosityExpansion lognormal_coeffs(const Eigen::VectorXd& g0, const Eigen::MatrixXd& g,
                                    const GpcBasis& basis, int n_nu) {
    if (basis.family != PolyFamily::Hermite)
        fail(ErrorCode::Config, "lognormal_coeffs: requires a Hermite basis");
    if (n_nu < 1 || n_nu > basis.size())
        fail(ErrorCode::Config, "lognormal_coeffs: n_nu must lie within the basis index set");
    const int n_pts = static_cast<int>(g0.size());
    if (g.rows() != n_pts || g.cols() != basis.m_xi)
        fail(ErrorCode::DimensionMismatch, "lognormal_coeffs: field shapes inconsistent");
    if (!g0.allFinite() || !g.allFinite()) fail(ErrorCode::Config, "lognormal_coeffs: non-finite fields");

    int max_deg = 0;
    for (int l = 0; l < n_nu; ++l) {
        int d = 0;
        for (int a : basis.indices[static_cast<std::size_t>(l)]) d += a;
        max_deg = std::max(max_deg, d);
    }
    // exact to degree >= 2*deg + 2
    const QuadratureRule rule = gauss_rule(PolyFamily::Hermite, max_deg + 2, basis.m_xi);

    ViscosityExpansion out;
    out.kind = ViscosityExpansion::Kind::Lognormal;
    out.family = PolyFamily::Hermite;
    out.m_xi = basis.m_xi;
    out.coeff.resize(n_pts, n_nu);
    out.indices.assign(basis.indices.begin(), basis.indices.begin() + n_nu);

    Eigen::VectorXd eta(basis.m_xi);
    for (int i = 0; i < n_pts; ++i) {
        const double factor = std::exp(g0(i) + 0.5 * g.row(i).squaredNorm());
        for (int l = 0; l < n_nu; ++l) {
            double num = 0.0, den = 0.0;
            for (int q = 0; q < rule.size(); ++q) {
                eta = rule.points.row(q).transpose() - g.row(i).transpose();
                const double v = eval_index(PolyFamily::Hermite, out.indices[static_cast<std::size_t>(l)], eta);
                num += rule.weights(q) * v;
                den += rule.weights(q) * v * v;
            }
            out.coeff(i, l) = num / den * factor;
        }
    }
    return out;
}

ViscosityExpansion affine_viscosity(double nu1, double cov, const DiscreteKL& kl, int m_xi) {
    if (!(nu1 > 0.0)) fail(ErrorCode::Config, "affine_viscosity: mean viscosity must be positive");
    if (cov < 0.0 || cov >= 1.0) fail(ErrorCode::Config, "affine_viscosity: CoV must lie in [0, 1)");
    const int n_pts = kl.grid.size();

    ViscosityExpansion out;
    out.kind = ViscosityExpansion::Kind::Affine;
    out.family = PolyFamily::Legendre;
    out.m_xi = m_xi;
    out.indices.push_back(MultiIndex(static_cast<std::size_t>(m_xi), 0));
    if (cov == 0.0) {
        out.coeff = Eigen::MatrixXd::Constant(n_pts, 1, nu1);
        return out;
    }
    if (kl.lambda.size() < m_xi)
        fail(ErrorCode::Config, "affine_viscosity: KL expansion has fewer modes than m_xi");

    const double sigma_nu = cov * nu1;
    out.coeff.resize(n_pts, m_xi + 1);
    out.coeff.col(0).setConstant(nu1);
    for (int l = 0; l < m_xi; ++l) {
        out.coeff.col(l + 1) = sigma_nu * std::sqrt(3.0 * kl.lambda(l)) * kl.modes.col(l);
        MultiIndex e(static_cast<std::size_t>(m_xi), 0);
        e[static_cast<std::size_t>(l)] = 1;
        out.indices.push_back(e);
    }
    // positivity floor: nu1 - sigma_nu * sum_l sqrt(3 lambda_l)|v_l| over the grid
    Eigen::VectorXd floor_vals = Eigen::VectorXd::Constant(n_pts, nu1);
    for (int l = 0; l < m_xi; ++l) floor_vals -= out.coeff.col(l + 1).cwiseAbs();
    if (floor_vals.minCoeff() <= 0.0) out.positivity_warning = true;
    return out;
}

void save_field_csv(const FieldGrid& grid, const Eigen::VectorXd& values,
                    const std::filesystem::path& file) {
    if (values.size() != grid.size())
        fail(ErrorCode::DimensionMismatch, "save_field_csv: value count does not match grid");
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "save_field_csv: cannot open " + file.string());
    os << "x,y,value\n";
    char buf[128];
    for (int i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid.points(i, 0), grid.points(i, 1),
                      values(i));
        os << buf;
    }
    if (!os) fail(ErrorCode::Io, "save_field_csv: write failure on " + file.string());
}

Eigen::VectorXd load_field_csv(const FieldGrid& grid, const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) fail(ErrorCode::MissingFile, "load_field_csv: cannot open " + file.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("x,y,value", 0) != 0)
        fail(ErrorCode::Parse, "load_field_csv: bad header in " + file.string());
    Eigen::VectorXd values(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        if (!std::getline(is, line))
            fail(ErrorCode::Parse, "load_field_csv: truncated file " + file.string());
        double x, y, v;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &x, &y, &v) != 3)
            fail(ErrorCode::Parse, "load_field_csv: malformed row in " + file.string());
        if (std::abs(x - grid.points(i, 0)) > 1e-12 || std::abs(y - grid.points(i, 1)) > 1e-12)
            fail(ErrorCode::Parse, "load_field_csv: grid mismatch in " + file.string());
        values(i) = v;
    }
    return values;
}

} // namespace sgeig
