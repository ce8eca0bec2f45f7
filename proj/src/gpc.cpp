#include "sgeig/gpc.hpp"

#include "sgeig/errors.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace sgeig {

std::string family_name(PolyFamily f) {
    return f == PolyFamily::Hermite ? "hermite" : "legendre";
}

PolyFamily family_from_name(const std::string& name) {
    if (name == "hermite") return PolyFamily::Hermite;
    if (name == "legendre") return PolyFamily::Legendre;
    fail(ErrorCode::Config, "unknown polynomial family '" + name + "' (expected hermite|legendre)");
}

std::int64_t binomial_checked(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        if (r > std::numeric_limits<std::int64_t>::max() / (n - k + i))
            fail(ErrorCode::Config, "binomial coefficient overflows the index type");
        r = r * (n - k + i) / i;
    }
    return r;
}

namespace {

void compositions_lex(int m, int d, MultiIndex& cur, int pos, int rem,
                      std::vector<MultiIndex>& out) {
    if (pos == m - 1) {
        cur[pos] = rem;
        out.push_back(cur);
        return;
    }
    for (int a = 0; a <= rem; ++a) {
        cur[pos] = a;
        compositions_lex(m, d, cur, pos + 1, rem - a, out);
    }
}

} // namespace

std::vector<MultiIndex> multi_index_set(int m, int p) {
    if (m < 1) fail(ErrorCode::Config, "multi_index_set: m_xi must be >= 1");
    if (p < 0) fail(ErrorCode::Config, "multi_index_set: degree must be >= 0");
    const std::int64_t n = binomial_checked(m + p, p);
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(n));
    MultiIndex cur(static_cast<std::size_t>(m), 0);
    for (int d = 0; d <= p; ++d) compositions_lex(m, d, cur, 0, d, out);
    return out;
}

GpcBasis make_basis(PolyFamily family, int m_xi, int p) {
    GpcBasis b;
    b.family = family;
    b.m_xi = m_xi;
    b.p = p;
    b.indices = multi_index_set(m_xi, p);
    return b;
}

int GpcBasis::degree(int k) const {
    const MultiIndex& a = indices.at(static_cast<std::size_t>(k));
    int d = 0;
    for (int ai : a) d += ai;
    return d;
}

double eval_poly1(PolyFamily family, int degree, double x) {
    if (degree < 0) fail(ErrorCode::Config, "eval_poly1: negative degree");
    if (!std::isfinite(x)) fail(ErrorCode::Config, "eval_poly1: non-finite argument");
    if (family == PolyFamily::Hermite) {
        // Orthonormal probabilists' Hermite via the normalized recurrence
        // h_{n+1} = (x h_n - sqrt(n) h_{n-1}) / sqrt(n+1).
        double hm = 0.0, h = 1.0;
        for (int n = 0; n < degree; ++n) {
            double hn = (x * h - std::sqrt(static_cast<double>(n)) * hm) /
                        std::sqrt(static_cast<double>(n + 1));
            hm = h;
            h = hn;
        }
        return h;
    }
    // Legendre, orthonormal under the uniform density on (-1,1).
    double pm = 0.0, p = 1.0;
    for (int n = 0; n < degree; ++n) {
        double pn = ((2.0 * n + 1.0) * x * p - n * pm) / (n + 1.0);
        pm = p;
        p = pn;
    }
    return p * std::sqrt(2.0 * degree + 1.0);
}

double eval_index(PolyFamily family, const MultiIndex& alpha, const Eigen::VectorXd& xi) {
    if (static_cast<int>(alpha.size()) != xi.size())
        fail(ErrorCode::DimensionMismatch, "eval_index: point dimension does not match index");
    double v = 1.0;
    for (int d = 0; d < xi.size(); ++d) v *= eval_poly1(family, alpha[static_cast<std::size_t>(d)], xi(d));
    return v;
}

Eigen::VectorXd eval_basis(const GpcBasis& basis, const Eigen::VectorXd& xi) {
    if (xi.size() != basis.m_xi)
        fail(ErrorCode::DimensionMismatch, "eval_basis: point dimension does not match basis");
    if (!xi.allFinite()) fail(ErrorCode::Config, "eval_basis: non-finite point");
    // Univariate values up to degree p per dimension, then products.
    Eigen::MatrixXd uni(basis.p + 1, basis.m_xi);
    for (int d = 0; d < basis.m_xi; ++d)
        for (int deg = 0; deg <= basis.p; ++deg) uni(deg, d) = eval_poly1(basis.family, deg, xi(d));
    Eigen::VectorXd out(basis.size());
    for (int k = 0; k < basis.size(); ++k) {
        double v = 1.0;
        const MultiIndex& a = basis.indices[static_cast<std::size_t>(k)];
        for (int d = 0; d < basis.m_xi; ++d) v *= uni(a[static_cast<std::size_t>(d)], d);
        out(k) = v;
    }
    return out;
}

void gauss_rule_1d(PolyFamily family, int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
    if (n < 1) fail(ErrorCode::Config, "gauss_rule_1d: need at least one node");
    if (n == 1) {
        x = Eigen::VectorXd::Zero(1);
        w = Eigen::VectorXd::Ones(1);
        return;
    }
    // Golub-Welsch on the symmetric Jacobi matrix of the monic recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double bk; // monic recurrence coefficient b_k
        if (family == PolyFamily::Hermite) {
            bk = static_cast<double>(k);
        } else {
            bk = static_cast<double>(k) * k / ((2.0 * k - 1.0) * (2.0 * k + 1.0));
        }
        const double off = std::sqrt(bk);
        J(k, k - 1) = off;
        J(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) fail(ErrorCode::Numerical, "gauss_rule_1d: Jacobi eigensolve failed");
    x = es.eigenvalues();
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        const double f = es.eigenvectors()(0, i);
        w(i) = f * f; // probability measure: mu_0 = 1
    }
    // Symmetric rules: clean up the middle node of odd rules to exactly 0.
    if (n % 2 == 1) x((n - 1) / 2) = 0.0;
}

QuadratureRule gauss_rule(PolyFamily family, int n_points, int m_xi) {
    if (m_xi < 1) fail(ErrorCode::Config, "gauss_rule: m_xi must be >= 1");
    Eigen::VectorXd x, w;
    gauss_rule_1d(family, n_points, x, w);
    const std::int64_t nq64 = [&] {
        std::int64_t v = 1;
        for (int d = 0; d < m_xi; ++d) {
            if (v > std::numeric_limits<std::int64_t>::max() / n_points)
                fail(ErrorCode::Config, "gauss_rule: tensor grid size overflow");
            v *= n_points;
        }
        return v;
    }();
    const int nq = static_cast<int>(nq64);
    QuadratureRule rule;
    rule.points.resize(nq, m_xi);
    rule.weights.resize(nq);
    std::vector<int> idx(static_cast<std::size_t>(m_xi), 0);
    for (int q = 0; q < nq; ++q) {
        double ww = 1.0;
        for (int d = 0; d < m_xi; ++d) {
            rule.points(q, d) = x(idx[static_cast<std::size_t>(d)]);
            ww *= w(idx[static_cast<std::size_t>(d)]);
        }
        rule.weights(q) = ww;
        for (int d = m_xi - 1; d >= 0; --d) { // odometer, last dimension fastest
            if (++idx[static_cast<std::size_t>(d)] < n_points) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return rule;
}

QuadratureRule smolyak_grid(PolyFamily family, int m_xi, int level) {
    if (m_xi < 1) fail(ErrorCode::Config, "smolyak_grid: m_xi must be >= 1");
    if (level < 1) fail(ErrorCode::Config, "smolyak_grid: level must be >= 1");
    const int q = m_xi + level - 1;
    const int lo = std::max(m_xi, q - m_xi + 1);

    std::vector<Eigen::VectorXd> nodes(static_cast<std::size_t>(q) + 1);
    std::vector<Eigen::VectorXd> wgts(static_cast<std::size_t>(q) + 1);
    for (int i = 1; i <= q; ++i) gauss_rule_1d(family, i, nodes[static_cast<std::size_t>(i)], wgts[static_cast<std::size_t>(i)]);

    std::vector<Eigen::VectorXd> pts;
    std::vector<double> ws;
    const double merge_tol = 1e-12;
    auto add_point = [&](const Eigen::VectorXd& p, double w) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if ((pts[i] - p).lpNorm<Eigen::Infinity>() <= merge_tol) {
                ws[i] += w;
                return;
            }
        }
        pts.push_back(p);
        ws.push_back(w);
    };

    // Enumerate level multi-indices i in [1..q]^m with lo <= |i| <= q in
    // lexicographic order (deterministic).
    std::vector<int> lev(static_cast<std::size_t>(m_xi), 1);
    auto advance = [&]() {
        for (int d = m_xi - 1; d >= 0; --d) {
            if (++lev[static_cast<std::size_t>(d)] <= q) return true;
            lev[static_cast<std::size_t>(d)] = 1;
        }
        return false;
    };
    do {
        int s = 0;
        for (int d = 0; d < m_xi; ++d) s += lev[static_cast<std::size_t>(d)];
        if (s < lo || s > q) continue;
        const double coef = ((q - s) % 2 == 0 ? 1.0 : -1.0) *
                            static_cast<double>(binomial_checked(m_xi - 1, q - s));
        // Tensor the univariate rules of these levels.
        std::vector<int> idx(static_cast<std::size_t>(m_xi), 0);
        bool more = true;
        while (more) {
            Eigen::VectorXd p(m_xi);
            double w = coef;
            for (int d = 0; d < m_xi; ++d) {
                const int li = lev[static_cast<std::size_t>(d)];
                p(d) = nodes[static_cast<std::size_t>(li)](idx[static_cast<std::size_t>(d)]);
                w *= wgts[static_cast<std::size_t>(li)](idx[static_cast<std::size_t>(d)]);
            }
            add_point(p, w);
            more = false;
            for (int d = m_xi - 1; d >= 0; --d) {
                if (++idx[static_cast<std::size_t>(d)] < lev[static_cast<std::size_t>(d)]) {
                    more = true;
                    break;
                }
                idx[static_cast<std::size_t>(d)] = 0;
            }
        }
    } while (advance());

    QuadratureRule rule;
    rule.points.resize(static_cast<int>(pts.size()), m_xi);
    rule.weights.resize(static_cast<int>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        rule.points.row(static_cast<int>(i)) = pts[i].transpose();
        rule.weights(static_cast<int>(i)) = ws[i];
    }
    return rule;
}

QuadratureRule default_triple_rule(const GpcBasis& basis) {
    return gauss_rule(basis.family, 3 * basis.p + 1, basis.m_xi);
}

std::int64_t TripleProductTensor::nonzeros() const {
    std::int64_t n = 0;
    for (const auto& h : H) n += h.nonZeros();
    return n;
}

TripleProductTensor triple_product_tensor(const GpcBasis& basis, int n_nu,
                                          const QuadratureRule& rule) {
    if (n_nu < 1) fail(ErrorCode::Config, "triple_product_tensor: n_nu must be >= 1");
    if (rule.dim() != basis.m_xi)
        fail(ErrorCode::DimensionMismatch, "triple_product_tensor: rule dimension mismatch");

    // Extended index set of the same family, graded order; grows in complete
    // degree blocks until it covers n_nu.
    int ext_deg = basis.p;
    while (binomial_checked(basis.m_xi + ext_deg, ext_deg) < n_nu) ++ext_deg;
    const std::vector<MultiIndex> ext = multi_index_set(basis.m_xi, ext_deg);

    const int n_xi = basis.size();
    const int nq = rule.size();

    // Basis and extended-set values at the quadrature points.
    Eigen::MatrixXd Psi(nq, n_xi);
    for (int q = 0; q < nq; ++q)
        Psi.row(q) = eval_basis(basis, rule.points.row(q).transpose()).transpose();
    Eigen::MatrixXd Ext(nq, n_nu);
    for (int l = 0; l < n_nu; ++l)
        for (int q = 0; q < nq; ++q)
            Ext(q, l) = eval_index(basis.family, ext[static_cast<std::size_t>(l)],
                                   rule.points.row(q).transpose());

    // Exactness precheck: the rule must reproduce orthonormality of the basis
    // and of the extension prefix.
    {
        Eigen::MatrixXd gram = Psi.transpose() * rule.weights.asDiagonal() * Psi;
        gram.diagonal().array() -= 1.0;
        if (gram.cwiseAbs().maxCoeff() > 1e-10)
            fail(ErrorCode::Config,
                 "triple_product_tensor: quadrature rule too weak (basis orthonormality violated)");
        Eigen::MatrixXd gram_ext = Ext.transpose() * rule.weights.asDiagonal() * Ext;
        gram_ext.diagonal().array() -= 1.0;
        if (gram_ext.cwiseAbs().maxCoeff() > 1e-10)
            fail(ErrorCode::Config,
                 "triple_product_tensor: quadrature rule too weak for the extended index set");
    }

    TripleProductTensor t;
    t.n_xi = n_xi;
    t.n_nu = n_nu;
    t.H.reserve(static_cast<std::size_t>(n_nu));
    for (int l = 0; l < n_nu; ++l) {
        Eigen::VectorXd wl = rule.weights.cwiseProduct(Ext.col(l));
        Eigen::MatrixXd dense = Psi.transpose() * wl.asDiagonal() * Psi;
        dense = 0.5 * (dense + dense.transpose().eval()); // exact stored symmetry
        Eigen::SparseMatrix<double> h(n_xi, n_xi);
        std::vector<Eigen::Triplet<double>> trips;
        for (int j = 0; j < n_xi; ++j)
            for (int k = 0; k < n_xi; ++k)
                if (std::abs(dense(j, k)) > t.drop_tol) trips.emplace_back(j, k, dense(j, k));
        h.setFromTriplets(trips.begin(), trips.end());
        h.makeCompressed();
        t.H.push_back(std::move(h));
    }
    return t;
}

void dump_tensor(const TripleProductTensor& t, std::ostream& os) {
    char buf[64];
    for (int l = 0; l < t.n_nu; ++l) {
        // Column-major sparse iteration gives (k outer, j inner); collect and
        // emit in (j, k) order for a stable, human-friendly dump.
        std::vector<std::tuple<int, int, double>> entries;
        for (int outer = 0; outer < t.H[static_cast<std::size_t>(l)].outerSize(); ++outer)
            for (Eigen::SparseMatrix<double>::InnerIterator it(t.H[static_cast<std::size_t>(l)], outer); it; ++it)
                entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        std::sort(entries.begin(), entries.end());
        for (const auto& [j, k, v] : entries) {
            std::snprintf(buf, sizeof(buf), "%d %d %d %.17g\n", l + 1, j + 1, k + 1, v);
            os << buf;
        }
    }
}

} // namespace sgeig
