#include "sgeig/precond.hpp"

#include "sgeig/errors.hpp"

#include <Eigen/SparseLU>
#include <iostream>
#include <utility>
#include <vector>

namespace sgeig {

void Preconditioner::update(const SGEigenState&) {}
std::int64_t Preconditioner::term_mults() const { return 0; }
bool Preconditioner::last_update_rejected() const { return false; }
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> Preconditioner::smw_factors() const { return {}; }

std::string precond_name(PrecondKind kind) {
    switch (kind) {
    case PrecondKind::MB: return "MB";
    case PrecondKind::cMB: return "cMB";
    case PrecondKind::cMBu: return "cMBu";
    case PrecondKind::chGS: return "chGS";
    }
    fail(ErrorCode::Config, "precond_name: unknown kind");
}

PrecondKind precond_from_name(const std::string& name) {
    if (name == "MB") return PrecondKind::MB;
    if (name == "cMB") return PrecondKind::cMB;
    if (name == "cMBu") return PrecondKind::cMBu;
    if (name == "chGS") return PrecondKind::chGS;
    fail(ErrorCode::Config, "unknown preconditioner '" + name + "' (use MB, cMB, cMBu or chGS)");
}

PrecondConfig precond_defaults(PrecondKind kind, int p) {
    PrecondConfig cfg;
    cfg.kind = kind;
    const bool mb = kind == PrecondKind::MB;
    cfg.eps_re = mb ? 0.97 : 1.0;
    cfg.eps_im = mb ? 0.97 : 1.0;
    cfg.p_t = kind == PrecondKind::chGS ? p : 0;
    cfg.update = kind == PrecondKind::cMBu || kind == PrecondKind::chGS;
    return cfg;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_eps(const PrecondConfig& cfg) {
    if (!(cfg.eps_re >= 0.0 && cfg.eps_re <= 1.0) || !(cfg.eps_im >= 0.0 && cfg.eps_im <= 1.0))
        fail(ErrorCode::Config, "preconditioner shift scales must satisfy 0 <= eps <= 1");
}

void append_block(std::vector<Triplet>& trips, const SpMat& A, int row0, int col0, double scale) {
    if (scale == 0.0) return;
    for (int o = 0; o < A.outerSize(); ++o)
        for (SpMat::InnerIterator it(A, o); it; ++it)
            trips.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                               scale * it.value());
}

void append_column(std::vector<Triplet>& trips, const Eigen::VectorXd& v, int row0, int col,
                   double scale) {
    for (int i = 0; i < v.size(); ++i)
        if (v(i) != 0.0) trips.emplace_back(row0 + i, col, scale * v(i));
}

void append_row(std::vector<Triplet>& trips, const Eigen::VectorXd& v, int row, int col0,
                double scale) {
    for (int j = 0; j < v.size(); ++j)
        if (v(j) != 0.0) trips.emplace_back(row, col0 + j, scale * v(j));
}

// The shifted mean block A~ = [[K_1 - eRe muRe M, +eIm muIm M],
//                              [-eIm muIm M,      K_1 - eRe muRe M]]
// (real mode: just K_1 + shift*S for the caller's choice of S).
void append_tildeA(std::vector<Triplet>& trips, const SpMat& K1, const SpMat& M, double mu_re,
                   double mu_im, const PrecondConfig& cfg, int n_x, bool real_mode) {
    append_block(trips, K1, 0, 0, 1.0);
    append_block(trips, M, 0, 0, -cfg.eps_re * mu_re);
    if (real_mode) return;
    append_block(trips, K1, n_x, n_x, 1.0);
    append_block(trips, M, n_x, n_x, -cfg.eps_re * mu_re);
    append_block(trips, M, 0, n_x, cfg.eps_im * mu_im);
    append_block(trips, M, n_x, 0, -cfg.eps_im * mu_im);
}

// Bordered constraint matrix (one per basis column) with its factorization
// and the SMW refresh state.
struct CmbCore {
    Eigen::SparseLU<SpMat> lu;
    SpMat mass;
    Eigen::VectorXd w0_re, w0_im;
    int n_x = 0;
    bool real_mode = false;

    // active SMW update: solve() applies t - W (I + Z^T W)^-1 Z^T t
    int rank = 0;
    Eigen::MatrixXd Yfac, Z, W;
    Eigen::FullPivLU<Eigen::MatrixXd> cap;
    bool update_rejected = false;

    int dim() const { return real_mode ? n_x + 1 : 2 * n_x + 2; }

    void build(const AffineOperator& A, const SGEigenState& init, const PrecondConfig& cfg) {
        n_x = A.n_x();
        real_mode = init.real_mode;
        mass = A.mass;
        w0_re = init.V_re.col(0);
        if (!real_mode) w0_im = init.V_im.col(0);
        const double mu_re = init.lam_re(0);
        const double mu_im = real_mode ? 0.0 : init.lam_im(0);

        std::vector<Triplet> trips;
        append_tildeA(trips, A.terms[0], A.mass, mu_re, mu_im, cfg, n_x, real_mode);
        if (real_mode) {
            const Eigen::VectorXd Mw = A.mass * w0_re;
            append_column(trips, Mw, 0, n_x, -1.0);
            append_row(trips, w0_re, n_x, 0, -1.0);
        } else {
            const Eigen::VectorXd Mwre = A.mass * w0_re;
            const Eigen::VectorXd Mwim = A.mass * w0_im;
            const int a = 2 * n_x, b = 2 * n_x + 1;
            append_column(trips, Mwre, 0, a, -1.0);
            append_column(trips, Mwim, n_x, a, -1.0);
            append_column(trips, Mwim, 0, b, 1.0);
            append_column(trips, Mwre, n_x, b, -1.0);
            append_row(trips, w0_re, a, 0, -1.0);
            append_row(trips, w0_im, b, n_x, -1.0);
        }
        SpMat Mc(dim(), dim());
        Mc.setFromTriplets(trips.begin(), trips.end());
        Mc.makeCompressed();
        lu.compute(Mc);
        if (lu.info() != Eigen::Success)
            fail(ErrorCode::Numerical,
                 "constraint mean block factorization failed (singular); adjust eps_re/eps_im");
    }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
        Eigen::MatrixXd t = lu.solve(rhs);
        if (rank > 0) t -= W * cap.solve(Z.transpose() * t);
        return t;
    }

    void smw_update(const SGEigenState& s) {
        update_rejected = false;
        const int N = dim();
        const Eigen::VectorXd dwre = s.V_re.col(0) - w0_re;
        const int r0 = real_mode ? 2 : 4;
        Eigen::MatrixXd Y0 = Eigen::MatrixXd::Zero(N, r0);
        Eigen::MatrixXd Z0 = Eigen::MatrixXd::Zero(N, r0);
        if (real_mode) {
            Y0.col(0).head(n_x) = -(mass * dwre);
            Y0(n_x, 1) = 1.0;
            Z0(n_x, 0) = 1.0;
            Z0.col(1).head(n_x) = -dwre;
        } else {
            const Eigen::VectorXd dwim = s.V_im.col(0) - w0_im;
            const int a = 2 * n_x, b = 2 * n_x + 1;
            Y0.col(0).head(n_x) = -(mass * dwre);
            Y0.col(0).segment(n_x, n_x) = -(mass * dwim);
            Y0.col(1).head(n_x) = mass * dwim;
            Y0.col(1).segment(n_x, n_x) = -(mass * dwre);
            Y0(a, 2) = 1.0;
            Y0(b, 3) = 1.0;
            Z0(a, 0) = 1.0;
            Z0(b, 1) = 1.0;
            Z0.col(2).head(n_x) = -dwre;
            Z0.col(3).segment(n_x, n_x) = -dwim;
        }

        // rank-revealing SVD of the update Y0 Z0^T without forming it: thin
        // QR of both factors, then an r0 x r0 SVD of R1 R2^T
        Eigen::HouseholderQR<Eigen::MatrixXd> q1(Y0), q2(Z0);
        const Eigen::MatrixXd Q1 = q1.householderQ() * Eigen::MatrixXd::Identity(N, r0);
        const Eigen::MatrixXd Q2 = q2.householderQ() * Eigen::MatrixXd::Identity(N, r0);
        const Eigen::MatrixXd R1 =
            Eigen::MatrixXd(q1.matrixQR().topRows(r0).triangularView<Eigen::Upper>());
        const Eigen::MatrixXd R2 =
            Eigen::MatrixXd(q2.matrixQR().topRows(r0).triangularView<Eigen::Upper>());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(R1 * R2.transpose(),
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        int r = 0;
        while (r < sv.size() && sv(r) > 1e-13 * smax) ++r;
        if (smax == 0.0) r = 0; // zero eigenvector change: keep the exact base apply
        if (r == 0) {
            rank = 0;
            Yfac.resize(0, 0);
            Z.resize(0, 0);
            W.resize(0, 0);
            return;
        }
        Yfac = Q1 * svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
        Z = Q2 * svd.matrixV().leftCols(r);
        W = lu.solve(Yfac);
        const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(r, r) + Z.transpose() * W;
        cap.compute(C);
        // treat a capacitance matrix conditioned worse than ~1e8 as singular:
        // the Woodbury correction would amplify solve errors past usefulness
        cap.setThreshold(1e-8);
        if (!cap.isInvertible()) {
            rank = 0;
            Yfac.resize(0, 0);
            Z.resize(0, 0);
            W.resize(0, 0);
            update_rejected = true;
            std::cerr << "warning: singular SMW capacitance matrix; "
                         "keeping the base preconditioner\n";
            return;
        }
        rank = r;
    }
};

int flat_size_of(int n_x, int n_xi, bool real_mode) {
    return (real_mode ? 1 : 2) * (n_x + 1) * n_xi;
}

void check_apply_size(const Eigen::VectorXd& r, int n_x, int n_xi, bool real_mode) {
    if (r.size() != flat_size_of(n_x, n_xi, real_mode))
        fail(ErrorCode::DimensionMismatch, "preconditioner apply: flat vector has wrong length");
}

// Gather the per-column core right-hand sides of columns [lo, lo+w) into a
// dim x w matrix, and scatter solutions back to the flat layout.
Eigen::MatrixXd gather_columns(const Eigen::VectorXd& r, int n_x, int n_xi, bool real_mode, int lo,
                               int w) {
    const int nv = n_x * n_xi;
    Eigen::MatrixXd B(real_mode ? n_x + 1 : 2 * n_x + 2, w);
    for (int k = 0; k < w; ++k) {
        const int j = lo + k;
        B.col(k).head(n_x) = r.segment(j * n_x, n_x);
        if (real_mode) {
            B(n_x, k) = r(nv + j);
        } else {
            B.col(k).segment(n_x, n_x) = r.segment(nv + j * n_x, n_x);
            B(2 * n_x, k) = r(2 * nv + j);
            B(2 * n_x + 1, k) = r(2 * nv + n_xi + j);
        }
    }
    return B;
}

void scatter_columns(const Eigen::MatrixXd& X, Eigen::VectorXd& out, int n_x, int n_xi,
                     bool real_mode, int lo) {
    const int nv = n_x * n_xi;
    for (int k = 0; k < X.cols(); ++k) {
        const int j = lo + k;
        out.segment(j * n_x, n_x) = X.col(k).head(n_x);
        if (real_mode) {
            out(nv + j) = X(n_x, k);
        } else {
            out.segment(nv + j * n_x, n_x) = X.col(k).segment(n_x, n_x);
            out(2 * nv + j) = X(2 * n_x, k);
            out(2 * nv + n_xi + j) = X(2 * n_x + 1, k);
        }
    }
}

class MBPrecond final : public Preconditioner {
public:
    MBPrecond(const AffineOperator& A, const SGEigenState& init, const PrecondConfig& cfg)
        : n_x_(A.n_x()), n_xi_(init.n_xi()), real_(init.real_mode) {
        const double mu_re = init.lam_re(0);
        const double mu_im = real_ ? 0.0 : init.lam_im(0);
        std::vector<Triplet> trips;
        if (real_) {
            // identity in place of the mass matrix in the real-mode shift
            append_block(trips, A.terms[0], 0, 0, 1.0);
            for (int i = 0; i < n_x_; ++i) trips.emplace_back(i, i, -cfg.eps_re * mu_re);
        } else {
            append_tildeA(trips, A.terms[0], A.mass, mu_re, mu_im, cfg, n_x_, false);
        }
        SpMat At(real_ ? n_x_ : 2 * n_x_, real_ ? n_x_ : 2 * n_x_);
        At.setFromTriplets(trips.begin(), trips.end());
        At.makeCompressed();
        lu_.compute(At);
        if (lu_.info() != Eigen::Success)
            fail(ErrorCode::Numerical,
                 "mean block factorization failed (singular); adjust eps_re/eps_im");

        // small Schur block over the eigenvalue rows
        if (real_) {
            Eigen::MatrixXd S(1, 1);
            S(0, 0) = init.V_re.col(0).dot(lu_.solve(Eigen::VectorXd(init.V_re.col(0))));
            schur_.compute(S);
        } else {
            const Eigen::VectorXd Mwre = A.mass * init.V_re.col(0);
            const Eigen::VectorXd Mwim = A.mass * init.V_im.col(0);
            Eigen::MatrixXd B(2 * n_x_, 2);
            B.col(0).head(n_x_) = -Mwre;
            B.col(0).tail(n_x_) = -Mwim;
            B.col(1).head(n_x_) = Mwim;
            B.col(1).tail(n_x_) = -Mwre;
            const Eigen::MatrixXd X = lu_.solve(B);
            Eigen::MatrixXd S(2, 2);
            S.row(0) = -init.V_re.col(0).transpose() * X.topRows(n_x_);
            S.row(1) = -init.V_im.col(0).transpose() * X.bottomRows(n_x_);
            schur_.compute(S);
        }
        if (!schur_.isInvertible())
            fail(ErrorCode::Numerical,
                 "mean preconditioner Schur block is singular; adjust eps_re/eps_im");
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override {
        check_apply_size(r, n_x_, n_xi_, real_);
        const int nv = n_x_ * n_xi_;
        Eigen::VectorXd out(r.size());
        if (real_) {
            const Eigen::MatrixXd V =
                lu_.solve(Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(r.data(), n_x_, n_xi_)));
            out.head(nv) = Eigen::Map<const Eigen::VectorXd>(V.data(), nv);
            out.tail(n_xi_) = schur_.solve(Eigen::MatrixXd(r.tail(n_xi_).transpose())).transpose();
            return out;
        }
        Eigen::MatrixXd B(2 * n_x_, n_xi_);
        B.topRows(n_x_) = Eigen::Map<const Eigen::MatrixXd>(r.data(), n_x_, n_xi_);
        B.bottomRows(n_x_) = Eigen::Map<const Eigen::MatrixXd>(r.data() + nv, n_x_, n_xi_);
        const Eigen::MatrixXd V = lu_.solve(B);
        const Eigen::MatrixXd Vre = V.topRows(n_x_);
        const Eigen::MatrixXd Vim = V.bottomRows(n_x_);
        out.head(nv) = Eigen::Map<const Eigen::VectorXd>(Vre.data(), nv);
        out.segment(nv, nv) = Eigen::Map<const Eigen::VectorXd>(Vim.data(), nv);
        Eigen::MatrixXd L(2, n_xi_);
        L.row(0) = r.segment(2 * nv, n_xi_).transpose();
        L.row(1) = r.segment(2 * nv + n_xi_, n_xi_).transpose();
        const Eigen::MatrixXd Lsol = schur_.solve(L);
        out.segment(2 * nv, n_xi_) = Lsol.row(0).transpose();
        out.segment(2 * nv + n_xi_, n_xi_) = Lsol.row(1).transpose();
        return out;
    }

private:
    Eigen::SparseLU<SpMat> lu_;
    Eigen::FullPivLU<Eigen::MatrixXd> schur_;
    int n_x_, n_xi_;
    bool real_;
};

class CmbPrecond final : public Preconditioner {
public:
    CmbPrecond(const AffineOperator& A, const SGEigenState& init, const PrecondConfig& cfg)
        : n_xi_(init.n_xi()), allow_update_(cfg.kind == PrecondKind::cMBu) {
        core_.build(A, init, cfg);
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override {
        check_apply_size(r, core_.n_x, n_xi_, core_.real_mode);
        const Eigen::MatrixXd B = gather_columns(r, core_.n_x, n_xi_, core_.real_mode, 0, n_xi_);
        const Eigen::MatrixXd X = core_.solve(B);
        Eigen::VectorXd out(r.size());
        scatter_columns(X, out, core_.n_x, n_xi_, core_.real_mode, 0);
        return out;
    }

    void update(const SGEigenState& s) override {
        if (!allow_update_) return;
        if (s.n_x() != core_.n_x || s.real_mode != core_.real_mode)
            fail(ErrorCode::DimensionMismatch, "preconditioner update: state shape changed");
        core_.smw_update(s);
    }

    bool last_update_rejected() const override { return core_.update_rejected; }

    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> smw_factors() const override {
        return {core_.Yfac, core_.Z};
    }

private:
    CmbCore core_;
    int n_xi_;
    bool allow_update_;
};

class ChgsPrecond final : public Preconditioner {
public:
    ChgsPrecond(const AffineOperator& A, const TripleProductTensor& H, const SGEigenState& init,
                const PrecondConfig& cfg)
        : n_xi_(init.n_xi()) {
        if (H.n_xi != n_xi_)
            fail(ErrorCode::Config, "chGS: triple-product tensor does not match the state basis");

        // degree-block boundaries: block d spans columns [C(m+d-1, d-1), C(m+d, d))
        const int m = A.m_xi;
        if (m < 1) fail(ErrorCode::Config, "chGS: operator lacks a parameter dimension");
        int p = 0;
        while (binomial_checked(m + p, p) < n_xi_) ++p;
        if (binomial_checked(m + p, p) != n_xi_)
            fail(ErrorCode::Config, "chGS: state basis size is not a complete graded set");
        p_ = p;
        if (cfg.p_t < 0 || cfg.p_t > p_)
            fail(ErrorCode::Config, "chGS: truncation degree p_t must satisfy 0 <= p_t <= p");
        block_hi_.resize(p_ + 1);
        for (int d = 0; d <= p_; ++d) block_hi_[d] = static_cast<int>(binomial_checked(m + d, d));

        n_t_ = static_cast<int>(binomial_checked(m + cfg.p_t, cfg.p_t));
        if (static_cast<int>(H.H.size()) < n_t_)
            fail(ErrorCode::Config, "chGS: triple-product tensor has too few slices");
        mass_ = A.mass;
        const int kept = std::min<int>(n_t_, A.n_nu());
        terms_.assign(A.terms.begin(), A.terms.begin() + kept);
        slices_.assign(H.H.begin(), H.H.begin() + n_t_);

        core_.build(A, init, cfg);
        load_coefficients(init);
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override {
        const int n_x = core_.n_x;
        const bool real = core_.real_mode;
        check_apply_size(r, n_x, n_xi_, real);
        const int nv = n_x * n_xi_;

        Eigen::MatrixXd Xvre = Eigen::MatrixXd::Zero(n_x, n_xi_);
        Eigen::MatrixXd Xvim;
        Eigen::RowVectorXd Xlre = Eigen::RowVectorXd::Zero(n_xi_);
        Eigen::RowVectorXd Xlim;
        if (!real) {
            Xvim = Eigen::MatrixXd::Zero(n_x, n_xi_);
            Xlim = Eigen::RowVectorXd::Zero(n_xi_);
        }

        auto solve_block = [&](int lo, int hi, bool upper_solved) {
            const int w = hi - lo;
            if (w <= 0) return;
            Eigen::MatrixXd rhs = gather_columns(r, n_x, n_xi_, real, lo, w);

            auto subtract_range = [&](int s_lo, int s_hi) {
                const int sw = s_hi - s_lo;
                if (sw <= 0) return;
                for (int t = 0; t < n_t_; ++t) {
                    // coupling sub-block h_t[(s_lo:s_hi), (lo:hi)]
                    Eigen::MatrixXd Hsub = Eigen::MatrixXd::Zero(sw, w);
                    bool any = false;
                    const SpMat& Ht = slices_[static_cast<std::size_t>(t)];
                    for (int o = 0; o < Ht.outerSize(); ++o)
                        for (SpMat::InnerIterator it(Ht, o); it; ++it) {
                            if (it.row() >= s_lo && it.row() < s_hi && it.col() >= lo &&
                                it.col() < hi) {
                                Hsub(it.row() - s_lo, it.col() - lo) = it.value();
                                any = true;
                            }
                        }
                    if (!any) continue;

                    const Eigen::MatrixXd P1 = Xvre.middleCols(s_lo, sw) * Hsub;
                    const Eigen::RowVectorXd q1 = Xlre.segment(s_lo, sw) * Hsub;
                    const Eigen::MatrixXd MP1 = mass_ * P1;
                    if (real) {
                        Eigen::MatrixXd c = -lre_(t) * MP1 - Mvre_.col(t) * q1;
                        if (t < static_cast<int>(terms_.size())) {
                            c += terms_[static_cast<std::size_t>(t)] * P1;
                            ++mults_;
                        }
                        rhs.topRows(n_x) -= c;
                        rhs.row(n_x) -= -(vre_.col(t).transpose() * P1);
                        continue;
                    }
                    const Eigen::MatrixXd P2 = Xvim.middleCols(s_lo, sw) * Hsub;
                    const Eigen::RowVectorXd q2 = Xlim.segment(s_lo, sw) * Hsub;
                    const Eigen::MatrixXd MP2 = mass_ * P2;
                    Eigen::MatrixXd c_re =
                        -lre_(t) * MP1 + lim_(t) * MP2 - Mvre_.col(t) * q1 + Mvim_.col(t) * q2;
                    Eigen::MatrixXd c_im =
                        -lre_(t) * MP2 - lim_(t) * MP1 - Mvre_.col(t) * q2 - Mvim_.col(t) * q1;
                    if (t < static_cast<int>(terms_.size())) {
                        c_re += terms_[static_cast<std::size_t>(t)] * P1;
                        c_im += terms_[static_cast<std::size_t>(t)] * P2;
                        mults_ += 2;
                    }
                    rhs.topRows(n_x) -= c_re;
                    rhs.middleRows(n_x, n_x) -= c_im;
                    rhs.row(2 * n_x) -= -(vre_.col(t).transpose() * P1);
                    rhs.row(2 * n_x + 1) -= -(vim_.col(t).transpose() * P2);
                }
            };

            subtract_range(0, lo);
            if (upper_solved) subtract_range(hi, n_xi_);

            const Eigen::MatrixXd sol = core_.solve(rhs);
            Xvre.middleCols(lo, w) = sol.topRows(n_x);
            if (real) {
                Xlre.segment(lo, w) = sol.row(n_x);
            } else {
                Xvim.middleCols(lo, w) = sol.middleRows(n_x, n_x);
                Xlre.segment(lo, w) = sol.row(2 * n_x);
                Xlim.segment(lo, w) = sol.row(2 * n_x + 1);
            }
        };

        // symmetric sweep over degree blocks; couplings to blocks not yet
        // touched in this apply drop out (zero initial guess)
        auto lo_of = [&](int d) { return d == 0 ? 0 : block_hi_[d - 1]; };
        solve_block(0, block_hi_[0], false);
        for (int d = 1; d <= p_; ++d) solve_block(lo_of(d), block_hi_[d], false);
        for (int d = p_ - 1; d >= 1; --d) solve_block(lo_of(d), block_hi_[d], true);
        if (p_ >= 1) solve_block(0, block_hi_[0], true);

        Eigen::VectorXd out(r.size());
        out.head(nv) = Eigen::Map<const Eigen::VectorXd>(Xvre.data(), nv);
        if (real) {
            out.tail(n_xi_) = Xlre.transpose();
        } else {
            out.segment(nv, nv) = Eigen::Map<const Eigen::VectorXd>(Xvim.data(), nv);
            out.segment(2 * nv, n_xi_) = Xlre.transpose();
            out.tail(n_xi_) = Xlim.transpose();
        }
        return out;
    }

    void update(const SGEigenState& s) override {
        if (s.n_x() != core_.n_x || s.n_xi() != n_xi_ || s.real_mode != core_.real_mode)
            fail(ErrorCode::DimensionMismatch, "preconditioner update: state shape changed");
        core_.smw_update(s);
        load_coefficients(s);
    }

    std::int64_t term_mults() const override { return mults_; }
    bool last_update_rejected() const override { return core_.update_rejected; }

    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> smw_factors() const override {
        return {core_.Yfac, core_.Z};
    }

private:
    void load_coefficients(const SGEigenState& s) {
        vre_ = s.V_re.leftCols(n_t_);
        lre_ = s.lam_re.head(n_t_);
        Mvre_ = mass_ * vre_;
        if (!core_.real_mode) {
            vim_ = s.V_im.leftCols(n_t_);
            lim_ = s.lam_im.head(n_t_);
            Mvim_ = mass_ * vim_;
        }
    }

    CmbCore core_;
    SpMat mass_;
    std::vector<SpMat> terms_;  // K_t for t in the truncated coupling set
    std::vector<SpMat> slices_; // h_t slices for the same set
    Eigen::MatrixXd vre_, vim_, Mvre_, Mvim_;
    Eigen::VectorXd lre_, lim_;
    std::vector<int> block_hi_;
    int n_xi_ = 0, p_ = 0, n_t_ = 0;
    mutable std::int64_t mults_ = 0;
};

} // namespace

std::unique_ptr<Preconditioner> build_preconditioner(const AffineOperator& A,
                                                     const TripleProductTensor& H,
                                                     const SGEigenState& init,
                                                     const PrecondConfig& cfg) {
    check_eps(cfg);
    if (A.n_x() != init.n_x())
        fail(ErrorCode::DimensionMismatch, "build_preconditioner: operator size does not match");
    if (init.n_xi() < 1) fail(ErrorCode::Config, "build_preconditioner: empty state");
    switch (cfg.kind) {
    case PrecondKind::MB: return std::make_unique<MBPrecond>(A, init, cfg);
    case PrecondKind::cMB:
    case PrecondKind::cMBu: return std::make_unique<CmbPrecond>(A, init, cfg);
    case PrecondKind::chGS: return std::make_unique<ChgsPrecond>(A, H, init, cfg);
    }
    fail(ErrorCode::Config, "build_preconditioner: unknown kind");
}

} // namespace sgeig
