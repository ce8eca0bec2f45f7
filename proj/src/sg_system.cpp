#include "sgeig/sg_system.hpp"

#include "sgeig/errors.hpp"

#include <cmath>

namespace sgeig {

namespace {

void check_compat(const SGEigenState& s, const AffineOperator& A, const TripleProductTensor& H) {
    if (A.n_x() != s.n_x())
        fail(ErrorCode::DimensionMismatch, "sg_system: operator size does not match the state");
    if (H.n_xi != s.n_xi())
        fail(ErrorCode::Config, "sg_system: triple-product tensor basis does not match the state");
    const int need = std::max(A.n_nu(), s.n_xi());
    if (static_cast<int>(H.H.size()) < need)
        fail(ErrorCode::Config, "sg_system: triple-product tensor carries too few slices");
}

// sum_l K_l (U H_l^T) over the operator terms
Eigen::MatrixXd op_terms(const AffineOperator& A, const TripleProductTensor& H,
                         const Eigen::MatrixXd& U) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(U.rows(), U.cols());
    for (int l = 0; l < A.n_nu(); ++l)
        acc += A.terms[static_cast<std::size_t>(l)] *
               (U * H.H[static_cast<std::size_t>(l)].transpose());
    return acc;
}

// sum_l K_l^T (U H_l)
Eigen::MatrixXd op_terms_T(const AffineOperator& A, const TripleProductTensor& H,
                           const Eigen::MatrixXd& U) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(U.rows(), U.cols());
    for (int l = 0; l < A.n_nu(); ++l)
        acc += A.terms[static_cast<std::size_t>(l)].transpose() *
               (U * H.H[static_cast<std::size_t>(l)]);
    return acc;
}

// S = sum_l a_l H_l (dense, a restricted to the first n_xi slices)
Eigen::MatrixXd slice_sum(const TripleProductTensor& H, const Eigen::VectorXd& a) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(H.n_xi, H.n_xi);
    for (int l = 0; l < a.size(); ++l) {
        if (a(l) == 0.0) continue;
        const auto& Hl = H.H[static_cast<std::size_t>(l)];
        for (int o = 0; o < Hl.outerSize(); ++o)
            for (Eigen::SparseMatrix<double>::InnerIterator it(Hl, o); it; ++it)
                S(it.row(), it.col()) += a(l) * it.value();
    }
    return S;
}

// <P, H_l>_F for a dense n_xi x n_xi P
double frob_with_slice(const Eigen::MatrixXd& P, const Eigen::SparseMatrix<double>& Hl) {
    double acc = 0.0;
    for (int o = 0; o < Hl.outerSize(); ++o)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Hl, o); it; ++it)
            acc += P(it.row(), it.col()) * it.value();
    return acc;
}

using Map = Eigen::Map<const Eigen::VectorXd>;

Eigen::VectorXd vec_of(const Eigen::MatrixXd& M) { return Map(M.data(), M.size()); }

} // namespace

Eigen::VectorXd g_block_trace(const Eigen::MatrixXd& V, const TripleProductTensor& H) {
    Eigen::VectorXd g(V.cols());
    for (int i = 0; i < V.cols(); ++i) {
        const Eigen::MatrixXd W = V * H.H[static_cast<std::size_t>(i)];
        g(i) = W.cwiseProduct(V).sum() - (i == 0 ? 1.0 : 0.0);
    }
    return g;
}

Eigen::VectorXd g_block_kron(const Eigen::MatrixXd& V, const TripleProductTensor& H) {
    const Map vbar(V.data(), V.size());
    Eigen::VectorXd g(V.cols());
    for (int i = 0; i < V.cols(); ++i) {
        // (H_i x I) vec(V) = vec(V H_i^T)
        const Eigen::MatrixXd W = V * H.H[static_cast<std::size_t>(i)].transpose();
        g(i) = vbar.dot(Map(W.data(), W.size())) - (i == 0 ? 1.0 : 0.0);
    }
    return g;
}

SGResidual residual(const SGEigenState& s, const AffineOperator& A, const TripleProductTensor& H) {
    check_compat(s, A, H);
    const int nv = s.n_x() * s.n_xi();
    const int nxi = s.n_xi();

    SGResidual r;
    r.n_x = s.n_x();
    r.n_xi = nxi;
    r.real_mode = s.real_mode;
    r.rhat.resize(s.flat_size());

    if (s.real_mode) {
        const Eigen::MatrixXd Sa = slice_sum(H, s.lam_re);
        const Eigen::MatrixXd F = op_terms(A, H, s.V_re) - A.mass * (s.V_re * Sa.transpose());
        r.rhat.head(nv) = vec_of(F);
        r.rhat.tail(nxi) = -0.5 * g_block_trace(s.V_re, H);
    } else {
        const Eigen::MatrixXd Sre = slice_sum(H, s.lam_re);
        const Eigen::MatrixXd Sim = slice_sum(H, s.lam_im);
        const Eigen::MatrixXd Fre = op_terms(A, H, s.V_re) -
                                    A.mass * (s.V_re * Sre.transpose() - s.V_im * Sim.transpose());
        const Eigen::MatrixXd Fim = op_terms(A, H, s.V_im) -
                                    A.mass * (s.V_re * Sim.transpose() + s.V_im * Sre.transpose());
        r.rhat.head(nv) = vec_of(Fre);
        r.rhat.segment(nv, nv) = vec_of(Fim);
        r.rhat.segment(2 * nv, nxi) = -0.5 * g_block_trace(s.V_re, H);
        r.rhat.tail(nxi) = -0.5 * g_block_trace(s.V_im, H);
    }
    r.norm = r.rhat.norm();
    return r;
}

Eigen::VectorXd apply_jacobian(const SGEigenState& s, const AffineOperator& A,
                               const TripleProductTensor& H, const Eigen::VectorXd& direction) {
    check_compat(s, A, H);
    const SGEigenState d = SGEigenState::unflatten(direction, s.n_x(), s.n_xi(), s.real_mode);
    const int nv = s.n_x() * s.n_xi();
    const int nxi = s.n_xi();
    Eigen::VectorXd out(s.flat_size());

    if (s.real_mode) {
        const Eigen::MatrixXd Sa = slice_sum(H, s.lam_re);
        const Eigen::MatrixXd Sd = slice_sum(H, d.lam_re);
        const Eigen::MatrixXd F = op_terms(A, H, d.V_re) -
                                  A.mass * (d.V_re * Sa.transpose() + s.V_re * Sd.transpose());
        out.head(nv) = vec_of(F);
        for (int i = 0; i < nxi; ++i) {
            const Eigen::MatrixXd W = d.V_re * H.H[static_cast<std::size_t>(i)];
            out(nv + i) = -W.cwiseProduct(s.V_re).sum();
        }
        return out;
    }

    const Eigen::MatrixXd Sre = slice_sum(H, s.lam_re);
    const Eigen::MatrixXd Sim = slice_sum(H, s.lam_im);
    const Eigen::MatrixXd Sdre = slice_sum(H, d.lam_re);
    const Eigen::MatrixXd Sdim = slice_sum(H, d.lam_im);

    const Eigen::MatrixXd Fre =
        op_terms(A, H, d.V_re) -
        A.mass * (d.V_re * Sre.transpose() - d.V_im * Sim.transpose() +
                  s.V_re * Sdre.transpose() - s.V_im * Sdim.transpose());
    const Eigen::MatrixXd Fim =
        op_terms(A, H, d.V_im) -
        A.mass * (d.V_re * Sim.transpose() + d.V_im * Sre.transpose() +
                  s.V_re * Sdim.transpose() + s.V_im * Sdre.transpose());
    out.head(nv) = vec_of(Fre);
    out.segment(nv, nv) = vec_of(Fim);
    for (int i = 0; i < nxi; ++i) {
        const auto& Hi = H.H[static_cast<std::size_t>(i)];
        out(2 * nv + i) = -(d.V_re * Hi).cwiseProduct(s.V_re).sum();
        out(2 * nv + nxi + i) = -(d.V_im * Hi).cwiseProduct(s.V_im).sum();
    }
    return out;
}

Eigen::VectorXd apply_jacobian_transpose(const SGEigenState& s, const AffineOperator& A,
                                         const TripleProductTensor& H, const Eigen::VectorXd& y) {
    check_compat(s, A, H);
    const SGEigenState Y = SGEigenState::unflatten(y, s.n_x(), s.n_xi(), s.real_mode);
    const int nv = s.n_x() * s.n_xi();
    const int nxi = s.n_xi();
    const Eigen::SparseMatrix<double> MT = A.mass.transpose();
    Eigen::VectorXd out(s.flat_size());

    if (s.real_mode) {
        const Eigen::MatrixXd Sa = slice_sum(H, s.lam_re);
        const Eigen::MatrixXd Sy = slice_sum(H, Y.lam_re); // constraint-row weights
        const Eigen::MatrixXd dV =
            op_terms_T(A, H, Y.V_re) - MT * (Y.V_re * Sa) - s.V_re * Sy.transpose();
        out.head(nv) = vec_of(dV);
        const Eigen::MatrixXd P = Y.V_re.transpose() * (A.mass * s.V_re);
        for (int l = 0; l < nxi; ++l)
            out(nv + l) = -frob_with_slice(P, H.H[static_cast<std::size_t>(l)]);
        return out;
    }

    const Eigen::MatrixXd Sre = slice_sum(H, s.lam_re);
    const Eigen::MatrixXd Sim = slice_sum(H, s.lam_im);
    const Eigen::MatrixXd Syre = slice_sum(H, Y.lam_re); // weights on the Re constraint rows
    const Eigen::MatrixXd Syim = slice_sum(H, Y.lam_im); // weights on the Im constraint rows

    const Eigen::MatrixXd dVre = op_terms_T(A, H, Y.V_re) - MT * (Y.V_re * Sre + Y.V_im * Sim) -
                                 s.V_re * Syre.transpose();
    const Eigen::MatrixXd dVim = op_terms_T(A, H, Y.V_im) + MT * (Y.V_re * Sim - Y.V_im * Sre) -
                                 s.V_im * Syim.transpose();
    out.head(nv) = vec_of(dVre);
    out.segment(nv, nv) = vec_of(dVim);

    const Eigen::MatrixXd MVre = A.mass * s.V_re;
    const Eigen::MatrixXd MVim = A.mass * s.V_im;
    const Eigen::MatrixXd Prr = Y.V_re.transpose() * MVre;
    const Eigen::MatrixXd Pri = Y.V_re.transpose() * MVim;
    const Eigen::MatrixXd Pir = Y.V_im.transpose() * MVre;
    const Eigen::MatrixXd Pii = Y.V_im.transpose() * MVim;
    for (int l = 0; l < nxi; ++l) {
        const auto& Hl = H.H[static_cast<std::size_t>(l)];
        out(2 * nv + l) = -frob_with_slice(Prr, Hl) - frob_with_slice(Pii, Hl);
        out(2 * nv + nxi + l) = frob_with_slice(Pri, Hl) - frob_with_slice(Pir, Hl);
    }
    return out;
}

} // namespace sgeig
