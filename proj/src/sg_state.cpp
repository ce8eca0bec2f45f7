#include "sgeig/sg_state.hpp"

#include "sgeig/dense_eig.hpp"
#include "sgeig/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgeig {

Eigen::VectorXd SGEigenState::flatten() const {
    Eigen::VectorXd x(flat_size());
    const int nv = n_x() * n_xi();
    using Map = Eigen::Map<const Eigen::VectorXd>;
    if (real_mode) {
        x.head(nv) = Map(V_re.data(), nv);
        x.tail(n_xi()) = lam_re;
    } else {
        x.head(nv) = Map(V_re.data(), nv);
        x.segment(nv, nv) = Map(V_im.data(), nv);
        x.segment(2 * nv, n_xi()) = lam_re;
        x.tail(n_xi()) = lam_im;
    }
    return x;
}

SGEigenState SGEigenState::unflatten(const Eigen::VectorXd& x, int n_x, int n_xi, bool real_mode) {
    const int nv = n_x * n_xi;
    const int expected = (real_mode ? 1 : 2) * (n_x + 1) * n_xi;
    if (x.size() != expected)
        fail(ErrorCode::DimensionMismatch, "SGEigenState::unflatten: flat vector has wrong length");
    SGEigenState s;
    s.real_mode = real_mode;
    using Map = Eigen::Map<const Eigen::MatrixXd>;
    s.V_re = Map(x.data(), n_x, n_xi);
    if (real_mode) {
        s.lam_re = x.tail(n_xi);
    } else {
        s.V_im = Map(x.data() + nv, n_x, n_xi);
        s.lam_re = x.segment(2 * nv, n_xi);
        s.lam_im = x.tail(n_xi);
    }
    return s;
}

SGEigenState init_from_mean(const AffineOperator& A, int n_xi) {
    if (n_xi < 1) fail(ErrorCode::Config, "init_from_mean: n_xi must be >= 1");
    const int n_x = A.n_x();
    const auto pairs =
        solve_generalized(Eigen::MatrixXd(A.terms[0]), Eigen::MatrixXd(A.mass), n_x);
    EigenPair top = rightmost(pairs);
    top.v = canonicalize_phase(top.v);

    SGEigenState s;
    s.real_mode = std::abs(top.lambda.imag()) <= 1e-12 * std::abs(top.lambda);
    s.V_re = Eigen::MatrixXd::Zero(n_x, n_xi);
    s.lam_re = Eigen::VectorXd::Zero(n_xi);
    if (s.real_mode) {
        Eigen::VectorXd vre = top.v.real();
        s.V_re.col(0) = vre / vre.norm();
        s.lam_re(0) = top.lambda.real();
        return s;
    }

    // rotate the phase so both parts carry equal norm, keeping an exact
    // eigenpair: ||Re e^{i t} v||^2 - ||Im e^{i t} v||^2 =
    //   cos(2t)(a - b) - 2 sin(2t) c with a, b the squared part norms and c
    //   their inner product; a zero is t = atan2(a - b, 2c)/2
    const Eigen::VectorXd re = top.v.real(), im = top.v.imag();
    const double a = re.squaredNorm(), b = im.squaredNorm(), c = re.dot(im);
    const double t = 0.5 * std::atan2(a - b, 2.0 * c);
    const Eigen::VectorXcd rotated = std::polar(1.0, t) * top.v;
    Eigen::VectorXd vre = rotated.real(), vim = rotated.imag();
    const double scale = std::sqrt(0.5 * (vre.squaredNorm() + vim.squaredNorm()));
    if (scale == 0.0) fail(ErrorCode::Numerical, "init_from_mean: zero mean eigenvector");
    vre /= scale;
    vim /= scale;

    s.V_im = Eigen::MatrixXd::Zero(n_x, n_xi);
    s.lam_im = Eigen::VectorXd::Zero(n_xi);
    s.V_re.col(0) = vre;
    s.V_im.col(0) = vim;
    s.lam_re(0) = top.lambda.real();
    s.lam_im(0) = top.lambda.imag();
    return s;
}

SGEigenState reduce_to_real(const SGEigenState& s) {
    if (s.real_mode) return s;
    const double imn = s.V_im.norm();
    if (imn > 1e-8)
        fail(ErrorCode::Config,
             "reduce_to_real: state has genuinely complex content (||V_Im|| > 1e-8)");
    SGEigenState r;
    r.real_mode = true;
    r.V_re = s.V_re;
    r.lam_re = s.lam_re;
    return r;
}

void save_state(const SGEigenState& s, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "save_state: cannot open " + file.string());
    os << "sgeig_state\n";
    os << "mode " << (s.real_mode ? "real" : "complex") << "\n";
    os << "n_x " << s.n_x() << "\n";
    os << "n_xi " << s.n_xi() << "\n";
    const Eigen::VectorXd x = s.flatten();
    char buf[40];
    for (int i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", x(i));
        os << buf;
    }
    if (!os) fail(ErrorCode::Io, "save_state: write failure on " + file.string());
}

SGEigenState load_state(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) fail(ErrorCode::MissingFile, "load_state: cannot open " + file.string());
    std::string magic, key, mode;
    int n_x = 0, n_xi = 0;
    if (!(is >> magic) || magic != "sgeig_state")
        fail(ErrorCode::Parse, "load_state: bad header in " + file.string());
    if (!(is >> key >> mode) || key != "mode" || (mode != "real" && mode != "complex"))
        fail(ErrorCode::Parse, "load_state: bad mode line in " + file.string());
    if (!(is >> key >> n_x) || key != "n_x" || n_x < 1)
        fail(ErrorCode::Parse, "load_state: bad n_x line in " + file.string());
    if (!(is >> key >> n_xi) || key != "n_xi" || n_xi < 1)
        fail(ErrorCode::Parse, "load_state: bad n_xi line in " + file.string());
    const bool real_mode = mode == "real";
    const int n = (real_mode ? 1 : 2) * (n_x + 1) * n_xi;
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i)
        if (!(is >> x(i))) fail(ErrorCode::Parse, "load_state: truncated data in " + file.string());
    return SGEigenState::unflatten(x, n_x, n_xi, real_mode);
}

} // namespace sgeig
