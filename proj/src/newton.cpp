#include "sgeig/solver.hpp"

#include "sgeig/errors.hpp"
#include "sgeig/sg_system.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>

namespace sgeig {

namespace {

void check_options(const NewtonOptions& o) {
    if (!(o.rho > 0.0 && o.rho < 1.0))
        fail(ErrorCode::Config, "newton: rho must lie strictly between 0 and 1");
    if (!(o.c > 0.0 && o.c < 1.0))
        fail(ErrorCode::Config, "newton: c must lie strictly between 0 and 1");
    if (!(o.tau > 0.0)) fail(ErrorCode::Config, "newton: tau must be positive");
    if (!(o.tol > 0.0)) fail(ErrorCode::Config, "newton: tol must be positive");
    if (o.max_newton < 1 || o.max_gmres < 1)
        fail(ErrorCode::Config, "newton: iteration limits must be at least 1");
    if (o.max_backtracks < 0) fail(ErrorCode::Config, "newton: max_backtracks must be >= 0");
}

std::string fmt_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

} // namespace

void save_iteration_log(const IterationLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot open iteration log for writing: " + path);
    out << "step,gmres_iters,residual,alpha,backtracks\n";
    char buf[128];
    for (const IterationRecord& r : log.records) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%d\n", r.step, r.gmres_iters, r.residual,
                      r.alpha, r.backtracks);
        out << buf;
    }
    if (!out) fail(ErrorCode::Io, "failed writing iteration log: " + path);
}

NewtonResult newton_solve(const AffineOperator& A, const TripleProductTensor& H,
                          const SGEigenState& init, const PrecondConfig& pcfg,
                          const NewtonOptions& opts) {
    check_options(opts);

    NewtonResult out;
    out.state = init;
    auto pre = build_preconditioner(A, H, init, pcfg);

    SGResidual r = residual(out.state, A, H);
    out.log.records.push_back({0, 0, r.norm, 0.0, 0});

    double sched = 1.0; // stands in for the step-(-1) residual norm
    for (int n = 0; n < opts.max_newton && r.norm >= opts.tol; ++n) {
        if (n > 0 && pcfg.update) pre->update(out.state);

        const double itol = inner_gmres_tol(opts.tau, sched);
        const auto apply_A = [&](const Eigen::VectorXd& d) {
            return apply_jacobian(out.state, A, H, d);
        };
        const auto apply_P = [&](const Eigen::VectorXd& v) { return pre->apply(v); };
        const GmresResult gm =
            gmres(apply_A, apply_P, Eigen::VectorXd(-r.rhat), itol, opts.max_gmres);

        const Eigen::VectorXd grad = apply_jacobian_transpose(out.state, A, H, r.rhat);
        const double gd = grad.dot(gm.x);
        const double f0 = 0.5 * r.norm * r.norm;
        if (!(gd < 0.0))
            fail(ErrorCode::NotConverged,
                 "newton: stagnation at step " + std::to_string(n) +
                     ": search direction is not a descent direction (residual " +
                     fmt_sci(r.norm) + ")");

        const Eigen::VectorXd x0 = out.state.flatten();
        double alpha = 1.0;
        int backtracks = 0;
        SGEigenState cand;
        SGResidual rc;
        for (;;) {
            cand = SGEigenState::unflatten(x0 + alpha * gm.x, out.state.n_x(), out.state.n_xi(),
                                           out.state.real_mode);
            rc = residual(cand, A, H);
            if (0.5 * rc.norm * rc.norm <= f0 + opts.c * alpha * gd) break;
            if (++backtracks > opts.max_backtracks)
                fail(ErrorCode::NotConverged,
                     "newton: line search stagnated at step " + std::to_string(n) +
                         " (residual " + fmt_sci(r.norm) + ", last alpha " + fmt_sci(alpha) +
                         ")");
            alpha *= opts.rho;
        }

        sched = r.norm;
        out.state = std::move(cand);
        r = std::move(rc);
        out.log.total_gmres += gm.iterations;
        out.log.records.push_back({n + 1, gm.iterations, r.norm, alpha, backtracks});
    }
    out.log.converged = r.norm < opts.tol;
    return out;
}

} // namespace sgeig
