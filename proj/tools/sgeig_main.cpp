// sgeig command-line front end.
//
// Subcommands:
//   gen          build a synthetic convection-diffusion operator bundle
//   run          solve the stochastic eigenvalue problem (mc | sc | sg)
//   compare      cross-method comparison report over finished run directories
//   tensor-dump  print the triple-product tensor of a basis
//
// Every output directory receives a config_echo.txt (flat key=value) that can
// be fed back through --config to reproduce the run.  All randomness is
// seeded; when no seed is given one is drawn and recorded.  Exit codes:
//   0 success, 2 non-convergence (flagged result), 3 invalid configuration,
//   4 file/parse problems, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <sgeig/errors.hpp>
#include <sgeig/gpc.hpp>
#include <sgeig/operators.hpp>
#include <sgeig/precond.hpp>
#include <sgeig/random_field.hpp>
#include <sgeig/sampling.hpp>
#include <sgeig/sg_state.hpp>
#include <sgeig/solver.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sgeig;

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotConverged: return 2;
    case ErrorCode::Config:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonsymmetricMass: return 3;
    case ErrorCode::MissingFile:
    case ErrorCode::Parse:
    case ErrorCode::Io: return 4;
    case ErrorCode::Numerical: return 1;
    }
    return 1;
}

// Relative output paths are placed under $SGEIG_OUT_ROOT when it is set.
fs::path resolve_out(const fs::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("SGEIG_OUT_ROOT"); root && *root) return fs::path(root) / p;
    return fs::absolute(p);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "cannot open " + file.string() + " for writing");
    os << text;
    os.flush();
    if (!os) fail(ErrorCode::Io, "write failed for " + file.string());
}

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// key=value lines readable back through --config.
std::string echo_lines(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Layer a flat key=value config file underneath the explicit command-line
// flags: the file's entries become --key=value tokens placed right after the
// subcommand name, so later explicit flags win.  Returns the argument list in
// natural order.
std::vector<std::string> apply_config_layer(int argc, char** argv, const CLI::App& app) {
    std::vector<std::string> rest;
    std::string cfg_file;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            if (i + 1 >= argc) fail(ErrorCode::Config, "--config needs a file argument");
            cfg_file = argv[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            cfg_file = a.substr(9);
        } else {
            rest.push_back(a);
        }
    }
    if (cfg_file.empty()) return rest;

    const auto sub_it = std::find_if(rest.begin(), rest.end(), [](const std::string& s) {
        return !s.empty() && s[0] != '-';
    });
    if (sub_it == rest.end()) fail(ErrorCode::Config, "--config requires a subcommand");
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; }))
        if (s->get_name() == *sub_it) sub = s;
    if (sub == nullptr) fail(ErrorCode::Config, "unknown subcommand '" + *sub_it + "'");

    std::ifstream is(cfg_file);
    if (!is) fail(ErrorCode::MissingFile, "cannot open config file " + cfg_file);

    std::vector<std::string> layered(rest.begin(), sub_it + 1);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string entry = trim(line);
        if (entry.empty() || entry[0] == '#') continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Parse,
                 cfg_file + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(entry.substr(0, eq));
        const std::string val = trim(entry.substr(eq + 1));
        if (key.empty())
            fail(ErrorCode::Parse, cfg_file + ":" + std::to_string(lineno) + ": empty key");
        if (sub->get_option_no_throw("--" + key) == nullptr)
            fail(ErrorCode::Config, cfg_file + ":" + std::to_string(lineno) +
                                        ": unknown key '" + key + "' for subcommand '" +
                                        sub->get_name() + "'");
        layered.push_back("--" + key + "=" + val);
    }
    layered.insert(layered.end(), sub_it + 1, rest.end());
    return layered;
}

// Node count per dimension so that quadrature is exact for every stored
// triple product (extended degree + 2p) and for the orthonormality check of
// the extended prefix itself.
QuadratureRule triple_rule_for(PolyFamily family, int m_xi, int p, int n_slices) {
    int ext_deg = p;
    while (binomial_checked(m_xi + ext_deg, ext_deg) < n_slices) ++ext_deg;
    const int nodes = std::max(3 * p + 1, ext_deg + p + 1);
    return gauss_rule(family, nodes, m_xi);
}

// ---------------------------------------------------------------- gen -----

struct GenOptions {
    std::string out;
    std::string field = "affine"; // affine | lognormal
    int n = 32;
    int dims = 2;
    int m_xi = 2;
    int p = 3;
    double cov = 0.01;
    double nu1 = 1.0;
    double lx = -1.0; // < 0: field-dependent default
    double ly = -1.0;
    std::string wind = "none"; // none | constant | vortex
    double wx = 0.0, wy = 0.0;
    double amp = 0.0;
};

int cmd_gen(const GenOptions& o) {
    const bool lognormal = o.field == "lognormal";
    if (o.cov < 0.0) fail(ErrorCode::Config, "gen: cov must be nonnegative");
    if (!(o.nu1 > 0.0)) fail(ErrorCode::Config, "gen: nu1 must be positive");
    if (o.m_xi < 1) fail(ErrorCode::Config, "gen: m-xi must be >= 1");
    if (o.p < 0) fail(ErrorCode::Config, "gen: p must be >= 0");

    // Correlation length defaults differ between the two field models.
    const double lx = o.lx > 0.0 ? o.lx : (lognormal ? 0.25 : 0.125);
    const double ly = o.ly > 0.0 ? o.ly : 0.25;

    WindSpec wind = WindSpec::none();
    if (o.wind == "constant") wind = WindSpec::constant(o.wx, o.wy);
    else if (o.wind == "vortex") wind = WindSpec::vortex(o.amp);
    else if (o.wind != "none") fail(ErrorCode::Config, "gen: unknown wind kind '" + o.wind + "'");

    const FieldGrid grid = interior_grid(o.n, o.dims);

    ViscosityExpansion visc;
    if (o.cov == 0.0) {
        // Deterministic viscosity: a single constant term regardless of model.
        visc.kind = lognormal ? ViscosityExpansion::Kind::Lognormal : ViscosityExpansion::Kind::Affine;
        visc.family = lognormal ? PolyFamily::Hermite : PolyFamily::Legendre;
        visc.m_xi = o.m_xi;
        visc.coeff = Eigen::MatrixXd::Constant(grid.size(), 1, o.nu1);
        visc.indices.push_back(MultiIndex(static_cast<std::size_t>(o.m_xi), 0));
    } else if (lognormal) {
        // nu = exp(g), g Gaussian with pointwise mean chosen so E[nu] = nu1
        // and variance sigma_g^2 = log(1 + cov^2).
        const double sigma_g = std::sqrt(std::log1p(o.cov * o.cov));
        const CovarianceKernel kernel{sigma_g, lx, ly};
        const DiscreteKL kl = discrete_kl(kernel, grid, o.m_xi);
        Eigen::MatrixXd g(grid.size(), o.m_xi);
        for (int j = 0; j < o.m_xi; ++j)
            g.col(j) = std::sqrt(std::max(kl.lambda(j), 0.0)) * kl.modes.col(j);
        const Eigen::VectorXd g0 =
            Eigen::VectorXd::Constant(grid.size(), std::log(o.nu1)) - 0.5 * g.array().square().rowwise().sum().matrix();
        const GpcBasis basis2p = make_basis(PolyFamily::Hermite, o.m_xi, 2 * o.p);
        visc = lognormal_coeffs(g0, g, basis2p, basis2p.size());
    } else {
        const CovarianceKernel kernel{1.0, lx, ly};
        const DiscreteKL kl = discrete_kl(kernel, grid, o.m_xi);
        visc = affine_viscosity(o.nu1, o.cov, kl, o.m_xi);
        if (visc.positivity_warning)
            std::cerr << "warning: affine viscosity can reach nonpositive values on the "
                         "parameter box; reduce cov or the correlation lengths\n";
    }

    const AffineOperator A = synth_convection_diffusion(o.n, wind, visc);
    const fs::path out = resolve_out(o.out);
    ensure_dir(out);
    save_bundle(A, out);

    write_text(out / "config_echo.txt",
               echo_lines({{"out", out.string()},
                           {"field", o.field},
                           {"n", std::to_string(o.n)},
                           {"dims", std::to_string(o.dims)},
                           {"m-xi", std::to_string(o.m_xi)},
                           {"p", std::to_string(o.p)},
                           {"cov", fmt_g17(o.cov)},
                           {"nu1", fmt_g17(o.nu1)},
                           {"lx", fmt_g17(lx)},
                           {"ly", fmt_g17(ly)},
                           {"wind", o.wind},
                           {"wx", fmt_g17(o.wx)},
                           {"wy", fmt_g17(o.wy)},
                           {"amp", fmt_g17(o.amp)}}));

    json summary;
    summary["command"] = "gen";
    summary["out"] = out.string();
    summary["field"] = o.field;
    summary["n"] = o.n;
    summary["dims"] = o.dims;
    summary["m_xi"] = o.m_xi;
    summary["p"] = o.p;
    summary["cov"] = o.cov;
    summary["nu1"] = o.nu1;
    summary["lx"] = lx;
    summary["ly"] = ly;
    summary["wind"] = o.wind;
    summary["n_x"] = A.n_x();
    summary["n_nu"] = A.n_nu();
    summary["family"] = family_name(A.family);
    summary["term_degree"] = A.p;
    summary["positivity_warning"] = visc.positivity_warning;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- run -----

struct RunOptions {
    std::string bundle;
    std::string out;
    std::string method = "sg"; // mc | sc | sg
    int p = 3;
    int threads = 1;
    // mc
    int samples = 1000;
    std::uint64_t seed = 0; // 0: draw one and record it
    // sc
    int level = 4;
    // sg
    std::string precond = "cMB";
    double eps_re = -1.0; // < 0: preconditioner default
    double eps_im = -1.0;
    int p_t = -1;
    std::string update = "auto"; // auto | on | off
    NewtonOptions newton;
};

void append_stats(json& summary, const SampleStats& st) {
    summary["mean_re"] = st.mean.real();
    summary["mean_im"] = st.mean.imag();
    summary["std_re"] = st.std_re;
    summary["std_im"] = st.std_im;
    summary["se_re"] = st.se_re;
    summary["se_im"] = st.se_im;
    summary["n_used"] = st.n_used;
}

int cmd_run(const RunOptions& o) {
    if (o.p < 0) fail(ErrorCode::Config, "run: p must be >= 0");
    if (o.threads < 1) fail(ErrorCode::Config, "run: threads must be >= 1");

    const fs::path bundle = fs::absolute(o.bundle);
    const AffineOperator A = load_bundle(bundle);
    const GpcBasis basis = make_basis(A.family, A.m_xi, o.p);
    const fs::path out = resolve_out(o.out);
    ensure_dir(out);

    // Effective seed: draw one for unseeded Monte Carlo runs so the echo can
    // reproduce the run exactly.
    std::uint64_t seed = o.seed;
    bool seed_drawn = false;
    if (o.method == "mc" && seed == 0) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        if (seed == 0) seed = 1;
        seed_drawn = true;
    }

    PrecondConfig pcfg = precond_defaults(precond_from_name(o.precond), o.p);
    if (o.eps_re >= 0.0) pcfg.eps_re = o.eps_re;
    if (o.eps_im >= 0.0) pcfg.eps_im = o.eps_im;
    if (o.p_t >= 0) pcfg.p_t = o.p_t;
    if (o.update == "on") pcfg.update = true;
    else if (o.update == "off") pcfg.update = false;
    else if (o.update != "auto") fail(ErrorCode::Config, "run: update must be auto|on|off");

    write_text(out / "config_echo.txt",
               echo_lines({{"bundle", bundle.string()},
                           {"out", out.string()},
                           {"method", o.method},
                           {"p", std::to_string(o.p)},
                           {"threads", std::to_string(o.threads)},
                           {"samples", std::to_string(o.samples)},
                           {"seed", std::to_string(seed)},
                           {"level", std::to_string(o.level)},
                           {"precond", o.precond},
                           {"eps-re", fmt_g17(pcfg.eps_re)},
                           {"eps-im", fmt_g17(pcfg.eps_im)},
                           {"p-t", std::to_string(pcfg.p_t)},
                           {"update", pcfg.update ? "on" : "off"},
                           {"tol", fmt_g17(o.newton.tol)},
                           {"tau", fmt_g17(o.newton.tau)},
                           {"rho", fmt_g17(o.newton.rho)},
                           {"c", fmt_g17(o.newton.c)},
                           {"max-newton", std::to_string(o.newton.max_newton)},
                           {"max-gmres", std::to_string(o.newton.max_gmres)},
                           {"max-backtracks", std::to_string(o.newton.max_backtracks)}}));

    json summary;
    summary["command"] = "run";
    summary["method"] = o.method;
    summary["bundle"] = bundle.string();
    summary["out"] = out.string();
    summary["family"] = family_name(A.family);
    summary["m_xi"] = A.m_xi;
    summary["p"] = o.p;
    summary["n_xi"] = basis.size();
    summary["n_x"] = A.n_x();
    summary["n_nu"] = A.n_nu();
    summary["threads"] = o.threads;

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;

    if (o.method == "mc" || o.method == "sc") {
        SampleSet set;
        if (o.method == "mc") {
            set = run_mc(A, o.samples, seed, o.threads);
            summary["n_samples"] = o.samples;
            summary["seed"] = seed;
            summary["seed_drawn"] = seed_drawn;
        } else {
            const QuadratureRule rule = smolyak_grid(A.family, A.m_xi, o.level);
            set = run_sc(A, rule, o.threads);
            summary["level"] = o.level;
            summary["n_solves"] = set.size();
        }
        summary["n_flagged"] = set.n_flagged();
        const GpcCoefficients coeffs = project_coefficients(set, basis, true);
        save_samples_csv(set, out / "samples.csv");
        save_coeff_csv(coeffs, out / "coefficients.csv");
        append_stats(summary, sample_stats(set));
    } else if (o.method == "sg") {
        const int n_slices = std::max(A.n_nu(), basis.size());
        const TripleProductTensor H =
            triple_product_tensor(basis, n_slices, triple_rule_for(A.family, A.m_xi, o.p, n_slices));
        const SGEigenState init = init_from_mean(A, basis.size());
        const NewtonResult res = newton_solve(A, H, init, pcfg, o.newton);

        save_iteration_log(res.log, out / "iterations.csv");
        save_state(res.state, out / "state.txt");

        GpcCoefficients coeffs;
        coeffs.basis = basis;
        coeffs.method = "sg";
        const int n_xi = res.state.n_xi();
        coeffs.lambda.resize(n_xi);
        coeffs.vectors.resize(res.state.n_x(), n_xi);
        for (int k = 0; k < n_xi; ++k) {
            const double li = res.state.real_mode ? 0.0 : res.state.lam_im(k);
            coeffs.lambda(k) = {res.state.lam_re(k), li};
            coeffs.vectors.col(k).real() = res.state.V_re.col(k);
            coeffs.vectors.col(k).imag() =
                res.state.real_mode ? Eigen::VectorXd::Zero(res.state.n_x()).eval()
                                    : Eigen::VectorXd(res.state.V_im.col(k));
        }
        save_coeff_csv(coeffs, out / "coefficients.csv");

        double var_re = 0.0, var_im = 0.0;
        for (int k = 1; k < n_xi; ++k) {
            var_re += coeffs.lambda(k).real() * coeffs.lambda(k).real();
            var_im += coeffs.lambda(k).imag() * coeffs.lambda(k).imag();
        }
        summary["precond"] = o.precond;
        summary["eps_re"] = pcfg.eps_re;
        summary["eps_im"] = pcfg.eps_im;
        summary["p_t"] = pcfg.p_t;
        summary["update"] = pcfg.update;
        summary["tol"] = o.newton.tol;
        summary["real_mode"] = res.state.real_mode;
        summary["converged"] = res.log.converged;
        summary["newton_steps"] = static_cast<int>(res.log.records.size()) - 1;
        summary["total_gmres"] = res.log.total_gmres;
        summary["final_residual"] = res.log.records.back().residual;
        summary["lambda_re"] = coeffs.lambda(0).real();
        summary["lambda_im"] = coeffs.lambda(0).imag();
        summary["lambda_std_re"] = std::sqrt(var_re);
        summary["lambda_std_im"] = std::sqrt(var_im);

        std::cout << "step  gmres  residual      alpha     backtracks\n";
        for (const IterationRecord& r : res.log.records) {
            char line[128];
            std::snprintf(line, sizeof line, "%4d  %5d  %.6e  %.3g  %d\n", r.step, r.gmres_iters,
                          r.residual, r.alpha, r.backtracks);
            std::cout << line;
        }
        if (!res.log.converged) rc = 2;
    } else {
        fail(ErrorCode::Config, "run: unknown method '" + o.method + "' (expected mc|sc|sg)");
    }

    const auto t1 = std::chrono::steady_clock::now();
    summary["elapsed_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    write_text(out / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return rc;
}

// ------------------------------------------------------------ compare -----

struct CompareOptions {
    std::string out;
    std::vector<std::string> dirs;
    int grid_points = 201;
};

struct RunData {
    fs::path dir;
    std::vector<CoeffRow> rows;
    json summary;                 // absent fields tolerated
    std::vector<double> re, im;   // unflagged sample values, empty when none
};

// samples.csv reader (columns xi_1..xi_m, re_lambda, im_lambda, flagged).
void load_samples(const fs::path& file, std::vector<double>& re, std::vector<double>& im) {
    std::ifstream is(file);
    if (!is) return; // sampling output is optional for a run directory
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::Parse, "empty samples file " + file.string());
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) cols.push_back(f);
    }
    const auto col_of = [&](const std::string& name) {
        const auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end())
            fail(ErrorCode::Parse, "samples file " + file.string() + " lacks column " + name);
        return static_cast<int>(it - cols.begin());
    };
    const int c_re = col_of("re_lambda"), c_im = col_of("im_lambda"), c_fl = col_of("flagged");
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (static_cast<int>(fields.size()) != static_cast<int>(cols.size()))
            fail(ErrorCode::Parse,
                 "bad row " + std::to_string(lineno) + " in samples file " + file.string());
        if (fields[static_cast<std::size_t>(c_fl)] != "0") continue;
        try {
            re.push_back(std::stod(fields[static_cast<std::size_t>(c_re)]));
            im.push_back(std::stod(fields[static_cast<std::size_t>(c_im)]));
        } catch (const std::exception&) {
            fail(ErrorCode::Parse,
                 "bad number in row " + std::to_string(lineno) + " of " + file.string());
        }
    }
}

int cmd_compare(const CompareOptions& o) {
    if (o.dirs.size() < 2) fail(ErrorCode::Config, "compare: need at least two run directories");

    std::vector<RunData> runs;
    for (const std::string& d : o.dirs) {
        RunData r;
        r.dir = fs::absolute(d);
        r.rows = load_coeff_csv(r.dir / "coefficients.csv");
        if (fs::exists(r.dir / "summary.json")) {
            std::ifstream is(r.dir / "summary.json");
            try {
                is >> r.summary;
            } catch (const std::exception& e) {
                fail(ErrorCode::Parse, "bad summary.json in " + r.dir.string() + ": " + e.what());
            }
        }
        load_samples(r.dir / "samples.csv", r.re, r.im);
        runs.push_back(std::move(r));
    }

    // Compatible bases: identical (k, degree) sequences.
    const RunData& base = runs.front();
    for (const RunData& r : runs) {
        if (r.rows.size() != base.rows.size())
            fail(ErrorCode::Config, "compare: coefficient tables differ in length (" +
                                        base.dir.string() + " vs " + r.dir.string() + ")");
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            if (r.rows[i].k != base.rows[i].k || r.rows[i].degree != base.rows[i].degree)
                fail(ErrorCode::Config, "compare: basis mismatch between " + base.dir.string() +
                                            " and " + r.dir.string());
    }
    if (base.rows.empty()) fail(ErrorCode::Config, "compare: empty coefficient tables");

    const fs::path out = resolve_out(o.out);
    ensure_dir(out);

    // Side-by-side coefficient table.
    std::string table = "k,degree";
    for (std::size_t i = 0; i < runs.size(); ++i)
        table += ",re_lambda_" + std::to_string(i + 1) + ",im_lambda_" + std::to_string(i + 1);
    table += "\n";
    for (std::size_t row = 0; row < base.rows.size(); ++row) {
        table += std::to_string(base.rows[row].k) + "," + std::to_string(base.rows[row].degree);
        for (const RunData& r : runs)
            table += "," + fmt_g17(r.rows[row].re) + "," + fmt_g17(r.rows[row].im);
        table += "\n";
    }
    write_text(out / "compare.csv", table);
    std::cout << table;

    // Discrepancies against the first run, scaled by its leading coefficient.
    const double scale = std::hypot(base.rows[0].re, base.rows[0].im);
    json diffs = json::array();
    for (std::size_t i = 1; i < runs.size(); ++i) {
        double max_abs = 0.0;
        int arg = 0;
        for (std::size_t row = 0; row < base.rows.size(); ++row) {
            const double d = std::hypot(runs[i].rows[row].re - base.rows[row].re,
                                        runs[i].rows[row].im - base.rows[row].im);
            if (d > max_abs) {
                max_abs = d;
                arg = base.rows[row].k;
            }
        }
        json e;
        e["run"] = runs[i].dir.string();
        e["max_abs_diff"] = max_abs;
        e["max_rel_diff"] = scale > 0.0 ? max_abs / scale : max_abs;
        e["argmax_k"] = arg;
        diffs.push_back(e);
        std::cout << "max |delta| vs run 1: " << max_abs << " (rel " << e["max_rel_diff"].dump()
                  << ", k=" << arg << ") for " << runs[i].dir.string() << "\n";
    }

    // Monte Carlo z-scores |mean_mc - lambda_1(other)| / se_mc, per part.
    json zscores = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const json& s = runs[i].summary;
        if (!s.contains("method") || s["method"] != "mc") continue;
        if (!s.contains("mean_re") || !s.contains("se_re")) continue;
        const double mre = s["mean_re"], mim = s.value("mean_im", 0.0);
        const double sre = s["se_re"], sim = s.value("se_im", 0.0);
        for (std::size_t j = 0; j < runs.size(); ++j) {
            if (j == i) continue;
            const double dre = std::abs(mre - runs[j].rows[0].re);
            const double dim = std::abs(mim - runs[j].rows[0].im);
            json z;
            z["mc_run"] = runs[i].dir.string();
            z["ref_run"] = runs[j].dir.string();
            z["z_re"] = sre > 0.0 ? dre / sre : (dre == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            z["z_im"] = sim > 0.0 ? dim / sim : (dim == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            zscores.push_back(z);
            std::cout << "mc z-score vs " << runs[j].dir.string() << ": z_re=" << z["z_re"].dump()
                      << " z_im=" << z["z_im"].dump() << "\n";
        }
    }

    // KDE overlays on a common grid for every run that carries samples.
    const auto overlay = [&](auto member, const std::string& file) -> std::string {
        std::vector<std::size_t> with;
        for (std::size_t i = 0; i < runs.size(); ++i)
            if (!(runs[i].*member).empty()) with.push_back(i);
        if (with.empty()) return {};
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, bw = 0.0;
        for (std::size_t i : with) {
            const auto& v = runs[i].*member;
            Eigen::MatrixXd s = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
            lo = std::min(lo, *std::min_element(v.begin(), v.end()));
            hi = std::max(hi, *std::max_element(v.begin(), v.end()));
            bw = std::max(bw, silverman_bandwidth(s)(0));
        }
        if (bw <= 0.0) bw = std::max(1e-12, 1e-3 * std::max(std::abs(lo), std::abs(hi)));
        Eigen::MatrixXd grid(o.grid_points, 1);
        for (int g = 0; g < o.grid_points; ++g)
            grid(g, 0) = (lo - 3 * bw) + (hi - lo + 6 * bw) * g / (o.grid_points - 1);
        std::string text = "lambda";
        for (std::size_t i : with) text += ",dens_" + std::to_string(i + 1);
        text += "\n";
        std::vector<Eigen::VectorXd> dens;
        for (std::size_t i : with) {
            const auto& v = runs[i].*member;
            Eigen::MatrixXd s = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
            dens.push_back(kde(s, grid));
        }
        for (int g = 0; g < o.grid_points; ++g) {
            text += fmt_g17(grid(g, 0));
            for (const auto& d : dens) text += "," + fmt_g17(d(g));
            text += "\n";
        }
        write_text(out / file, text);
        return file;
    };
    json kde_files = json::array();
    if (const std::string f = overlay(&RunData::re, "kde_re.csv"); !f.empty()) kde_files.push_back(f);
    bool any_im = false;
    for (const RunData& r : runs)
        for (double v : r.im) any_im = any_im || v != 0.0;
    if (any_im)
        if (const std::string f = overlay(&RunData::im, "kde_im.csv"); !f.empty())
            kde_files.push_back(f);

    json summary;
    summary["command"] = "compare";
    summary["out"] = out.string();
    json rd = json::array();
    for (const RunData& r : runs) rd.push_back(r.dir.string());
    summary["runs"] = rd;
    summary["n_rows"] = static_cast<int>(base.rows.size());
    summary["rel_scale"] = scale;
    summary["diffs"] = diffs;
    summary["mc_z"] = zscores;
    summary["kde_files"] = kde_files;
    write_text(out / "compare_summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// -------------------------------------------------------- tensor-dump -----

struct TensorOptions {
    std::string family = "legendre";
    int m_xi = 2;
    int p = 3;
    int n_nu = 0; // 0: basis size
    std::string out; // empty: stdout
};

int cmd_tensor_dump(const TensorOptions& o) {
    const GpcBasis basis = make_basis(family_from_name(o.family), o.m_xi, o.p);
    const int n_slices = o.n_nu > 0 ? o.n_nu : basis.size();
    const TripleProductTensor t =
        triple_product_tensor(basis, n_slices, triple_rule_for(basis.family, o.m_xi, o.p, n_slices));
    json summary;
    summary["command"] = "tensor-dump";
    summary["family"] = family_name(basis.family);
    summary["m_xi"] = o.m_xi;
    summary["p"] = o.p;
    summary["n_xi"] = t.n_xi;
    summary["n_nu"] = t.n_nu;
    summary["nonzeros"] = t.nonzeros();
    if (o.out.empty()) {
        dump_tensor(t, std::cout);
        std::cerr << summary.dump(2) << "\n";
    } else {
        const fs::path out = resolve_out(o.out);
        if (out.has_parent_path()) ensure_dir(out.parent_path());
        std::ofstream os(out);
        if (!os) fail(ErrorCode::Io, "cannot open " + out.string() + " for writing");
        dump_tensor(t, os);
        os.flush();
        if (!os) fail(ErrorCode::Io, "write failed for " + out.string());
        summary["out"] = out.string();
        std::cout << summary.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic Galerkin / collocation / Monte Carlo eigenvalue expansions", "sgeig"};
    app.require_subcommand(1);

    std::string cfg_dummy; // consumed before parsing; registered for --help only
    GenOptions g;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic operator bundle");
    gen->add_option("--config", cfg_dummy, "flat key=value config file (flags override)");
    gen->add_option("--out", g.out, "bundle directory")->required();
    gen->add_option("--field", g.field, "viscosity model")
        ->check(CLI::IsMember({"affine", "lognormal"}));
    gen->add_option("--n", g.n, "grid parameter, h = 1/n");
    gen->add_option("--dims", g.dims, "spatial dimension")->check(CLI::IsMember({1, 2}));
    gen->add_option("--m-xi", g.m_xi, "number of random variables");
    gen->add_option("--p", g.p, "target expansion degree (lognormal terms use degree 2p)");
    gen->add_option("--cov", g.cov, "coefficient of variation of the viscosity");
    gen->add_option("--nu1", g.nu1, "mean viscosity");
    gen->add_option("--lx", g.lx, "correlation length in x (default depends on field)");
    gen->add_option("--ly", g.ly, "correlation length in y (default depends on field)");
    gen->add_option("--wind", g.wind, "wind kind")->check(CLI::IsMember({"none", "constant", "vortex"}));
    gen->add_option("--wx", g.wx, "constant wind x component");
    gen->add_option("--wy", g.wy, "constant wind y component");
    gen->add_option("--amp", g.amp, "vortex amplitude");

    RunOptions r;
    CLI::App* run = app.add_subcommand("run", "solve the stochastic eigenvalue problem");
    run->add_option("--config", cfg_dummy, "flat key=value config file (flags override)");
    run->add_option("--bundle", r.bundle, "operator bundle directory")->required();
    run->add_option("--out", r.out, "run output directory")->required();
    run->add_option("--method", r.method, "solution method")->check(CLI::IsMember({"mc", "sc", "sg"}));
    run->add_option("--p", r.p, "gPC expansion degree");
    run->add_option("--threads", r.threads, "worker threads for sampling methods");
    run->add_option("--samples", r.samples, "Monte Carlo sample count");
    run->add_option("--seed", r.seed, "Monte Carlo seed (0: draw and record)");
    run->add_option("--level", r.level, "Smolyak grid level");
    run->add_option("--precond", r.precond, "preconditioner")
        ->check(CLI::IsMember({"MB", "cMB", "cMBu", "chGS"}));
    run->add_option("--eps-re", r.eps_re, "mean-eigenvalue damping, real part");
    run->add_option("--eps-im", r.eps_im, "mean-eigenvalue damping, imaginary part");
    run->add_option("--p-t", r.p_t, "hierarchical Gauss-Seidel truncation degree");
    run->add_option("--update", r.update, "refresh the preconditioner each step")
        ->check(CLI::IsMember({"auto", "on", "off"}));
    run->add_option("--tol", r.newton.tol, "Newton residual tolerance");
    run->add_option("--tau", r.newton.tau, "GMRES forcing parameter");
    run->add_option("--rho", r.newton.rho, "backtracking contraction factor");
    run->add_option("--c", r.newton.c, "Armijo slope fraction");
    run->add_option("--max-newton", r.newton.max_newton, "Newton step limit");
    run->add_option("--max-gmres", r.newton.max_gmres, "GMRES iteration limit");
    run->add_option("--max-backtracks", r.newton.max_backtracks, "line-search limit");

    CompareOptions c;
    CLI::App* cmp = app.add_subcommand("compare", "compare finished run directories");
    cmp->add_option("--out", c.out, "report output directory")->required();
    cmp->add_option("dirs", c.dirs, "run directories (first one is the reference)")->expected(-2);
    cmp->add_option("--grid-points", c.grid_points, "KDE grid resolution")
        ->check(CLI::PositiveNumber);

    TensorOptions t;
    CLI::App* td = app.add_subcommand("tensor-dump", "print a triple-product tensor");
    td->add_option("--family", t.family, "polynomial family")
        ->check(CLI::IsMember({"hermite", "legendre"}));
    td->add_option("--m-xi", t.m_xi, "number of random variables");
    td->add_option("--p", t.p, "basis degree");
    td->add_option("--n-nu", t.n_nu, "number of slices (0: basis size)");
    td->add_option("--out", t.out, "output file (default: stdout)");

    try {
        // Config-file entries are layered below explicit flags; last value wins.
        for (CLI::App* sub : {gen, run, cmp, td})
            for (CLI::Option* opt : sub->get_options())
                if (opt->get_expected_max() == 1)
                    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        std::vector<std::string> args = apply_config_layer(argc, argv, app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
        if (gen->parsed()) return cmd_gen(g);
        if (run->parsed()) return cmd_run(r);
        if (cmp->parsed()) return cmd_compare(c);
        if (td->parsed()) return cmd_tensor_dump(t);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
