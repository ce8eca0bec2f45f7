// Integration tests for the sgeig command-line tool.  Every test drives the
// real binary (path in SGEIG_CLI_BIN) through a shell and inspects its exit
// code and output files.
#include <doctest.h>

#include <json.hpp>

#include <sgeig/dense_eig.hpp>
#include <sgeig/errors.hpp>
#include <sgeig/gpc.hpp>
#include <sgeig/operators.hpp>
#include <sgeig/random_field.hpp>
#include <sgeig/sampling.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cli_bin() {
    const char* env = std::getenv("SGEIG_CLI_BIN");
    REQUIRE_MESSAGE(env != nullptr, "SGEIG_CLI_BIN must point at the sgeig binary");
    REQUIRE_MESSAGE(fs::exists(env), "SGEIG_CLI_BIN points at a missing file");
    return env;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "sgeig_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CmdResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path capture = work_dir() / ("capture_" + std::to_string(counter++) + ".txt");
    std::string cmd = env_prefix;
    if (!cmd.empty()) cmd += " ";
    cmd += cli_bin() + " " + args + " > " + capture.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(capture);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& file) {
    std::ifstream is(file);
    REQUIRE_MESSAGE(is.good(), ("cannot open " + file.string()));
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> read_manifest(const fs::path& bundle) {
    std::map<std::string, std::string> kv;
    std::ifstream is(bundle / "manifest.txt");
    REQUIRE_MESSAGE(is.good(), ("missing manifest in " + bundle.string()));
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

json read_json(const fs::path& file) { return json::parse(slurp(file)); }

// Shared small affine bundle (1D so the per-sample dense solves stay cheap).
fs::path small_bundle() {
    static const fs::path dir = [] {
        const fs::path d = work_dir() / "bundle_small";
        const CmdResult r = run_cli("gen --out " + d.string() +
                                    " --field affine --n 12 --dims 1 --m-xi 2 --p 2 --cov 0.05");
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        return d;
    }();
    return dir;
}

} // namespace

TEST_CASE("gen bundle equals direct construction and loads back bit-exactly") {
    const fs::path dir = work_dir() / "bundle_direct";
    const CmdResult r = run_cli("gen --out " + dir.string() +
                                " --field affine --n 9 --dims 2 --m-xi 2 --p 3 --cov 0.05"
                                " --wind vortex --amp 40");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    const auto manifest = read_manifest(dir);
    CHECK(manifest.at("n_nu") == "3");
    CHECK(manifest.at("n_x") == "64");
    CHECK(manifest.at("family") == "legendre");

    // Same construction through the library, compared entry for entry.
    const sgeig::FieldGrid grid = sgeig::interior_grid(9, 2);
    const sgeig::CovarianceKernel kernel{1.0, 0.125, 0.25};
    const sgeig::DiscreteKL kl = sgeig::discrete_kl(kernel, grid, 2);
    const sgeig::ViscosityExpansion visc = sgeig::affine_viscosity(1.0, 0.05, kl, 2);
    const sgeig::AffineOperator direct =
        sgeig::synth_convection_diffusion(9, sgeig::WindSpec::vortex(40.0), visc);

    const sgeig::AffineOperator loaded = sgeig::load_bundle(dir);
    REQUIRE(loaded.n_nu() == direct.n_nu());
    REQUIRE(loaded.n_x() == direct.n_x());
    CHECK(loaded.family == direct.family);
    CHECK(loaded.m_xi == direct.m_xi);
    CHECK(loaded.p == direct.p);
    for (int l = 0; l < direct.n_nu(); ++l) {
        const Eigen::MatrixXd diff =
            Eigen::MatrixXd(loaded.terms[static_cast<std::size_t>(l)]) -
            Eigen::MatrixXd(direct.terms[static_cast<std::size_t>(l)]);
        CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((Eigen::MatrixXd(loaded.mass) - Eigen::MatrixXd(direct.mass)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("lognormal gen reports n_nu=28 for m_xi=2, p=3") {
    const fs::path dir = work_dir() / "bundle_lognormal";
    const CmdResult r = run_cli("gen --out " + dir.string() +
                                " --field lognormal --n 6 --dims 2 --m-xi 2 --p 3 --cov 0.1");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const auto manifest = read_manifest(dir);
    CHECK(manifest.at("n_nu") == "28");
    CHECK(manifest.at("family") == "hermite");
    CHECK(manifest.at("p") == "6");
}

TEST_CASE("cov=0 produces a single-term bundle") {
    const fs::path dir = work_dir() / "bundle_cov0";
    const CmdResult r = run_cli("gen --out " + dir.string() +
                                " --field affine --n 8 --dims 1 --m-xi 3 --p 2 --cov 0");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(read_manifest(dir).at("n_nu") == "1");
    const sgeig::AffineOperator A = sgeig::load_bundle(dir);
    CHECK(A.n_nu() == 1);
    CHECK(A.m_xi == 3);
}

TEST_CASE("mc runs are reproducible for a fixed seed") {
    const fs::path b = small_bundle();
    const fs::path o1 = work_dir() / "mc_a", o2 = work_dir() / "mc_b";
    for (const fs::path& o : {o1, o2}) {
        const CmdResult r = run_cli("run --bundle " + b.string() + " --out " + o.string() +
                                    " --method mc --p 2 --samples 64 --seed 1234 --threads 2");
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    }
    CHECK(slurp(o1 / "samples.csv") == slurp(o2 / "samples.csv"));
    CHECK(slurp(o1 / "coefficients.csv") == slurp(o2 / "coefficients.csv"));
    const json s = read_json(o1 / "summary.json");
    CHECK(s["seed"] == 1234);
    CHECK(s["seed_drawn"] == false);
    CHECK(s["n_flagged"] == 0);
}

TEST_CASE("unseeded mc draws a seed and records it in echo and summary") {
    const fs::path b = small_bundle();
    const fs::path o = work_dir() / "mc_drawn";
    const CmdResult r = run_cli("run --bundle " + b.string() + " --out " + o.string() +
                                " --method mc --p 1 --samples 8");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const json s = read_json(o / "summary.json");
    CHECK(s["seed_drawn"] == true);
    const std::uint64_t seed = s["seed"];
    CHECK(seed != 0);
    CHECK(slurp(o / "config_echo.txt").find("seed=" + std::to_string(seed)) != std::string::npos);
}

TEST_CASE("sc level-4 m=2 run reports 29 solves") {
    const fs::path b = small_bundle();
    const fs::path o = work_dir() / "sc_29";
    const CmdResult r = run_cli("run --bundle " + b.string() + " --out " + o.string() +
                                " --method sc --p 2 --level 4");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const json s = read_json(o / "summary.json");
    CHECK(s["n_solves"] == 29);
    CHECK(s["n_flagged"] == 0);
    CHECK(fs::exists(o / "samples.csv"));
    CHECK(fs::exists(o / "coefficients.csv"));
}

TEST_CASE("sg run on an n_xi=1 problem matches the dense eigenpair") {
    const fs::path b = small_bundle();
    const fs::path o = work_dir() / "sg_det";
    const CmdResult r = run_cli("run --bundle " + b.string() + " --out " + o.string() +
                                " --method sg --p 0 --precond cMB");
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    const auto rows = sgeig::load_coeff_csv(o / "coefficients.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].k == 1);
    CHECK(rows[0].degree == 0);

    const sgeig::AffineOperator A = sgeig::load_bundle(b);
    const auto pairs = sgeig::solve_generalized(Eigen::MatrixXd(A.terms[0]),
                                                Eigen::MatrixXd(A.mass), A.n_x());
    const sgeig::EigenPair top = sgeig::rightmost(pairs);
    const std::complex<double> got(rows[0].re, rows[0].im);
    CHECK(std::abs(got - top.lambda) <= 1e-8 * std::abs(top.lambda));
}

TEST_CASE("config echo reproduces an sg run bit-exactly, flags override") {
    const fs::path b = small_bundle();
    const fs::path o1 = work_dir() / "sg_echo_a", o2 = work_dir() / "sg_echo_b";
    const CmdResult r1 = run_cli("run --bundle " + b.string() + " --out " + o1.string() +
                                 " --method sg --p 2 --precond chGS --p-t 1");
    REQUIRE_MESSAGE(r1.exit_code == 0, r1.output);
    const CmdResult r2 = run_cli("run --config " + (o1 / "config_echo.txt").string() + " --out " +
                                 o2.string());
    REQUIRE_MESSAGE(r2.exit_code == 0, r2.output);
    CHECK(slurp(o1 / "coefficients.csv") == slurp(o2 / "coefficients.csv"));
    CHECK(slurp(o1 / "iterations.csv") == slurp(o2 / "iterations.csv"));
    const json s2 = read_json(o2 / "summary.json");
    CHECK(s2["precond"] == "chGS");
    CHECK(s2["p_t"] == 1);

    // Explicit flag beats config value.
    const fs::path o3 = work_dir() / "sg_echo_c";
    const CmdResult r3 = run_cli("run --config " + (o1 / "config_echo.txt").string() + " --out " +
                                 o3.string() + " --p 1");
    REQUIRE_MESSAGE(r3.exit_code == 0, r3.output);
    CHECK(read_json(o3 / "summary.json")["n_xi"] == 3);
}

TEST_CASE("compare of a run with itself reports zero discrepancies") {
    const fs::path b = small_bundle();
    const fs::path o = work_dir() / "sg_for_compare";
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + o.string() +
                    " --method sg --p 2").exit_code == 0);
    const fs::path c = work_dir() / "cmp_self";
    const CmdResult r =
        run_cli("compare --out " + c.string() + " " + o.string() + " " + o.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const json s = read_json(c / "compare_summary.json");
    REQUIRE(s["diffs"].size() == 1);
    CHECK(s["diffs"][0]["max_abs_diff"] == 0.0);
    CHECK(s["diffs"][0]["max_rel_diff"] == 0.0);
    CHECK(fs::exists(c / "compare.csv"));
}

TEST_CASE("compare overlays methods and reports mc z-scores") {
    const fs::path b = small_bundle();
    const fs::path sg = work_dir() / "cmp_sg", sc = work_dir() / "cmp_sc", mc = work_dir() / "cmp_mc";
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + sg.string() +
                    " --method sg --p 2").exit_code == 0);
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + sc.string() +
                    " --method sc --p 2 --level 4").exit_code == 0);
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + mc.string() +
                    " --method mc --p 2 --samples 200 --seed 7").exit_code == 0);
    const fs::path c = work_dir() / "cmp_all";
    const CmdResult r = run_cli("compare --out " + c.string() + " " + sg.string() + " " +
                                sc.string() + " " + mc.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const json s = read_json(c / "compare_summary.json");

    // SG and SC solve the same expansion by different routes; tight agreement.
    CHECK(double(s["diffs"][0]["max_rel_diff"]) < 1e-5);
    REQUIRE(s["mc_z"].size() == 2); // mc against each of the other two runs
    for (const auto& z : s["mc_z"]) CHECK(double(z["z_re"]) < 5.0);

    // KDE overlay covers the two sampled runs on one grid.
    REQUIRE(fs::exists(c / "kde_re.csv"));
    std::istringstream k(slurp(c / "kde_re.csv"));
    std::string header;
    std::getline(k, header);
    CHECK(header == "lambda,dens_2,dens_3");
}

TEST_CASE("compare rejects mismatched bases") {
    const fs::path b = small_bundle();
    const fs::path a = work_dir() / "mismatch_a", c = work_dir() / "mismatch_b";
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + a.string() +
                    " --method sg --p 2").exit_code == 0);
    REQUIRE(run_cli("run --bundle " + b.string() + " --out " + c.string() +
                    " --method sg --p 1").exit_code == 0);
    const CmdResult r = run_cli("compare --out " + (work_dir() / "mismatch_out").string() + " " +
                                a.string() + " " + c.string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("differ in length") != std::string::npos);
}

TEST_CASE("tensor-dump reports the pinned Legendre nonzero count") {
    const fs::path f = work_dir() / "tensor.txt";
    const CmdResult r =
        run_cli("tensor-dump --family legendre --m-xi 2 --p 3 --n-nu 3 --out " + f.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    const json s = json::parse(r.output);
    CHECK(s["n_xi"] == 10);
    CHECK(s["n_nu"] == 3);
    CHECK(s["nonzeros"] == 34);

    std::istringstream is(slurp(f));
    int l = 0, j = 0, k = 0, lines = 0;
    double v = 0.0;
    while (is >> l >> j >> k >> v) ++lines;
    CHECK(lines == 34);
}

TEST_CASE("SGEIG_OUT_ROOT reroutes relative output paths") {
    const fs::path root = work_dir() / "out_root";
    const CmdResult r = run_cli("run --bundle " + small_bundle().string() +
                                    " --out nested/run1 --method sg --p 1",
                                "SGEIG_OUT_ROOT=" + root.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(fs::exists(root / "nested/run1/summary.json"));
}

TEST_CASE("exit codes distinguish error classes") {
    // missing bundle -> file error
    CHECK(run_cli("run --bundle " + (work_dir() / "no_such_bundle").string() +
                  " --out " + (work_dir() / "e1").string())
              .exit_code == 4);
    // invalid option value -> config error
    CHECK(run_cli("run --bundle " + small_bundle().string() + " --out " +
                  (work_dir() / "e2").string() + " --method bogus")
              .exit_code == 3);
    // unknown config key -> config error
    const fs::path bad = work_dir() / "bad.cfg";
    std::ofstream(bad) << "no_such_key=1\n";
    CHECK(run_cli("run --config " + bad.string() + " --bundle " + small_bundle().string() +
                  " --out " + (work_dir() / "e3").string())
              .exit_code == 3);
    // missing config file -> file error
    CHECK(run_cli("run --config " + (work_dir() / "ghost.cfg").string() + " --bundle " +
                  small_bundle().string() + " --out " + (work_dir() / "e4").string())
              .exit_code == 4);
    // invalid precond eps -> config error from the library
    CHECK(run_cli("run --bundle " + small_bundle().string() + " --out " +
                  (work_dir() / "e5").string() + " --method sg --p 1 --eps-re 1.5")
              .exit_code == 3);
}

TEST_CASE("iteration budget exhaustion exits with the non-convergence code") {
    const fs::path o = work_dir() / "sg_short";
    const CmdResult r = run_cli("run --bundle " + small_bundle().string() + " --out " + o.string() +
                                " --method sg --p 2 --max-newton 1");
    CHECK(r.exit_code == 2);
    const json s = read_json(o / "summary.json");
    CHECK(s["converged"] == false);
    CHECK(s["newton_steps"] == 1);
    CHECK(fs::exists(o / "iterations.csv")); // partial results are still written
}
