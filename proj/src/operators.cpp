#include "sgeig/operators.hpp"

#include "sgeig/errors.hpp"
#include "sgeig/matrix_market.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace sgeig {

namespace {

// Smallest complete-degree index set over m variables covering n_nu entries.
std::vector<MultiIndex> graded_prefix(int m_xi, int n_nu) {
    int p = 0;
    while (binomial_checked(m_xi + p, p) < n_nu) ++p;
    std::vector<MultiIndex> all = multi_index_set(m_xi, p);
    all.resize(static_cast<std::size_t>(n_nu));
    return all;
}

} // namespace

std::vector<MultiIndex> AffineOperator::term_indices() const {
    return graded_prefix(m_xi, n_nu());
}

Eigen::SparseMatrix<double> shift_mass(const Eigen::SparseMatrix<double>& G,
                                       const Eigen::SparseMatrix<double>& B, double sigma) {
    const int n_u = static_cast<int>(G.rows());
    const int n_p = static_cast<int>(B.rows());
    if (G.cols() != n_u) fail(ErrorCode::DimensionMismatch, "shift_mass: G must be square");
    if (B.cols() != n_u) fail(ErrorCode::DimensionMismatch, "shift_mass: B must have n_u columns");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(G.nonZeros() + 2 * B.nonZeros()));
    for (int k = 0; k < G.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(G, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
    if (sigma != 0.0)
        for (int k = 0; k < B.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(B, k); it; ++it) {
                const int i = static_cast<int>(it.row()); // pressure index
                const int j = static_cast<int>(it.col()); // velocity index
                trips.emplace_back(j, n_u + i, sigma * it.value()); // sigma B^T
                trips.emplace_back(n_u + i, j, sigma * it.value()); // sigma B
            }

    Eigen::SparseMatrix<double> M(n_u + n_p, n_u + n_p);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();
    return M;
}

WindSpec WindSpec::constant(double wx, double wy) {
    WindSpec w;
    w.kind = Kind::Constant;
    w.wx = wx;
    w.wy = wy;
    return w;
}

WindSpec WindSpec::vortex(double amp) {
    WindSpec w;
    w.kind = Kind::Vortex;
    w.amp = amp;
    return w;
}

AffineOperator synth_convection_diffusion(int n, const WindSpec& wind,
                                          const ViscosityExpansion& visc) {
    if (n < 3) fail(ErrorCode::Config, "synth_convection_diffusion: n must be >= 3");
    const int ni = n - 1;
    int dims = 0;
    if (visc.n_pts() == ni) dims = 1;
    else if (visc.n_pts() == ni * ni) dims = 2;
    else
        fail(ErrorCode::DimensionMismatch,
             "synth_convection_diffusion: viscosity grid does not match interior_grid(n, dims)");
    if (dims == 1 && wind.kind == WindSpec::Kind::Vortex)
        fail(ErrorCode::Config, "synth_convection_diffusion: vortex wind requires a 2D grid");

    const double h = 1.0 / n;
    const int n_x = dims == 1 ? ni : ni * ni;
    const std::vector<MultiIndex> alphas = graded_prefix(visc.m_xi, visc.n_nu());

    const Eigen::VectorXd mean_field = visc.ortho_field(alphas[0]);
    if (mean_field.minCoeff() <= 0.0)
        fail(ErrorCode::Config, "synth_convection_diffusion: mean viscosity must be positive");

    AffineOperator A;
    A.family = visc.family;
    A.m_xi = visc.m_xi;
    for (const MultiIndex& alpha : visc.indices) {
        int d = 0;
        for (int a : alpha) d += a;
        A.p = std::max(A.p, d);
    }

    // node r <-> (ix, iy), x fastest; neighbour offsets in flat index
    const auto flat = [&](int ix, int iy) { return iy * ni + ix; };

    for (int l = 0; l < visc.n_nu(); ++l) {
        const Eigen::VectorXd c = visc.ortho_field(alphas[static_cast<std::size_t>(l)]);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(n_x * (1 + 2 * dims)));
        const double inv_h2 = 1.0 / (h * h);

        const int ny = dims == 1 ? 1 : ni;
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < ni; ++ix) {
                const int r = dims == 1 ? ix : flat(ix, iy);
                double diag = 0.0;
                // edge coefficient: arithmetic mean of the adjacent node values,
                // constant extrapolation across the Dirichlet boundary
                const auto edge = [&](int nbr) {
                    return nbr < 0 ? c(r) : 0.5 * (c(r) + c(nbr));
                };
                const int left = ix > 0 ? (dims == 1 ? ix - 1 : flat(ix - 1, iy)) : -1;
                const int right = ix < ni - 1 ? (dims == 1 ? ix + 1 : flat(ix + 1, iy)) : -1;
                for (int nbr : {left, right}) {
                    const double e = edge(nbr) * inv_h2;
                    diag += e;
                    if (nbr >= 0) trips.emplace_back(r, nbr, -e);
                }
                if (dims == 2) {
                    const int down = iy > 0 ? flat(ix, iy - 1) : -1;
                    const int up = iy < ni - 1 ? flat(ix, iy + 1) : -1;
                    for (int nbr : {down, up}) {
                        const double e = edge(nbr) * inv_h2;
                        diag += e;
                        if (nbr >= 0) trips.emplace_back(r, nbr, -e);
                    }
                }
                trips.emplace_back(r, r, diag);

                if (l == 0 && wind.kind != WindSpec::Kind::None) {
                    double wx = wind.wx, wy = wind.wy;
                    if (wind.kind == WindSpec::Kind::Vortex) {
                        const double x = (ix + 1) * h;
                        const double y = (iy + 1) * h;
                        wx = wind.amp * (y - 0.5);
                        wy = wind.amp * (0.5 - x);
                    }
                    const double cx = wx / (2.0 * h);
                    if (right >= 0) trips.emplace_back(r, right, cx);
                    if (left >= 0) trips.emplace_back(r, left, -cx);
                    if (dims == 2) {
                        const double cy = wy / (2.0 * h);
                        if (iy < ni - 1) trips.emplace_back(r, flat(ix, iy + 1), cy);
                        if (iy > 0) trips.emplace_back(r, flat(ix, iy - 1), -cy);
                    }
                }
            }

        Eigen::SparseMatrix<double> K(n_x, n_x);
        K.setFromTriplets(trips.begin(), trips.end());
        K.makeCompressed();
        A.terms.push_back(std::move(K));
    }

    Eigen::SparseMatrix<double> M(n_x, n_x);
    M.setIdentity();
    M *= -h * h;
    A.mass = std::move(M);
    return A;
}

Eigen::SparseMatrix<double> sample_operator(const AffineOperator& A, const Eigen::VectorXd& xi) {
    if (xi.size() != A.m_xi)
        fail(ErrorCode::DimensionMismatch, "sample_operator: xi length does not match m_xi");
    const std::vector<MultiIndex> alphas = A.term_indices();
    Eigen::SparseMatrix<double> K = A.terms[0]; // psi_1 == 1
    for (int l = 1; l < A.n_nu(); ++l)
        K += eval_index(A.family, alphas[static_cast<std::size_t>(l)], xi) * A.terms[static_cast<std::size_t>(l)];
    K.makeCompressed();
    return K;
}

void save_bundle(const AffineOperator& A, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream os(dir / "manifest.txt");
    if (!os) fail(ErrorCode::Io, "save_bundle: cannot open " + (dir / "manifest.txt").string());
    os << "n_x = " << A.n_x() << "\n";
    os << "n_nu = " << A.n_nu() << "\n";
    os << "family = " << family_name(A.family) << "\n";
    os << "m_xi = " << A.m_xi << "\n";
    os << "p = " << A.p << "\n";
    os << "mass = mass.mtx\n";
    for (int l = 0; l < A.n_nu(); ++l) os << "k_" << (l + 1) << " = k_" << (l + 1) << ".mtx\n";
    if (!os) fail(ErrorCode::Io, "save_bundle: write failure on manifest");
    os.close();

    write_matrix_market(A.mass, dir / "mass.mtx", /*symmetric=*/true);
    for (int l = 0; l < A.n_nu(); ++l)
        write_matrix_market(A.terms[static_cast<std::size_t>(l)],
                            dir / ("k_" + std::to_string(l + 1) + ".mtx"));
}

AffineOperator load_bundle(const std::filesystem::path& dir) {
    const std::filesystem::path mf = dir / "manifest.txt";
    std::ifstream is(mf);
    if (!is) fail(ErrorCode::MissingFile, "load_bundle: cannot open " + mf.string());

    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Parse, "load_bundle: malformed manifest line in " + mf.string());
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    const auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorCode::Parse, "load_bundle: manifest missing key '" + key + "'");
        return it->second;
    };
    const auto get_int = [&](const std::string& key) {
        try {
            return std::stoi(get(key));
        } catch (const std::exception&) {
            fail(ErrorCode::Parse, "load_bundle: manifest key '" + key + "' is not an integer");
        }
    };

    AffineOperator A;
    const int n_x = get_int("n_x");
    const int n_nu = get_int("n_nu");
    A.family = family_from_name(get("family"));
    A.m_xi = get_int("m_xi");
    A.p = get_int("p");
    if (n_x < 1 || n_nu < 1 || A.m_xi < 1 || A.p < 0)
        fail(ErrorCode::Parse, "load_bundle: non-positive dimensions in " + mf.string());

    A.mass = read_matrix_market(dir / get("mass"));
    if (A.mass.rows() != n_x || A.mass.cols() != n_x)
        fail(ErrorCode::DimensionMismatch, "load_bundle: mass matrix is not n_x x n_x");
    const Eigen::SparseMatrix<double> MT = Eigen::SparseMatrix<double>(A.mass.transpose());
    double asym = 0.0;
    {
        Eigen::SparseMatrix<double> D = A.mass - MT;
        for (int k = 0; k < D.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it)
                asym = std::max(asym, std::abs(it.value()));
    }
    double mmax = 0.0;
    for (int k = 0; k < A.mass.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A.mass, k); it; ++it)
            mmax = std::max(mmax, std::abs(it.value()));
    if (asym > 1e-12 * std::max(1.0, mmax))
        fail(ErrorCode::NonsymmetricMass, "load_bundle: mass matrix asymmetry exceeds tolerance");

    for (int l = 1; l <= n_nu; ++l) {
        Eigen::SparseMatrix<double> K = read_matrix_market(dir / get("k_" + std::to_string(l)));
        if (K.rows() != n_x || K.cols() != n_x)
            fail(ErrorCode::DimensionMismatch,
                 "load_bundle: term k_" + std::to_string(l) + " has inconsistent dimensions");
        A.terms.push_back(std::move(K));
    }
    return A;
}

} // namespace sgeig
