#include "sgeig/matrix_market.hpp"

#include "sgeig/errors.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sgeig {

void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::filesystem::path& file,
                         bool symmetric) {
    if (symmetric && A.rows() != A.cols())
        fail(ErrorCode::DimensionMismatch, "write_matrix_market: symmetric output requires a square matrix");

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(A.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
            if (symmetric && it.row() < it.col()) continue; // keep the lower triangle
            entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }

    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "write_matrix_market: cannot open " + file.string());
    os << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << "\n";
    os << A.rows() << ' ' << A.cols() << ' ' << entries.size() << "\n";
    char buf[96];
    for (const auto& t : entries) {
        std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", t.row() + 1, t.col() + 1, t.value());
        os << buf;
    }
    if (!os) fail(ErrorCode::Io, "write_matrix_market: write failure on " + file.string());
}

Eigen::SparseMatrix<double> read_matrix_market(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) fail(ErrorCode::MissingFile, "read_matrix_market: cannot open " + file.string());

    std::string header;
    if (!std::getline(is, header))
        fail(ErrorCode::Parse, "read_matrix_market: empty file " + file.string());
    std::istringstream hs(header);
    std::string banner, object, fmt, field, storage;
    hs >> banner >> object >> fmt >> field >> storage;
    for (auto* s : {&object, &fmt, &field, &storage})
        for (char& c : *s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (banner != "%%MatrixMarket" || object != "matrix" || fmt != "coordinate" || field != "real")
        fail(ErrorCode::Parse, "read_matrix_market: unsupported header in " + file.string());
    const bool symmetric = storage == "symmetric";
    if (!symmetric && storage != "general")
        fail(ErrorCode::Parse, "read_matrix_market: unsupported storage '" + storage + "' in " + file.string());

    std::string line;
    long rows = -1, cols = -1, nnz = -1;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] == '%') continue; // comments
        std::istringstream ls(line);
        if (!(ls >> rows >> cols >> nnz))
            fail(ErrorCode::Parse, "read_matrix_market: bad size line in " + file.string());
        break;
    }
    if (rows < 0 || cols < 0 || nnz < 0)
        fail(ErrorCode::Parse, "read_matrix_market: missing size line in " + file.string());
    if (symmetric && rows != cols)
        fail(ErrorCode::Parse, "read_matrix_market: symmetric matrix not square in " + file.string());

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    for (long e = 0; e < nnz; ++e) {
        long i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v))
            fail(ErrorCode::Parse, "read_matrix_market: truncated entry list in " + file.string());
        if (i < 1 || i > rows || j < 1 || j > cols)
            fail(ErrorCode::Parse, "read_matrix_market: index out of range in " + file.string());
        trips.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
        if (symmetric && i != j)
            trips.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
    }

    Eigen::SparseMatrix<double> A(static_cast<int>(rows), static_cast<int>(cols));
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

} // namespace sgeig
