#pragma once

#include <Eigen/SparseCore>
#include <filesystem>

namespace sgeig {

// Matrix Market coordinate format, real entries, "general" or "symmetric"
// storage.  Values are written with 17 significant digits so a write/read
// round trip is bit-exact.

void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::filesystem::path& file,
                         bool symmetric = false);

Eigen::SparseMatrix<double> read_matrix_market(const std::filesystem::path& file);

} // namespace sgeig
