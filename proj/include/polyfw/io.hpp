#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include "polyfw/core.hpp"

namespace polyfw {

// CSV: one row per matrix row, ',' separated, '.' decimal separator, values
// written with 17 significant digits so doubles round-trip exactly.
// A vector is stored as one value per line.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::VectorXd read_vector_csv(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v);

// Binary format: magic "PFW1", u64 rows, u64 cols, then row-major IEEE-754
// 64-bit floats, everything little-endian.
Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path);
void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);

// Dispatch on extension: ".bin" -> binary, anything else -> CSV.
Eigen::MatrixXd read_matrix_auto(const std::filesystem::path& path);
Eigen::VectorXd read_vector_auto(const std::filesystem::path& path);

// Sparse solution files: `index,weight` rows, no header.
void write_sparse_csv(const std::filesystem::path& path, const SparseIterate& x);
SparseIterate read_sparse_csv(const std::filesystem::path& path, Eigen::Index dimension);

// Shortest decimal representation that still round-trips, always containing
// a '.' or exponent so the value reads back as floating point.
std::string format_double(double v);
// Fixed 17-significant-digit form used by the experiment CSV files.
std::string format_double_exact(double v);

}  // namespace polyfw
