#include "polyfw/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace polyfw {

static_assert(std::endian::native == std::endian::little,
              "binary matrix I/O assumes a little-endian host");

namespace {

[[noreturn]] void io_error(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

double parse_double(const std::filesystem::path& path, std::string_view token,
                    std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    io_error(path, "malformed number '" + std::string(token) + "' on line " +
                       std::to_string(line_no));
  return value;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) io_error(path, "cannot open for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      row.push_back(parse_double(path, token, line_no));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_of("0123456789") != std::string::npos)
    s += ".0";
  return s;
}

std::string format_double_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) io_error(path, "empty CSV matrix");
  const std::size_t cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      io_error(path, "ragged CSV: row " + std::to_string(i + 1) + " has " +
                         std::to_string(rows[i].size()) + " values, expected " +
                         std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) io_error(path, "cannot open for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double_exact(m(i, j));
    }
    out << '\n';
  }
  if (!out) io_error(path, "write failed");
}

Eigen::VectorXd read_vector_csv(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 1)
    io_error(path, "expected a single-column vector, got " +
                       std::to_string(m.cols()) + " columns");
  return m.col(0);
}

void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  write_matrix_csv(path, v);
}

Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error(path, "cannot open for reading");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PFW1", 4) != 0)
    io_error(path, "bad magic, expected PFW1");
  std::uint64_t rows = 0, cols = 0;
  if (!in.read(reinterpret_cast<char*>(&rows), 8) ||
      !in.read(reinterpret_cast<char*>(&cols), 8))
    io_error(path, "truncated header");
  if (rows == 0 || cols == 0 || rows * cols > (1ull << 34))
    io_error(path, "implausible dimensions " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<double> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(cols * sizeof(double))))
      io_error(path, "truncated payload at row " + std::to_string(i));
    for (std::uint64_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return m;
}

void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error(path, "cannot open for writing");
  out.write("PFW1", 4);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  std::vector<double> row(cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(cols * sizeof(double)));
  }
  if (!out) io_error(path, "write failed");
}

Eigen::MatrixXd read_matrix_auto(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return read_matrix_binary(path);
  return read_matrix_csv(path);
}

Eigen::VectorXd read_vector_auto(const std::filesystem::path& path) {
  if (path.extension() == ".bin") {
    const Eigen::MatrixXd m = read_matrix_binary(path);
    if (m.cols() != 1)
      io_error(path, "expected a single-column vector, got " +
                         std::to_string(m.cols()) + " columns");
    return m.col(0);
  }
  return read_vector_csv(path);
}

void write_sparse_csv(const std::filesystem::path& path, const SparseIterate& x) {
  std::ofstream out(path);
  if (!out) io_error(path, "cannot open for writing");
  const auto& support = x.support();
  const auto& weights = x.weights();
  for (std::size_t i = 0; i < support.size(); ++i)
    out << support[i] << ',' << format_double(weights[i]) << '\n';
  if (!out) io_error(path, "write failed");
}

SparseIterate read_sparse_csv(const std::filesystem::path& path, Eigen::Index dimension) {
  const auto rows = read_csv_rows(path);
  std::vector<int> support;
  std::vector<double> weights;
  for (const auto& row : rows) {
    if (row.size() != 2) io_error(path, "expected `index,weight` rows");
    support.push_back(static_cast<int>(row[0]));
    weights.push_back(row[1]);
  }
  return SparseIterate(dimension, std::move(support), std::move(weights));
}

}  // namespace polyfw
