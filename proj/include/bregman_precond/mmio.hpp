#pragma once

// Matrix Market I/O for real matrices (coordinate and array layouts, 1-based).

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "linop.hpp"
#include "types.hpp"

namespace bprec {

enum class MmLayout { coordinate, array };

namespace detail {

inline std::string lower_case(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

/// Reads a real matrix, expanding `symmetric` storage. General storage is
/// returned as stored.
inline Matrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("Matrix Market: empty input");
  std::istringstream header(line);
  std::string banner, object, layout, field, symmetry;
  header >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%MatrixMarket" || detail::lower_case(object) != "matrix")
    throw InvalidArgument("Matrix Market: missing '%%MatrixMarket matrix' header");
  layout = detail::lower_case(layout);
  field = detail::lower_case(field);
  symmetry = detail::lower_case(symmetry);
  if (field != "real" && field != "double" && field != "integer")
    throw InvalidArgument("Matrix Market: unsupported field '" + field + "'");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw InvalidArgument("Matrix Market: unsupported symmetry '" + symmetry + "'");

  if (!detail::next_data_line(in, line)) throw InvalidArgument("Matrix Market: missing size line");
  std::istringstream sizes(line);
  Index rows = 0, cols = 0, entries = 0;
  sizes >> rows >> cols;
  if (rows < 0 || cols < 0 || !sizes) throw InvalidArgument("Matrix Market: bad size line");
  if (symmetric && rows != cols) throw DimensionMismatch(rows, cols, "Matrix Market symmetric");

  Matrix out = Matrix::Zero(rows, cols);
  if (layout == "coordinate") {
    if (!(sizes >> entries)) throw InvalidArgument("Matrix Market: coordinate size line needs nnz");
    for (Index k = 0; k < entries; ++k) {
      if (!detail::next_data_line(in, line)) throw InvalidArgument("Matrix Market: truncated entries");
      std::istringstream ls(line);
      Index i = 0, j = 0;
      double v = 0.0;
      ls >> i >> j >> v;
      if (!ls || i < 1 || j < 1 || i > rows || j > cols)
        throw InvalidArgument("Matrix Market: bad entry '" + line + "'");
      out(i - 1, j - 1) = v;
      if (symmetric) out(j - 1, i - 1) = v;
    }
  } else if (layout == "array") {
    for (Index j = 0; j < cols; ++j)
      for (Index i = symmetric ? j : 0; i < rows; ++i) {
        if (!detail::next_data_line(in, line)) throw InvalidArgument("Matrix Market: truncated array");
        std::istringstream ls(line);
        double v = 0.0;
        if (!(ls >> v)) throw InvalidArgument("Matrix Market: bad value '" + line + "'");
        out(i, j) = v;
        if (symmetric) out(j, i) = v;
      }
  } else {
    throw InvalidArgument("Matrix Market: unsupported layout '" + layout + "'");
  }
  return out;
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_matrix_market(in);
}

inline DenseSym read_matrix_market_sym(const std::string& path) {
  const Matrix m = read_matrix_market(path);
  if (m.rows() != m.cols()) throw DimensionMismatch(m.rows(), m.cols(), "read_matrix_market_sym");
  return DenseSym(m);
}

/// Writes the lower triangle with `symmetric` storage. Coordinate layout skips
/// exact zeros.
inline void write_matrix_market(std::ostream& out, const DenseSym& a,
                                MmLayout layout = MmLayout::coordinate) {
  const Index n = a.dim();
  if (layout == MmLayout::coordinate) {
    Index nnz = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = j; i < n; ++i) nnz += a(i, j) != 0.0;
    out << "%%MatrixMarket matrix coordinate real symmetric\n" << n << ' ' << n << ' ' << nnz << '\n';
    for (Index j = 0; j < n; ++j)
      for (Index i = j; i < n; ++i)
        if (a(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << detail::format_double(a(i, j)) << '\n';
  } else {
    out << "%%MatrixMarket matrix array real symmetric\n" << n << ' ' << n << '\n';
    for (Index j = 0; j < n; ++j)
      for (Index i = j; i < n; ++i) out << detail::format_double(a(i, j)) << '\n';
  }
}

/// General (possibly rectangular) matrix in coordinate layout.
inline void write_matrix_market(std::ostream& out, const Matrix& a) {
  Index nnz = 0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) nnz += a(i, j) != 0.0;
  out << "%%MatrixMarket matrix coordinate real general\n"
      << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << detail::format_double(a(i, j)) << '\n';
}

template <typename M>
void write_matrix_market(const std::string& path, const M& a) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  write_matrix_market(out, a);
}

}  // namespace bprec
