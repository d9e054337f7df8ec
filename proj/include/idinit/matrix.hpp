#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "idinit/rng.hpp"

namespace idinit {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. All library operations are pure; a
// Matrix never aliases another.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeError("matrix data length does not match rows*cols");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : init) {
      if (r.size() != cols_) throw ShapeError("ragged initializer list");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// C = A * B. The k-outer/j-inner (axpy) order keeps every inner loop on
// contiguous memory and fixes the summation order, so results are
// reproducible run to run.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// C = A * B^T. Row-by-row dot products; four independent accumulators keep
// the order fixed while letting the compiler vectorize.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_bt: inner dimensions differ");
  Matrix c(a.rows(), b.rows());
  const std::size_t k = a.cols();
  const std::size_t k4 = k - k % 4;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t t = 0; t < k4; t += 4) {
        s0 += ai[t] * bj[t];
        s1 += ai[t + 1] * bj[t + 1];
        s2 += ai[t + 2] * bj[t + 2];
        s3 += ai[t + 3] * bj[t + 3];
      }
      for (std::size_t t = k4; t < k; ++t) s0 += ai[t] * bj[t];
      ci[j] = ((s0 + s1) + (s2 + s3));
    }
  }
  return c;
}

// C = A^T * B, accumulated row-wise over A's rows.
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_at: inner dimensions differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    const double* bi = b.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      double* ck = c.row(k);
      for (std::size_t j = 0; j < n; ++j) ck[j] += aik * bi[j];
    }
  }
  return c;
}

inline Matrix matvec_as_column(const Matrix& a, const std::vector<double>& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  Matrix y(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y(i, 0) = s;
  }
  return y;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("sub: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

inline double frobenius_norm_sq(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

inline double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const Matrix& a) {
  for (double v : a.data())
    if (!std::isfinite(v)) return false;
  return true;
}

inline double mean_of(const Matrix& a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s / static_cast<double>(a.size());
}

inline double std_of(const Matrix& a) {
  if (a.size() < 2) return 0.0;
  const double mu = mean_of(a);
  double s = 0.0;
  for (double v : a.data()) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(a.size() - 1));
}

// Sylvester Hadamard matrix; entries are +-1 and H*H^T = n*I exactly.
inline Matrix hadamard(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw UnsupportedError("hadamard: size must be a power of two");
  Matrix h(n, n);
  h(0, 0) = 1.0;
  for (std::size_t m = 1; m < n; m <<= 1) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double v = h(i, j);
        h(i, j + m) = v;
        h(i + m, j) = v;
        h(i + m, j + m) = -v;
      }
    }
  }
  return h;
}

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double mean,
                              double std) {
  if (std < 0.0) throw ShapeError("gaussian_matrix: std must be >= 0");
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(mean, std);
  return m;
}

// ---- Serialization ----
// CSV: one row per line, 17 significant digits.
// Binary: little-endian u64 rows, u64 cols, then row-major f64 payload.

inline void write_csv(const Matrix& a, std::ostream& os) {
  char buf[64];
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

inline void write_csv(const Matrix& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for write: " + path);
  write_csv(a, os);
}

inline Matrix read_csv(std::istream& is) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t n = 0, pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      data.push_back(std::stod(line.substr(pos, comma - pos)));
      ++n;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (rows == 0)
      cols = n;
    else if (n != cols)
      throw FormatError("csv: ragged row " + std::to_string(rows));
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

inline Matrix read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open for read: " + path);
  return read_csv(is);
}

namespace detail {
static_assert(sizeof(double) == 8, "64-bit IEEE doubles required");

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("binary matrix: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64_le(os, v);
}

inline double get_f64_le(std::istream& is) {
  const std::uint64_t v = get_u64_le(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace detail

inline void write_binary(const Matrix& a, std::ostream& os) {
  detail::put_u64_le(os, a.rows());
  detail::put_u64_le(os, a.cols());
  for (double v : a.data()) detail::put_f64_le(os, v);
}

inline void write_binary(const Matrix& a, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for write: " + path);
  write_binary(a, os);
}

inline Matrix read_binary(std::istream& is) {
  const std::uint64_t rows = detail::get_u64_le(is);
  const std::uint64_t cols = detail::get_u64_le(is);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = detail::get_f64_le(is);
  if (!is) throw FormatError("binary matrix: truncated payload");
  return m;
}

inline Matrix read_binary_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for read: " + path);
  return read_binary(is);
}

}  // namespace idinit
