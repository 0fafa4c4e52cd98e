#include "dpc/tensor.hpp"

#include <cmath>
#include <cstdlib>

#include "dpc/errors.hpp"

namespace dpc {

Tensor::Tensor(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) {
    throw DimensionError("tensor shape must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  data_.assign(static_cast<size_t>(rows) * cols, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  if (r == 0) throw DimensionError("from_rows: no rows given");
  const int c = static_cast<int>(rows.begin()->size());
  Tensor out(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw DimensionError("from_rows: ragged rows");
    int j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

Tensor Tensor::identity(int n) {
  Tensor out(n, n);
  for (int i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

double& Tensor::at(int r, int c) {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
    throw IndexError("index (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + shape_str());
  }
  return (*this)(r, c);
}

double Tensor::at(int r, int c) const { return const_cast<Tensor*>(this)->at(r, c); }

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) throw ContractError("item() requires a 1x1 tensor, got " + shape_str());
  return data_[0];
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                       b.shape_str());
}

// broadcast rule shared by add/sub/hadamard: equal shapes, or b is (rows x 1)
bool col_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return false;
  if (b.rows() == a.rows() && b.cols() == 1) return true;
  shape_fail(op, a, b);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  Tensor out(a.rows(), b.cols(), 0.0);
  const int k = a.cols(), n = b.cols();
  for (int i = 0; i < a.rows(); ++i) {
    double* orow = &out(i, 0);
    for (int kk = 0; kk < k; ++kk) {
      const double aik = a(i, kk);
      const double* brow = &b(kk, 0);
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
  Tensor out(a.rows(), b.rows());
  const int k = a.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = &a(i, 0);
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = &b(j, 0);
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_fail("matmul_tn", a, b);
  Tensor out(a.cols(), b.cols(), 0.0);
  const int n = b.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = &a(i, 0);
    const double* brow = &b(i, 0);
    for (int kk = 0; kk < a.cols(); ++kk) {
      double* orow = &out(kk, 0);
      const double av = arow[kk];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bc = col_broadcast(a, b, "add");
  Tensor out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, bc ? 0 : j);
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const bool bc = col_broadcast(a, b, "sub");
  Tensor out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, bc ? 0 : j);
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  const bool bc = col_broadcast(a, b, "hadamard");
  Tensor out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, bc ? 0 : j);
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.flat()) v *= s;
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) shape_fail("concat_rows", parts[0], p);
    rows += p.rows();
  }
  Tensor out(rows, cols);
  int r0 = 0;
  for (const Tensor& p : parts) {
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < cols; ++j) out(r0 + i, j) = p(i, j);
    r0 += p.rows();
  }
  return out;
}

Tensor slice_rows(const Tensor& t, int start, int len) {
  if (start < 0 || len <= 0 || start + len > t.rows()) {
    throw IndexError("slice_rows: rows [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of range for " + t.shape_str());
  }
  Tensor out(len, t.cols());
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < t.cols(); ++j) out(i, j) = t(start + i, j);
  return out;
}

Tensor transpose(const Tensor& t) {
  Tensor out(t.cols(), t.rows());
  for (int i = 0; i < t.rows(); ++i)
    for (int j = 0; j < t.cols(); ++j) out(j, i) = t(i, j);
  return out;
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.flat()) acc += v;
  return acc;
}

double sum_squares(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.flat()) acc += v * v;
  return acc;
}

double mean(const Tensor& t) {
  if (t.empty()) throw DimensionError("mean: empty tensor");
  return sum(t) / static_cast<double>(t.size());
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.flat()) m = std::max(m, std::fabs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (long long i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace dpc
