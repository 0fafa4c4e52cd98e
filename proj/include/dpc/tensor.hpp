#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dpc {

// Dense 2-D array of 64-bit floats, row-major. The batched convention across
// the library is column-batched: a batch of n vectors of dimension d is a
// (d x n) tensor, and (d x 1) biases broadcast across the n columns.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  long long size() const { return static_cast<long long>(rows_) * cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const double& operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  // bounds-checked access
  double& at(int r, int c);
  double at(int r, int c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  double item() const;  // value of a 1x1 tensor

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Value-level arithmetic (no gradient recording). Shapes are validated and a
// DimensionError naming both shapes is thrown on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T and a^T * b, used by matmul adjoints
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Elementwise; `b` may be a (rows x 1) column broadcast across a's columns.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& t, int start, int len);
Tensor transpose(const Tensor& t);

double sum(const Tensor& t);
double sum_squares(const Tensor& t);
double mean(const Tensor& t);
double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dpc
