#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wgad/error.hpp"

namespace wgad {

// Shape-tagged dense array of real values, row-major. This is the value
// currency of the whole library: minibatches are rank-2 (rows = samples),
// recurrence stacks are rank-3, everything else stays rank-1/2.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    for (int64_t d : shape_) {
      if (d <= 0) throw AutodiffError("tensor dimensions must be positive");
    }
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }

  Tensor(int64_t rows, int64_t cols) : Tensor(std::vector<int64_t>{rows, cols}) {}

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    int64_t r = static_cast<int64_t>(rows.size());
    int64_t c = r > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int64_t i = 0;
    for (const auto& row : rows) {
      if (static_cast<int64_t>(row.size()) != c) {
        throw AutodiffError("ragged initializer for tensor");
      }
      int64_t j = 0;
      for (double v : row) t(i, j++) = static_cast<T>(v);
      ++i;
    }
    return t;
  }

  static Tensor row(std::initializer_list<double> vals) {
    Tensor t(1, static_cast<int64_t>(vals.size()));
    int64_t j = 0;
    for (double v : vals) t(0, j++) = static_cast<T>(v);
    return t;
  }

  static Tensor full(int64_t rows, int64_t cols, T value) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  int64_t rows() const {
    require_rank2("rows()");
    return shape_[0];
  }
  int64_t cols() const {
    require_rank2("cols()");
    return shape_[1];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int64_t i, int64_t j) {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  const T& operator()(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  // Eigen views over the rank-2 layout (also usable for rank-1 as 1×n).
  using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<EigenMat> mat() {
    return Eigen::Map<EigenMat>(data_.data(), view_rows(), view_cols());
  }
  Eigen::Map<const EigenMat> mat() const {
    return Eigen::Map<const EigenMat>(data_.data(), view_rows(), view_cols());
  }
  using EigenArr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<EigenArr> arr() {
    return Eigen::Map<EigenArr>(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }
  Eigen::Map<const EigenArr> arr() const {
    return Eigen::Map<const EigenArr>(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }

 private:
  template <class U>
  friend class Tensor;

  explicit Tensor(const std::vector<int64_t>& shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {}

  void require_rank2(const char* what) const {
    if (shape_.size() != 2) {
      throw AutodiffError(std::string(what) + " requires a rank-2 tensor, got shape " + shape_str());
    }
  }
  Eigen::Index view_rows() const {
    if (shape_.size() == 2) return static_cast<Eigen::Index>(shape_[0]);
    if (shape_.size() == 1) return 1;
    throw AutodiffError("matrix view requires rank 1 or 2, got shape " + shape_str());
  }
  Eigen::Index view_cols() const {
    if (shape_.size() == 2) return static_cast<Eigen::Index>(shape_[1]);
    return static_cast<Eigen::Index>(shape_.empty() ? 0 : shape_[0]);
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace wgad
