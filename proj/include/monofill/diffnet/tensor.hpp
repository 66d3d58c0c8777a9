#pragma once

#include <Eigen/Core>

#include <string>

namespace monofill::diffnet {

using Eigen::Index;

/// NCHW shape.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index size() const { return n * c * h * w; }
  Index pixels() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

/// Dense NCHW tensor backed by an Eigen vector. Each sample is viewable as a
/// row-major (channels x pixels) matrix, which is what the layers compute on.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Vector::Zero(shape.size())) {}
  Tensor(const Shape& shape, Vector data) : shape_(shape), data_(std::move(data)) {
    eigen_assert(data_.size() == shape_.size());
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  /// Sample n as (channels x h*w).
  MatrixMap sample(Index n) { return MatrixMap(data_.data() + n * sample_size(), shape_.c, shape_.pixels()); }
  ConstMatrixMap sample(Index n) const {
    return ConstMatrixMap(data_.data() + n * sample_size(), shape_.c, shape_.pixels());
  }

  /// Channel plane (h x w) of sample n.
  MatrixMap plane(Index n, Index c) { return MatrixMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w); }
  ConstMatrixMap plane(Index n, Index c) const {
    return ConstMatrixMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Index sample_size() const { return shape_.c * shape_.pixels(); }
  Index offset(Index n, Index c, Index y, Index x) const { return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x; }

  Shape shape_;
  Vector data_;
};

}  // namespace monofill::diffnet
