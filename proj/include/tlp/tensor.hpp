#pragma once

#include <Eigen/Dense>

#include <array>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "tlp/errors.hpp"

namespace tlp {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Dense rank-1..3 tensor with row-major storage and an explicit shape record.
// Values are held in a flat buffer; Eigen maps expose matrix/vector views
// without copying. Instances are value types; once built they are only read
// through const access, so sharing across threads is safe.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), Scalar(0)) {}

  Tensor(std::vector<Index> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != checked_size(shape_))
      throw ShapeError("tensor data length does not match shape product");
  }

  static Tensor zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

  static Tensor scalar(Scalar v) { return Tensor({1}, {v}); }

  // Row-major rank-2 construction from nested lists, for tests and fixtures.
  static Tensor from_rows(std::initializer_list<std::initializer_list<Scalar>> rows) {
    std::vector<Scalar> flat;
    Index r = 0, c = -1;
    for (const auto& row : rows) {
      if (c < 0) c = static_cast<Index>(row.size());
      if (static_cast<Index>(row.size()) != c)
        throw ShapeError("ragged rows in tensor literal");
      flat.insert(flat.end(), row.begin(), row.end());
      ++r;
    }
    return Tensor({r, c}, std::move(flat));
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  Index dim(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return shape_.empty(); }

  const std::vector<Scalar>& data() const { return data_; }
  std::vector<Scalar>& data() { return data_; }

  Scalar& operator()(Index i) { return data_[static_cast<size_t>(i)]; }
  Scalar operator()(Index i) const { return data_[static_cast<size_t>(i)]; }
  Scalar& operator()(Index i, Index j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  Scalar operator()(Index i, Index j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  Scalar& operator()(Index i, Index j, Index k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  // Eigen views. vec() maps any tensor as a flat vector; mat() requires rank 2;
  // slice(i) maps the i-th contiguous rank-2 slice of a rank-3 tensor.
  Eigen::Map<const Vector<Scalar>> vec() const {
    return {data_.data(), static_cast<Index>(data_.size())};
  }
  Eigen::Map<Vector<Scalar>> vec() {
    return {data_.data(), static_cast<Index>(data_.size())};
  }
  Eigen::Map<const RowMatrix<Scalar>> mat() const {
    require_rank(2, "mat view");
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<RowMatrix<Scalar>> mat() {
    require_rank(2, "mat view");
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const RowMatrix<Scalar>> slice(Index i) const {
    require_rank(3, "slice view");
    return {data_.data() + i * shape_[1] * shape_[2], shape_[1], shape_[2]};
  }
  Eigen::Map<RowMatrix<Scalar>> slice(Index i) {
    require_rank(3, "slice view");
    return {data_.data() + i * shape_[1] * shape_[2], shape_[1], shape_[2]};
  }

  bool all_finite() const { return vec().allFinite(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) +
                       ", got rank " + std::to_string(rank()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    if (shape.empty() || shape.size() > 3)
      throw ShapeError("tensor rank must be 1..3");
    Index n = 1;
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  std::vector<Index> shape_;
  std::vector<Scalar> data_;
};

using Tensord = Tensor<double>;

// Reverses the order of the rows of a rank-2 tensor; equivalent to
// left-multiplying with the exchange (anti-diagonal) matrix.
template <typename Scalar>
Tensor<Scalar> row_reverse(const Tensor<Scalar>& m) {
  m.require_rank(2, "row_reverse");
  Tensor<Scalar> out(m.shape());
  out.mat() = m.mat().colwise().reverse();
  return out;
}

// Permutes the axes of a rank-3 tensor. perm is 1-based: element (i,j,k) of
// the input lands at the output position whose axis perm[a]-1 carries index a.
template <typename Scalar>
Tensor<Scalar> tensor_transpose(const Tensor<Scalar>& t, const std::array<int, 3>& perm) {
  t.require_rank(3, "tensor_transpose");
  std::array<bool, 3> seen{false, false, false};
  for (int p : perm) {
    if (p < 1 || p > 3 || seen[static_cast<size_t>(p - 1)])
      throw ArgumentError("tensor_transpose: perm must be a permutation of {1,2,3}");
    seen[static_cast<size_t>(p - 1)] = true;
  }
  std::vector<Index> out_shape(3);
  for (int a = 0; a < 3; ++a) out_shape[static_cast<size_t>(perm[static_cast<size_t>(a)] - 1)] = t.dim(a);
  Tensor<Scalar> out(out_shape);
  std::array<Index, 3> idx{}, out_idx{};
  for (idx[0] = 0; idx[0] < t.dim(0); ++idx[0])
    for (idx[1] = 0; idx[1] < t.dim(1); ++idx[1])
      for (idx[2] = 0; idx[2] < t.dim(2); ++idx[2]) {
        for (int a = 0; a < 3; ++a) out_idx[static_cast<size_t>(perm[static_cast<size_t>(a)] - 1)] = idx[static_cast<size_t>(a)];
        out(out_idx[0], out_idx[1], out_idx[2]) = t(idx[0], idx[1], idx[2]);
      }
  return out;
}

// Concatenates two tensors of equal rank along a 1-based axis. All other axes
// must agree; slices of a come first.
template <typename Scalar>
Tensor<Scalar> concat(const Tensor<Scalar>& a, const Tensor<Scalar>& b, int axis) {
  if (a.rank() != b.rank())
    throw ShapeError("concat: rank mismatch");
  if (axis < 1 || axis > a.rank())
    throw ArgumentError("concat: axis out of range");
  const int ax = axis - 1;
  for (int d = 0; d < a.rank(); ++d)
    if (d != ax && a.dim(d) != b.dim(d))
      throw ShapeError("concat: off-axis dimension mismatch");

  std::vector<Index> out_shape = a.shape();
  out_shape[static_cast<size_t>(ax)] += b.dim(ax);
  Tensor<Scalar> out(out_shape);

  // Row-major layout: treat the tensor as (outer, axis, inner) and copy
  // contiguous inner*axis blocks from each input in turn.
  Index outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= a.dim(d);
  for (int d = ax + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const Index a_block = a.dim(ax) * inner;
  const Index b_block = b.dim(ax) * inner;
  for (Index o = 0; o < outer; ++o) {
    std::copy_n(a.data().data() + o * a_block, a_block,
                out.data().data() + o * (a_block + b_block));
    std::copy_n(b.data().data() + o * b_block, b_block,
                out.data().data() + o * (a_block + b_block) + a_block);
  }
  return out;
}

// Extracts len consecutive hyperplanes starting at `start` along a 1-based axis.
template <typename Scalar>
Tensor<Scalar> slice_axis(const Tensor<Scalar>& t, int axis, Index start, Index len) {
  if (axis < 1 || axis > t.rank())
    throw ArgumentError("slice_axis: axis out of range");
  const int ax = axis - 1;
  if (start < 0 || len <= 0 || start + len > t.dim(ax))
    throw ArgumentError("slice_axis: range out of bounds");
  std::vector<Index> out_shape = t.shape();
  out_shape[static_cast<size_t>(ax)] = len;
  Tensor<Scalar> out(out_shape);
  Index outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= t.dim(d);
  for (int d = ax + 1; d < t.rank(); ++d) inner *= t.dim(d);
  const Index in_block = t.dim(ax) * inner;
  const Index out_block = len * inner;
  for (Index o = 0; o < outer; ++o)
    std::copy_n(t.data().data() + o * in_block + start * inner, out_block,
                out.data().data() + o * out_block);
  return out;
}

}  // namespace tlp
