#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tenet {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Largest order handled by the library.
inline constexpr std::size_t kMaxOrder = 4;

/// Largest dimension accepted by the public operations for a given order
/// (128 for r = 2, 24 for r = 3, 16 for r = 4). Order 1 tensors are plain
/// vectors and are bounded by the order-2 limit squared.
std::size_t max_dim_for_order(std::size_t order);

/// Throws CapacityError if (order, dim) lies outside the desk-scale bounds.
void check_capacity(std::size_t order, std::size_t dim);

/// Dense cubic tensor of order r over dimension d.
///
/// Coefficients are stored row-major: index (i1, ..., ir) maps to
/// sum_j i_j * d^(r - j), so the last index varies fastest. Values are
/// immutable once constructed; every constructor rejects non-finite data.
class DenseTensor {
 public:
  /// Zero tensor.
  DenseTensor(std::size_t order, std::size_t dim);
  DenseTensor(std::size_t order, std::size_t dim, std::vector<double> data);

  std::size_t order() const noexcept { return order_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double at(std::span<const std::size_t> index) const;
  double at(std::initializer_list<std::size_t> index) const;

  std::size_t flat_index(std::span<const std::size_t> index) const;
  /// Inverse of flat_index; writes `order()` coordinates into `index`.
  void multi_index(std::size_t flat, std::span<std::size_t> index) const;

  /// Zero-copy matrix view grouping the first `leading` modes as rows.
  Eigen::Map<const RowMatrix> as_matrix(std::size_t leading) const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::size_t order_;
  std::size_t dim_;
  std::vector<double> data_;
};

/// Entries T[i, ..., i] of a cubic tensor.
struct SuperDiagonal {
  std::vector<double> values;
};

/// Matricization of an order-r tensor: the first `leading` modes index rows
/// (d^leading of them) and the remaining modes index columns.
struct Unfolding {
  std::size_t order = 0;
  std::size_t dim = 0;
  std::size_t leading = 0;
  RowMatrix matrix;

  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(matrix.cols()); }
};

/// d^r, throwing CapacityError on overflow of the supported range.
std::size_t ipow(std::size_t base, std::size_t exp);

DenseTensor outer_power(std::span<const double> x, std::size_t order);
DenseTensor identity_tensor(std::size_t dim, std::size_t order);

/// Contracts the trailing `modes` modes of `a` with the leading `modes`
/// modes of `b`. For matrices with modes = 1 this is the matrix product.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::size_t modes);

SuperDiagonal super_diagonal(const DenseTensor& t);

Unfolding unfold(const DenseTensor& t, std::size_t leading);
DenseTensor refold(const Unfolding& u);

/// Full inner product sum_i a_i b_i over all coefficients.
double inner(const DenseTensor& a, const DenseTensor& b);

DenseTensor add(const DenseTensor& a, const DenseTensor& b);
DenseTensor subtract(const DenseTensor& a, const DenseTensor& b);
DenseTensor scale(const DenseTensor& t, double factor);

double max_abs(const DenseTensor& t);
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

/// Largest |T[idx] - T[perm(idx)]| over all index permutations.
double max_asymmetry(const DenseTensor& t);

/// Average of T over all r! index permutations.
DenseTensor symmetrize(const DenseTensor& t);

}  // namespace tenet
