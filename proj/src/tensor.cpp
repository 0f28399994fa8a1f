#include "tenet/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tenet/errors.hpp"

namespace tenet {
namespace {

// Upper bound on stored coefficients; large enough for the order-4
// intermediates of the order-3 chain at d = 24.
constexpr std::size_t kMaxCoefficients = std::size_t{1} << 24;

void require_finite(std::span<const double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::domain_error("tensor coefficient is not finite");
    }
  }
}

void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* op) {
  if (a.order() != b.order() || a.dim() != b.dim()) {
    throw std::invalid_argument(std::string(op) + ": tensor shapes differ");
  }
}

}  // namespace

std::size_t max_dim_for_order(std::size_t order) {
  switch (order) {
    case 1: return 128 * 128;
    case 2: return 128;
    case 3: return 24;
    case 4: return 16;
    default: return 0;
  }
}

void check_capacity(std::size_t order, std::size_t dim) {
  if (order == 0 || order > kMaxOrder) {
    throw CapacityError("order " + std::to_string(order) + " is not supported (1..4)");
  }
  if (dim > max_dim_for_order(order)) {
    throw CapacityError("dimension " + std::to_string(dim) + " exceeds the limit of " +
                        std::to_string(max_dim_for_order(order)) + " for order " +
                        std::to_string(order));
  }
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && out > kMaxCoefficients / base) {
      throw CapacityError("tensor too large");
    }
    out *= base;
  }
  return out;
}

DenseTensor::DenseTensor(std::size_t order, std::size_t dim)
    : DenseTensor(order, dim, std::vector<double>(ipow(dim, order), 0.0)) {}

DenseTensor::DenseTensor(std::size_t order, std::size_t dim, std::vector<double> data)
    : order_(order), dim_(dim), data_(std::move(data)) {
  if (order == 0 || order > kMaxOrder) {
    throw std::invalid_argument("tensor order must lie in 1..4");
  }
  if (dim == 0) {
    throw std::invalid_argument("tensor dimension must be positive");
  }
  if (data_.size() != ipow(dim, order)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not equal d^r = " + std::to_string(ipow(dim, order)));
  }
  require_finite(data_);
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != order_) {
    throw std::invalid_argument("index arity does not match tensor order");
  }
  std::size_t flat = 0;
  for (std::size_t i : index) {
    if (i >= dim_) {
      throw std::out_of_range("tensor index out of range");
    }
    flat = flat * dim_ + i;
  }
  return flat;
}

void DenseTensor::multi_index(std::size_t flat, std::span<std::size_t> index) const {
  for (std::size_t j = order_; j-- > 0;) {
    index[j] = flat % dim_;
    flat /= dim_;
  }
}

double DenseTensor::at(std::span<const std::size_t> index) const {
  return data_[flat_index(index)];
}

double DenseTensor::at(std::initializer_list<std::size_t> index) const {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}

Eigen::Map<const RowMatrix> DenseTensor::as_matrix(std::size_t leading) const {
  if (leading > order_) {
    throw std::invalid_argument("leading mode count exceeds tensor order");
  }
  const auto rows = static_cast<Eigen::Index>(ipow(dim_, leading));
  const auto cols = static_cast<Eigen::Index>(ipow(dim_, order_ - leading));
  return {data_.data(), rows, cols};
}

DenseTensor outer_power(std::span<const double> x, std::size_t order) {
  if (order == 0) {
    throw std::invalid_argument("outer_power: order must be at least 1");
  }
  if (x.empty()) {
    throw std::invalid_argument("outer_power: empty vector");
  }
  check_capacity(order, x.size());
  const std::size_t d = x.size();
  // Factors are multiplied in sorted index order so that every permutation
  // of an index tuple yields the bit-identical product.
  std::vector<double> data(ipow(d, order));
  std::vector<std::size_t> idx(order);
  for (std::size_t f = 0; f < data.size(); ++f) {
    std::size_t rest = f;
    for (std::size_t k = order; k-- > 0;) {
      idx[k] = rest % d;
      rest /= d;
    }
    std::sort(idx.begin(), idx.end());
    double v = 1.0;
    for (std::size_t i : idx) v *= x[i];
    data[f] = v;
  }
  return {order, d, std::move(data)};
}

DenseTensor identity_tensor(std::size_t dim, std::size_t order) {
  if (order < 2) {
    throw std::invalid_argument("identity_tensor: order must be at least 2");
  }
  if (dim == 0) {
    throw std::invalid_argument("identity_tensor: dimension must be positive");
  }
  check_capacity(order, dim);
  std::vector<double> data(ipow(dim, order), 0.0);
  // Stride between consecutive super-diagonal entries: 1 + d + ... + d^(r-1).
  std::size_t stride = 0;
  for (std::size_t k = 0; k < order; ++k) stride = stride * dim + 1;
  for (std::size_t i = 0; i < dim; ++i) data[i * stride] = 1.0;
  return {order, dim, std::move(data)};
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::size_t modes) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("contract: dimension mismatch");
  }
  if (modes == 0 || modes > a.order() || modes > b.order()) {
    throw std::invalid_argument("contract: mode count out of range");
  }
  const std::size_t order = a.order() + b.order() - 2 * modes;
  if (order == 0) {
    throw std::invalid_argument("contract: full contraction yields a scalar, use inner()");
  }
  if (order > kMaxOrder) {
    throw CapacityError("contract: result order exceeds 4");
  }
  const auto lhs = a.as_matrix(a.order() - modes);
  const auto rhs = b.as_matrix(modes);
  std::vector<double> data(static_cast<std::size_t>(lhs.rows() * rhs.cols()));
  Eigen::Map<RowMatrix> out(data.data(), lhs.rows(), rhs.cols());
  out.noalias() = lhs * rhs;
  return {order, a.dim(), std::move(data)};
}

SuperDiagonal super_diagonal(const DenseTensor& t) {
  std::size_t stride = 0;
  for (std::size_t k = 0; k < t.order(); ++k) stride = stride * t.dim() + 1;
  SuperDiagonal out;
  out.values.reserve(t.dim());
  for (std::size_t i = 0; i < t.dim(); ++i) out.values.push_back(t[i * stride]);
  return out;
}

Unfolding unfold(const DenseTensor& t, std::size_t leading) {
  if (leading < 1 || leading >= t.order()) {
    throw std::invalid_argument("unfold: leading mode count must lie in [1, r)");
  }
  return {t.order(), t.dim(), leading, t.as_matrix(leading)};
}

DenseTensor refold(const Unfolding& u) {
  if (u.rows() != ipow(u.dim, u.leading) || u.cols() != ipow(u.dim, u.order - u.leading)) {
    throw std::invalid_argument("refold: matrix shape does not match the unfolding");
  }
  std::vector<double> data(u.matrix.data(), u.matrix.data() + u.matrix.size());
  return {u.order, u.dim, std::move(data)};
}

double inner(const DenseTensor& a, const DenseTensor& b) {
  require_same_shape(a, b, "inner");
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

DenseTensor add(const DenseTensor& a, const DenseTensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> data(a.size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), data.begin(),
                 std::plus<>());
  return {a.order(), a.dim(), std::move(data)};
}

DenseTensor subtract(const DenseTensor& a, const DenseTensor& b) {
  require_same_shape(a, b, "subtract");
  std::vector<double> data(a.size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), data.begin(),
                 std::minus<>());
  return {a.order(), a.dim(), std::move(data)};
}

DenseTensor scale(const DenseTensor& t, double factor) {
  std::vector<double> data(t.data().begin(), t.data().end());
  for (double& v : data) v *= factor;
  return {t.order(), t.dim(), std::move(data)};
}

double max_abs(const DenseTensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

// Calls fn(permuted_flat) for each permutation of the modes applied to `flat`.
template <typename Fn>
void for_each_permutation(const DenseTensor& t, std::size_t flat, Fn&& fn) {
  std::array<std::size_t, kMaxOrder> idx{};
  std::array<std::size_t, kMaxOrder> perm{};
  const std::size_t r = t.order();
  t.multi_index(flat, std::span(idx.data(), r));
  std::iota(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(r), std::size_t{0});
  do {
    std::array<std::size_t, kMaxOrder> permuted{};
    for (std::size_t j = 0; j < r; ++j) permuted[j] = idx[perm[j]];
    fn(t.flat_index(std::span<const std::size_t>(permuted.data(), r)));
  } while (std::next_permutation(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(r)));
}

}  // namespace

double max_asymmetry(const DenseTensor& t) {
  if (t.order() == 1) return 0.0;
  if (t.order() == 2) {
    const auto a = t.as_matrix(1);
    return (a - a.transpose()).cwiseAbs().maxCoeff();
  }
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for_each_permutation(t, i, [&](std::size_t j) { m = std::max(m, std::abs(t[i] - t[j])); });
  }
  return m;
}

DenseTensor symmetrize(const DenseTensor& t) {
  std::vector<double> data(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for_each_permutation(t, i, [&](std::size_t j) {
      sum += t[j];
      ++count;
    });
    data[i] = sum / static_cast<double>(count);
  }
  return {t.order(), t.dim(), std::move(data)};
}

}  // namespace tenet
