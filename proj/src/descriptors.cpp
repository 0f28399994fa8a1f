#include "tenet/descriptors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tenet/errors.hpp"

namespace tenet {
namespace {

// Column n of the Khatri-Rao power: v^{(x) k} flattened row-major.
void kron_power(const Eigen::VectorXd& v, std::size_t k, double* out) {
  const auto d = static_cast<std::size_t>(v.size());
  std::size_t len = 1;
  out[0] = 1.0;
  for (std::size_t step = 0; step < k; ++step) {
    // Expand in place from the back so earlier entries are not overwritten.
    for (std::size_t i = len; i-- > 0;) {
      const double base = out[i];
      for (std::size_t j = d; j-- > 0;) out[i * d + j] = base * v[static_cast<Eigen::Index>(j)];
    }
    len *= d;
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd features)
    : FeatureMatrix(features, std::vector<double>(static_cast<std::size_t>(features.cols()), 1.0),
                    Eigen::VectorXd::Zero(features.rows())) {}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd features, std::vector<double> weights,
                             Eigen::VectorXd mean)
    : features_(std::move(features)), weights_(std::move(weights)), mean_(std::move(mean)) {
  if (features_.rows() == 0 || features_.cols() == 0) {
    throw std::invalid_argument("feature matrix needs d >= 1 and N >= 1");
  }
  if (weights_.size() != count()) {
    throw std::invalid_argument("feature weights must have one entry per column");
  }
  if (static_cast<std::size_t>(mean_.size()) != dim()) {
    throw std::invalid_argument("feature mean must have length d");
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("feature weights must be finite and non-negative");
    }
  }
  if (!mean_.allFinite() || !features_.allFinite()) {
    throw std::invalid_argument("feature matrix contains non-finite values");
  }
}

Eigen::VectorXd FeatureMatrix::centered(std::size_t n) const {
  return features_.col(static_cast<Eigen::Index>(n)) - mean_;
}

FeatureMatrix load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> columns;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> col;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        col.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (!columns.empty() && col.size() != columns.front().size()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": inconsistent length");
    }
    columns.push_back(std::move(col));
  }
  if (columns.empty()) throw std::invalid_argument(path.string() + ": no feature vectors");
  Eigen::MatrixXd m(columns.front().size(), columns.size());
  for (std::size_t n = 0; n < columns.size(); ++n) {
    for (std::size_t i = 0; i < columns[n].size(); ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = columns[n][i];
    }
  }
  return FeatureMatrix(std::move(m));
}

FeatureMatrix feature_matrix_from_tensor(const DenseTensor& t) {
  if (t.order() != 2) throw std::invalid_argument("feature tensor must have order 2");
  return FeatureMatrix(Eigen::MatrixXd(t.as_matrix(1)));
}

DenseTensor hotd(const FeatureMatrix& f, std::size_t order) {
  if (order < 2) throw std::invalid_argument("hotd: order must be at least 2");
  check_capacity(order, f.dim());
  // Unfolding (floor(r/2) rows modes) = L R^T / N, where column n of L is
  // w_n^{r/2} v^{(x) a} and column n of R is w_n^{r/2} v^{(x) b}.
  const std::size_t a = order / 2;
  const std::size_t b = order - a;
  const std::size_t d = f.dim();
  const std::size_t n_cols = f.count();
  RowMatrix left(n_cols, ipow(d, a));
  RowMatrix right(n_cols, ipow(d, b));
  for (std::size_t n = 0; n < n_cols; ++n) {
    const Eigen::VectorXd v = f.centered(n);
    const double s = std::pow(f.weights()[n], 0.5 * static_cast<double>(order));
    kron_power(v, a, left.row(static_cast<Eigen::Index>(n)).data());
    kron_power(v, b, right.row(static_cast<Eigen::Index>(n)).data());
    left.row(static_cast<Eigen::Index>(n)) *= s;
    right.row(static_cast<Eigen::Index>(n)) *= s;
  }
  std::vector<double> data(ipow(d, order));
  Eigen::Map<RowMatrix> out(data.data(), left.cols(), right.cols());
  out.noalias() = left.transpose() * right;
  out /= static_cast<double>(n_cols);
  return {order, d, std::move(data)};
}

double poly_kernel_sum(const FeatureMatrix& f, const FeatureMatrix& g, std::size_t order) {
  if (f.dim() != g.dim()) throw std::invalid_argument("poly_kernel_sum: dimension mismatch");
  const auto r = static_cast<int>(order);
  double sum = 0.0;
  for (std::size_t n = 0; n < f.count(); ++n) {
    const Eigen::VectorXd u = f.centered(n);
    const double wu = std::pow(f.weights()[n], r);
    for (std::size_t m = 0; m < g.count(); ++m) {
      const double wv = std::pow(g.weights()[m], r);
      sum += wu * wv * std::pow(u.dot(g.centered(m)), r);
    }
  }
  return sum / (static_cast<double>(f.count()) * static_cast<double>(g.count()));
}

double descriptor_norm(const FeatureMatrix& f, std::size_t order) {
  const auto r = static_cast<int>(order);
  double sum = 0.0;
  for (std::size_t n = 0; n < f.count(); ++n) {
    sum += std::pow(f.weights()[n], r) * std::pow(f.centered(n).norm(), r);
  }
  return kNormEpsilon + sum / static_cast<double>(f.count());
}

DenseTensor normalize_descriptor(const DenseTensor& t, const FeatureMatrix& f, std::size_t order) {
  if (t.order() != order || t.dim() != f.dim()) {
    throw std::invalid_argument("normalize_descriptor: tensor does not match the feature matrix");
  }
  return scale(t, 1.0 / descriptor_norm(f, order));
}

}  // namespace tenet
