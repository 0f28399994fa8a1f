#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "tenet/tensor.hpp"

namespace testing {

inline oracle::Tensor to_oracle(const tenet::DenseTensor& t) {
  return {t.order(), t.dim(), oracle::Vec(t.data().begin(), t.data().end())};
}

inline tenet::DenseTensor from_oracle(const oracle::Tensor& t) { return {t.order, t.dim, t.a}; }

inline Eigen::MatrixXd to_eigen(const std::vector<oracle::Vec>& cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(cols.front().size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < cols[j].size(); ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    }
  }
  return m;
}

inline Eigen::MatrixXd to_eigen(const oracle::Mat& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  }
  return out;
}

inline std::vector<oracle::Vec> columns(const Eigen::MatrixXd& m) {
  std::vector<oracle::Vec> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)].assign(m.col(j).data(), m.col(j).data() + m.rows());
  return out;
}

inline tenet::DenseTensor matrix_tensor(const Eigen::MatrixXd& m) {
  const tenet::RowMatrix row = m;
  return {2, static_cast<std::size_t>(m.rows()), std::vector<double>(row.data(), row.data() + row.size())};
}

inline Eigen::MatrixXd tensor_matrix(const tenet::DenseTensor& t) { return t.as_matrix(1); }

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline double rel_diff(const tenet::DenseTensor& a, const tenet::DenseTensor& b) {
  return tenet::max_abs_diff(a, b) / std::max(1.0, tenet::max_abs(b));
}

}  // namespace testing
