#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "tenet/tensor.hpp"

namespace tenet {

/// Regularizer added to every trace-style normalization.
inline constexpr double kNormEpsilon = 1e-6;

/// d x N matrix of local features (one feature vector per column) with
/// per-column non-negative weights and a mean subtracted before pooling.
class FeatureMatrix {
 public:
  /// Unit weights and zero mean.
  explicit FeatureMatrix(Eigen::MatrixXd features);
  FeatureMatrix(Eigen::MatrixXd features, std::vector<double> weights, Eigen::VectorXd mean);

  std::size_t dim() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t count() const { return static_cast<std::size_t>(features_.cols()); }

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  /// phi_n - mu.
  Eigen::VectorXd centered(std::size_t n) const;

 private:
  Eigen::MatrixXd features_;
  std::vector<double> weights_;
  Eigen::VectorXd mean_;
};

/// Reads one feature vector per line, comma separated.
FeatureMatrix load_feature_csv(const std::filesystem::path& path);

/// Interprets an order-2 tensor as a feature matrix whose columns are T[:, n].
FeatureMatrix feature_matrix_from_tensor(const DenseTensor& t);

/// Order-r tensor descriptor (1/N) sum_n w_n^r (phi_n - mu)^{(x) r}.
DenseTensor hotd(const FeatureMatrix& f, std::size_t order);

/// (1/(N M)) sum_n sum_m w_n^r w'_m^r <phi_n - mu, phi'_m - mu'>^r.
/// Equals inner(hotd(f, r), hotd(g, r)).
double poly_kernel_sum(const FeatureMatrix& f, const FeatureMatrix& g, std::size_t order);

/// eps + (1/N) sum_n w_n^r ||phi_n - mu||^r; for even r this is the trace of
/// the r/2 unfolding of hotd(f, r) plus eps.
double descriptor_norm(const FeatureMatrix& f, std::size_t order);

/// t / descriptor_norm(f, r).
DenseTensor normalize_descriptor(const DenseTensor& t, const FeatureMatrix& f, std::size_t order);

}  // namespace tenet
