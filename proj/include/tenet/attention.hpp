#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tenet {

enum class AttentionKind { softmax, rbf };

/// Queries, keys and values as column matrices: Q is d x N_q, K and V are
/// d x N_k. `sigma` is the RBF bandwidth and `heads` the number of channel
/// groups for multi-head attention.
struct AttentionBundle {
  Eigen::MatrixXd q;
  Eigen::MatrixXd k;
  Eigen::MatrixXd v;
  double sigma = 0.5;
  int heads = 1;

  void validate() const;
};

/// exp(-||q/|q| - k/|k|||^2 / (2 sigma^2)). Throws std::domain_error for a zero vector.
double rbf_similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& k, double sigma);

/// N_q x N_k attention weights alpha(gamma(Q, K)): row SoftMax of Q^T K / sqrt(d)
/// for softmax, element-wise RBF similarity for rbf.
Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                  AttentionKind kind, double sigma);

/// alpha(gamma(Q, K)) V^T, an N_q x d matrix. Ignores `heads`.
Eigen::MatrixXd attention(const AttentionBundle& b, AttentionKind kind);

/// Splits channels into `heads` groups of d / heads rows each.
std::vector<Eigen::MatrixXd> split_heads(const Eigen::MatrixXd& m, int heads);
/// Inverse of split_heads (stacks the groups back along channels).
Eigen::MatrixXd concat_heads(const std::vector<Eigen::MatrixXd>& groups);

/// Attention per channel group, outputs concatenated along channels (N_q x d).
Eigen::MatrixXd multi_head(const AttentionBundle& b, AttentionKind kind);

/// Row-wise LayerNorm of x + sub_output with unit gain and zero bias.
Eigen::MatrixXd layer_norm_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sub_output,
                                    double epsilon = 1e-5);

}  // namespace tenet
