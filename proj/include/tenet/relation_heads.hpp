#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tenet/tensor_io.hpp"

namespace tenet {

/// Projections of the relation heads for base channel width d:
/// W_q, W_k, W_v are 2d x 2d, W_p is 2d x d, W_g is d x d, W_u is d x 2d.
struct HeadWeights {
  Eigen::MatrixXd wq;
  Eigen::MatrixXd wk;
  Eigen::MatrixXd wv;
  Eigen::MatrixXd wp;
  Eigen::MatrixXd wg;
  Eigen::MatrixXd wu;

  std::size_t dim() const { return static_cast<std::size_t>(wg.rows()); }
  void validate() const;

  /// Uniform in [-1/sqrt(d), 1/sqrt(d)] from a fixed seed.
  static HeadWeights seeded(std::size_t d, std::uint64_t seed);
  /// W_q = W_k = W_v = I, W_p = 0, W_g = I, W_u = [I I].
  static HeadWeights identity(std::size_t d);

  void store(MatrixBundle& bundle, const std::string& prefix = "") const;
  static HeadWeights load(const MatrixBundle& bundle, const std::string& prefix = "");
};

/// One image region as seen by the Z-shot head: spatially averaged 2d-channel
/// features and the d-dimensional high-order pooled vector.
struct ShotEmbedding {
  Eigen::VectorXd pooled;
  Eigen::VectorXd hop;
};

/// Cross-attention of B query embeddings over Z support embeddings with
/// q_b = W_q (pooled_b + W_p hop_b) and k_z, v_z built the same way from
/// W_k and W_v. Multi-head RBF attention; returns a B x 2d matrix.
Eigen::MatrixXd zshot_head(std::span<const ShotEmbedding> supports,
                           std::span<const ShotEmbedding> queries, const HeadWeights& w, int heads,
                           double sigma);

/// d x (N + 2) tokens: N spatial fibers, then the first-order token, then the
/// high-order token.
struct TokenMatrix {
  Eigen::MatrixXd tokens;

  std::size_t spatial_count() const { return static_cast<std::size_t>(tokens.cols()) - 2; }
  auto spatial() const { return tokens.leftCols(tokens.cols() - 2); }
  Eigen::VectorXd first_order() const { return tokens.col(tokens.cols() - 2); }
  Eigen::VectorXd high_order() const { return tokens.col(tokens.cols() - 1); }
};

/// [phi^l_1 ... phi^l_N, mean_n(phi^u_n), W_g psi] where l is the first and
/// u the second half of the 2d channels of `map`.
TokenMatrix build_spatial_hop_tokens(const Eigen::MatrixXd& map, const Eigen::VectorXd& psi,
                                     const HeadWeights& w);

/// RBF self-attention over all N + 2 tokens (queries, keys and values are
/// the tokens). Token positions are preserved.
TokenMatrix spatial_hop_head(const TokenMatrix& tokens, int heads, double sigma);

struct RelationOutput {
  Eigen::MatrixXd spatial;   ///< d x N: support minus query spatial tokens
  Eigen::VectorXd fo_ho;     ///< 2d: [fo_s .* fo_q ; ho_s .* ho_q]
  Eigen::MatrixXd combined;  ///< 2d x N: spatial on top, W_u fo_ho repeated over N below
};

RelationOutput compute_relations(const TokenMatrix& support, const TokenMatrix& query,
                                 const HeadWeights& w);

/// Means over the Z shots of the spatial maps and of the high-order vectors.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> z_average(std::span<const Eigen::MatrixXd> maps,
                                                      std::span<const Eigen::VectorXd> reps);

}  // namespace tenet
