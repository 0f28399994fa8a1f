#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tenet/relation_heads.hpp"
#include "tenet/tensor_io.hpp"
#include "tenet/tso.hpp"

namespace tenet {

/// Channel split over the order-2, order-3 and order-4 descriptor groups,
/// e.g. {5, 2, 1}. Counts are ratio * d / sum(ratios) rounded down, with the
/// remainder going to the order-2 group; every group needs >= 2 channels.
struct SplitConfig {
  std::array<int, 3> ratios{5, 2, 1};

  std::array<std::size_t, 3> channel_counts(std::size_t d) const;
  /// Parses "a:b:c".
  static SplitConfig parse(const std::string& text);
  std::string to_string() const;
};

/// Half-open column range [begin, end) over the query feature grid.
struct Box {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// One synthetic few-shot task: Z support maps (d x N), one query map
/// (d x N*), and B boxes over the query grid. Class labels are carried for
/// scoring; support z belongs to class support_classes[z].
struct EpisodeBatch {
  std::vector<Eigen::MatrixXd> supports;
  Eigen::MatrixXd query;
  std::vector<Box> boxes;
  std::vector<int> support_classes;
  std::vector<int> roi_classes;

  std::size_t dim() const { return static_cast<std::size_t>(query.rows()); }
  void validate() const;

  void store(MatrixBundle& bundle) const;
  static EpisodeBatch load(const MatrixBundle& bundle);
};

/// Fixed projections used by the synthetic forward pass.
struct PipelineWeights {
  HeadWeights heads;
  Eigen::MatrixXd lift;  ///< 2d x d map to the wider spatially ordered features

  static PipelineWeights seeded(std::size_t d, std::uint64_t seed);
};

struct PipelineConfig {
  SplitConfig split;
  TsoParams tso;
  int heads = 4;
  double sigma = 0.5;
  std::size_t threads = 0;  ///< worker count; 0 uses pool_threads()
};

/// Splits the channels of `map` per `split`, pools an order-2/3/4 descriptor
/// per group, applies the shrinkage operator, concatenates the super-diagonals
/// and applies SigmE. Returns a length-d vector.
Eigen::VectorXd hop_unit(const Eigen::MatrixXd& map, const SplitConfig& split, const TsoParams& params);

/// Cross-attention with one query token per column of `query_map` and one
/// key/value token per support vector. Returns the d x N* modulated map.
Eigen::MatrixXd tenet_rpn_attend(std::span<const Eigen::VectorXd> supports,
                                 const Eigen::MatrixXd& query_map, int heads, double sigma);

struct EpisodeOutput {
  std::vector<Eigen::VectorXd> support_hops;
  std::vector<Eigen::VectorXd> roi_hops;
  Eigen::MatrixXd rpn_map;                  ///< d x N*
  Eigen::MatrixXd zshot;                    ///< B x 2d
  TokenMatrix support_tokens;               ///< after the spatial-HOP head
  std::vector<TokenMatrix> roi_tokens;      ///< after the spatial-HOP head
  std::vector<RelationOutput> relations;    ///< one per box

  void store(MatrixBundle& bundle) const;
};

/// Complete synthetic forward pass. RoIs are processed on the worker pool;
/// each RoI writes only its own slot, so results do not depend on the
/// thread count.
EpisodeOutput forward_episode(const EpisodeBatch& e, const PipelineConfig& cfg,
                              const PipelineWeights& w);

/// Column crop of `map` over `box`.
Eigen::MatrixXd crop(const Eigen::MatrixXd& map, const Box& box);

struct JacobianResult {
  Eigen::MatrixXd jacobian;  ///< outputs x inputs
  bool finite = true;        ///< false if any probe produced a non-finite value
};

using VectorFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central-difference Jacobian with the given step.
JacobianResult numerical_jacobian(const VectorFunction& fn, const Eigen::VectorXd& x,
                                  double step = 1e-6);

/// Deterministic episode: class c has a random unit direction u_c and every
/// feature column is separation * u_c + N(0, I) noise. Support z is of class
/// z; each of the B boxes spans N columns of one randomly chosen class.
EpisodeBatch synth_episode(std::uint64_t seed, std::size_t z, std::size_t b, std::size_t d,
                           std::size_t n, double separation);

/// For every box, whether the support with the highest RBF similarity of
/// high-order pooled vectors has the box's class.
std::vector<bool> matched_class_first(const EpisodeBatch& e, const EpisodeOutput& out, double sigma);

}  // namespace tenet
