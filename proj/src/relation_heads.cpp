#include "tenet/relation_heads.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "tenet/attention.hpp"

namespace tenet {
namespace {

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string("head weight ") + name + " has shape " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.allFinite()) throw std::invalid_argument(std::string("head weight ") + name + " is not finite");
}

Eigen::VectorXd embed(const Eigen::MatrixXd& proj, const ShotEmbedding& e, const HeadWeights& w) {
  const auto d = static_cast<Eigen::Index>(w.dim());
  if (e.pooled.size() != 2 * d || e.hop.size() != d) {
    throw std::invalid_argument("zshot_head: embedding shapes do not match the weights");
  }
  return proj * (e.pooled + w.wp * e.hop);
}

}  // namespace

void HeadWeights::validate() const {
  const Eigen::Index d = wg.rows();
  if (d == 0) throw std::invalid_argument("head weights are empty");
  require_shape(wq, 2 * d, 2 * d, "W_q");
  require_shape(wk, 2 * d, 2 * d, "W_k");
  require_shape(wv, 2 * d, 2 * d, "W_v");
  require_shape(wp, 2 * d, d, "W_p");
  require_shape(wg, d, d, "W_g");
  require_shape(wu, d, 2 * d, "W_u");
}

HeadWeights HeadWeights::seeded(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("head weights need d >= 1");
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
  };
  const auto n = static_cast<Eigen::Index>(d);
  HeadWeights w;
  w.wq = fill(2 * n, 2 * n);
  w.wk = fill(2 * n, 2 * n);
  w.wv = fill(2 * n, 2 * n);
  w.wp = fill(2 * n, n);
  w.wg = fill(n, n);
  w.wu = fill(n, 2 * n);
  return w;
}

HeadWeights HeadWeights::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  HeadWeights w;
  w.wq = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  w.wk = w.wq;
  w.wv = w.wq;
  w.wp = Eigen::MatrixXd::Zero(2 * n, n);
  w.wg = Eigen::MatrixXd::Identity(n, n);
  w.wu.resize(n, 2 * n);
  w.wu << Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n);
  return w;
}

void HeadWeights::store(MatrixBundle& bundle, const std::string& prefix) const {
  bundle.put(prefix + "W_q", wq);
  bundle.put(prefix + "W_k", wk);
  bundle.put(prefix + "W_v", wv);
  bundle.put(prefix + "W_p", wp);
  bundle.put(prefix + "W_g", wg);
  bundle.put(prefix + "W_u", wu);
}

HeadWeights HeadWeights::load(const MatrixBundle& bundle, const std::string& prefix) {
  HeadWeights w;
  w.wq = bundle.get(prefix + "W_q");
  w.wk = bundle.get(prefix + "W_k");
  w.wv = bundle.get(prefix + "W_v");
  w.wp = bundle.get(prefix + "W_p");
  w.wg = bundle.get(prefix + "W_g");
  w.wu = bundle.get(prefix + "W_u");
  w.validate();
  return w;
}

Eigen::MatrixXd zshot_head(std::span<const ShotEmbedding> supports,
                           std::span<const ShotEmbedding> queries, const HeadWeights& w, int heads,
                           double sigma) {
  if (supports.empty() || queries.empty()) {
    throw std::invalid_argument("zshot_head: need at least one support and one query");
  }
  w.validate();
  const auto two_d = static_cast<Eigen::Index>(2 * w.dim());
  AttentionBundle b;
  b.q.resize(two_d, static_cast<Eigen::Index>(queries.size()));
  b.k.resize(two_d, static_cast<Eigen::Index>(supports.size()));
  b.v.resize(two_d, static_cast<Eigen::Index>(supports.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    b.q.col(static_cast<Eigen::Index>(i)) = embed(w.wq, queries[i], w);
  }
  for (std::size_t z = 0; z < supports.size(); ++z) {
    b.k.col(static_cast<Eigen::Index>(z)) = embed(w.wk, supports[z], w);
    b.v.col(static_cast<Eigen::Index>(z)) = embed(w.wv, supports[z], w);
  }
  b.sigma = sigma;
  b.heads = heads;
  return multi_head(b, AttentionKind::rbf);
}

TokenMatrix build_spatial_hop_tokens(const Eigen::MatrixXd& map, const Eigen::VectorXd& psi,
                                     const HeadWeights& w) {
  if (map.rows() % 2 != 0) throw std::invalid_argument("spatial-HOP tokens need an even channel count");
  if (map.cols() == 0) throw std::invalid_argument("spatial-HOP tokens need N >= 1");
  const Eigen::Index d = map.rows() / 2;
  if (static_cast<std::size_t>(d) != w.dim() || psi.size() != d) {
    throw std::invalid_argument("spatial-HOP tokens: shapes do not match the weights");
  }
  const Eigen::Index n = map.cols();
  TokenMatrix t;
  t.tokens.resize(d, n + 2);
  t.tokens.leftCols(n) = map.topRows(d);
  t.tokens.col(n) = map.bottomRows(d).rowwise().mean();
  t.tokens.col(n + 1) = w.wg * psi;
  return t;
}

TokenMatrix spatial_hop_head(const TokenMatrix& tokens, int heads, double sigma) {
  if (tokens.tokens.cols() < 3) throw std::invalid_argument("spatial_hop_head: need N + 2 >= 3 tokens");
  AttentionBundle b{tokens.tokens, tokens.tokens, tokens.tokens, sigma, heads};
  return {multi_head(b, AttentionKind::rbf).transpose()};
}

RelationOutput compute_relations(const TokenMatrix& support, const TokenMatrix& query,
                                 const HeadWeights& w) {
  if (support.tokens.rows() != query.tokens.rows() || support.tokens.cols() != query.tokens.cols()) {
    throw std::invalid_argument("compute_relations: token matrices differ in shape");
  }
  const Eigen::Index d = support.tokens.rows();
  if (static_cast<std::size_t>(d) != w.dim()) {
    throw std::invalid_argument("compute_relations: token width does not match the weights");
  }
  const auto n = static_cast<Eigen::Index>(support.spatial_count());
  RelationOutput r;
  r.spatial = support.spatial() - query.spatial();
  r.fo_ho.resize(2 * d);
  r.fo_ho.head(d) = support.first_order().cwiseProduct(query.first_order());
  r.fo_ho.tail(d) = support.high_order().cwiseProduct(query.high_order());
  const Eigen::VectorXd projected = w.wu * r.fo_ho;
  r.combined.resize(2 * d, n);
  r.combined.topRows(d) = r.spatial;
  r.combined.bottomRows(d) = projected.replicate(1, n);
  return r;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> z_average(std::span<const Eigen::MatrixXd> maps,
                                                      std::span<const Eigen::VectorXd> reps) {
  if (maps.empty() || reps.empty()) throw std::invalid_argument("z_average: Z must be at least 1");
  if (maps.size() != reps.size()) throw std::invalid_argument("z_average: Z differs between inputs");
  Eigen::MatrixXd map_sum = Eigen::MatrixXd::Zero(maps.front().rows(), maps.front().cols());
  Eigen::VectorXd rep_sum = Eigen::VectorXd::Zero(reps.front().size());
  for (std::size_t z = 0; z < maps.size(); ++z) {
    if (maps[z].rows() != map_sum.rows() || maps[z].cols() != map_sum.cols() ||
        reps[z].size() != rep_sum.size()) {
      throw std::invalid_argument("z_average: inconsistent shapes");
    }
    map_sum += maps[z];
    rep_sum += reps[z];
  }
  const auto z = static_cast<double>(maps.size());
  return {map_sum / z, rep_sum / z};
}

}  // namespace tenet
