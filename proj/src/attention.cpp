#include "tenet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tenet {
namespace {

Eigen::MatrixXd normalized_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (!(n > 0.0)) throw std::domain_error("rbf attention: cannot normalize a zero vector");
    out.col(j) /= n;
  }
  return out;
}

}  // namespace

void AttentionBundle::validate() const {
  if (q.size() == 0 || k.size() == 0 || v.size() == 0) {
    throw std::invalid_argument("attention: empty input");
  }
  if (q.rows() != k.rows()) throw std::invalid_argument("attention: Q and K differ in channels");
  if (k.cols() != v.cols()) throw std::invalid_argument("attention: K and V differ in token count");
  if (!(sigma > 0.0)) throw std::invalid_argument("attention: sigma must be positive");
  if (heads < 1 || q.rows() % heads != 0 || v.rows() % heads != 0) {
    throw std::invalid_argument("attention: channel count is not divisible by the head count");
  }
}

double rbf_similarity(const Eigen::VectorXd& q, const Eigen::VectorXd& k, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rbf_similarity: sigma must be positive");
  if (q.size() != k.size()) throw std::invalid_argument("rbf_similarity: length mismatch");
  const double nq = q.norm();
  const double nk = k.norm();
  if (!(nq > 0.0) || !(nk > 0.0)) throw std::domain_error("rbf_similarity: zero vector");
  const double dist2 = (q / nq - k / nk).squaredNorm();
  return std::exp(-dist2 / (2.0 * sigma * sigma));
}

Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                  AttentionKind kind, double sigma) {
  if (kind == AttentionKind::softmax) {
    Eigen::MatrixXd logits = (q.transpose() * k) / std::sqrt(static_cast<double>(q.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double top = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - top).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    return logits;
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("attention: sigma must be positive");
  const Eigen::MatrixXd qn = normalized_columns(q);
  const Eigen::MatrixXd kn = normalized_columns(k);
  Eigen::MatrixXd w(q.cols(), k.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      w(i, j) = std::exp(-(qn.col(i) - kn.col(j)).squaredNorm() / (2.0 * sigma * sigma));
    }
  }
  return w;
}

Eigen::MatrixXd attention(const AttentionBundle& b, AttentionKind kind) {
  if (b.q.size() == 0 || b.k.size() == 0 || b.v.size() == 0) {
    throw std::invalid_argument("attention: empty input");
  }
  if (b.q.rows() != b.k.rows() || b.k.cols() != b.v.cols()) {
    throw std::invalid_argument("attention: shape mismatch");
  }
  return attention_weights(b.q, b.k, kind, b.sigma) * b.v.transpose();
}

std::vector<Eigen::MatrixXd> split_heads(const Eigen::MatrixXd& m, int heads) {
  if (heads < 1 || m.rows() % heads != 0) {
    throw std::invalid_argument("split_heads: channel count is not divisible by the head count");
  }
  const Eigen::Index width = m.rows() / heads;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) out.emplace_back(m.middleRows(h * width, width));
  return out;
}

Eigen::MatrixXd concat_heads(const std::vector<Eigen::MatrixXd>& groups) {
  if (groups.empty()) throw std::invalid_argument("concat_heads: no groups");
  Eigen::Index rows = 0;
  for (const auto& g : groups) {
    if (g.cols() != groups.front().cols()) throw std::invalid_argument("concat_heads: width mismatch");
    rows += g.rows();
  }
  Eigen::MatrixXd out(rows, groups.front().cols());
  Eigen::Index at = 0;
  for (const auto& g : groups) {
    out.middleRows(at, g.rows()) = g;
    at += g.rows();
  }
  return out;
}

Eigen::MatrixXd multi_head(const AttentionBundle& b, AttentionKind kind) {
  b.validate();
  if (b.heads == 1) return attention(b, kind);
  const auto qs = split_heads(b.q, b.heads);
  const auto ks = split_heads(b.k, b.heads);
  const auto vs = split_heads(b.v, b.heads);
  Eigen::MatrixXd out(b.q.cols(), b.v.rows());
  const Eigen::Index width = b.v.rows() / b.heads;
  for (int h = 0; h < b.heads; ++h) {
    const auto hh = static_cast<std::size_t>(h);
    out.middleCols(h * width, width) = attention({qs[hh], ks[hh], vs[hh], b.sigma, 1}, kind);
  }
  return out;
}

Eigen::MatrixXd layer_norm_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sub_output,
                                    double epsilon) {
  if (x.rows() != sub_output.rows() || x.cols() != sub_output.cols()) {
    throw std::invalid_argument("layer_norm_residual: shape mismatch");
  }
  Eigen::MatrixXd y = x + sub_output;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mean = y.row(i).mean();
    y.row(i).array() -= mean;
    const double var = y.row(i).squaredNorm() / static_cast<double>(y.cols());
    // Near-constant rows are scaled by 1/sqrt(epsilon) instead.
    y.row(i) /= std::sqrt(std::max(var, epsilon));
  }
  return y;
}

}  // namespace tenet
