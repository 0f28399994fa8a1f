#include "tenet/hop_pipeline.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tenet/attention.hpp"
#include "tenet/descriptors.hpp"
#include "tenet/worker_pool.hpp"

namespace tenet {
namespace {

RowMatrix to_row(const Eigen::MatrixXd& m) { return m; }

Eigen::MatrixXd vector_as_column(const Eigen::VectorXd& v) { return v; }

}  // namespace

std::array<std::size_t, 3> SplitConfig::channel_counts(std::size_t d) const {
  long total = 0;
  for (int r : ratios) {
    if (r <= 0) throw std::invalid_argument("split ratios must be positive");
    total += r;
  }
  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    counts[g] = static_cast<std::size_t>(ratios[g]) * d / static_cast<std::size_t>(total);
    assigned += counts[g];
  }
  counts[0] += d - assigned;
  for (std::size_t g = 0; g < 3; ++g) {
    if (counts[g] < 2) {
      throw std::invalid_argument("split " + to_string() + " leaves " + std::to_string(counts[g]) +
                                  " channel(s) for order " + std::to_string(g + 2) + " at d=" +
                                  std::to_string(d) + "; each group needs at least 2");
    }
  }
  return counts;
}

SplitConfig SplitConfig::parse(const std::string& text) {
  SplitConfig cfg;
  std::istringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ':')) {
    if (i >= 3) throw std::invalid_argument("split must have three parts a:b:c");
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad split part '" + part + "'");
    }
    if (used != part.size() || v <= 0) throw std::invalid_argument("bad split part '" + part + "'");
    cfg.ratios[i++] = v;
  }
  if (i != 3) throw std::invalid_argument("split must have three parts a:b:c");
  return cfg;
}

std::string SplitConfig::to_string() const {
  return std::to_string(ratios[0]) + ":" + std::to_string(ratios[1]) + ":" + std::to_string(ratios[2]);
}

void EpisodeBatch::validate() const {
  if (supports.empty()) throw std::invalid_argument("episode needs Z >= 1 supports");
  if (boxes.empty()) throw std::invalid_argument("episode needs B >= 1 boxes");
  const Eigen::Index d = query.rows();
  const Eigen::Index n = supports.front().cols();
  if (d == 0 || n == 0) throw std::invalid_argument("episode maps are empty");
  for (const auto& s : supports) {
    if (s.rows() != d || s.cols() != n) throw std::invalid_argument("support maps differ in shape");
  }
  for (const auto& b : boxes) {
    if (b.end > static_cast<std::size_t>(query.cols()) || b.begin >= b.end) {
      throw std::invalid_argument("box lies outside the query grid");
    }
    if (b.size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("box width must equal the support spatial size");
    }
  }
  if (!support_classes.empty() && support_classes.size() != supports.size()) {
    throw std::invalid_argument("support class labels do not match Z");
  }
  if (!roi_classes.empty() && roi_classes.size() != boxes.size()) {
    throw std::invalid_argument("RoI class labels do not match B");
  }
}

void EpisodeBatch::store(MatrixBundle& bundle) const {
  for (std::size_t z = 0; z < supports.size(); ++z) {
    bundle.put("support/" + std::to_string(z), to_row(supports[z]));
  }
  bundle.put("query", to_row(query));
  RowMatrix box_table(static_cast<Eigen::Index>(boxes.size()), 2);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    box_table(static_cast<Eigen::Index>(b), 0) = static_cast<double>(boxes[b].begin);
    box_table(static_cast<Eigen::Index>(b), 1) = static_cast<double>(boxes[b].end);
  }
  bundle.put("boxes", box_table);
  auto labels = [](const std::vector<int>& v) {
    RowMatrix m(1, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
    return m;
  };
  if (!support_classes.empty()) bundle.put("support_classes", labels(support_classes));
  if (!roi_classes.empty()) bundle.put("roi_classes", labels(roi_classes));
}

EpisodeBatch EpisodeBatch::load(const MatrixBundle& bundle) {
  EpisodeBatch e;
  for (std::size_t z = 0;; ++z) {
    auto found = bundle.find("support/" + std::to_string(z));
    if (!found) break;
    e.supports.emplace_back(found->get());
  }
  e.query = bundle.get("query");
  const RowMatrix& box_table = bundle.get("boxes");
  if (box_table.cols() != 2) throw std::invalid_argument("boxes section must have two columns");
  for (Eigen::Index b = 0; b < box_table.rows(); ++b) {
    const double lo = box_table(b, 0);
    const double hi = box_table(b, 1);
    if (lo < 0 || hi < 0 || lo != std::floor(lo) || hi != std::floor(hi)) {
      throw std::invalid_argument("box bounds must be non-negative integers");
    }
    e.boxes.push_back({static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)});
  }
  auto labels = [&](const char* name, std::vector<int>& out) {
    if (auto found = bundle.find(name)) {
      for (Eigen::Index i = 0; i < found->get().size(); ++i) {
        out.push_back(static_cast<int>(found->get().data()[i]));
      }
    }
  };
  labels("support_classes", e.support_classes);
  labels("roi_classes", e.roi_classes);
  e.validate();
  return e;
}

PipelineWeights PipelineWeights::seeded(std::size_t d, std::uint64_t seed) {
  PipelineWeights w;
  w.heads = HeadWeights::seeded(d, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const auto n = static_cast<Eigen::Index>(d);
  w.lift.resize(2 * n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < 2 * n; ++i) w.lift(i, j) = dist(rng);
  }
  return w;
}

Eigen::VectorXd hop_unit(const Eigen::MatrixXd& map, const SplitConfig& split, const TsoParams& params) {
  params.validate();
  const auto d = static_cast<std::size_t>(map.rows());
  const auto counts = split.channel_counts(d);
  Eigen::VectorXd out(map.rows());
  Eigen::Index row = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t order = g + 2;
    const auto width = static_cast<Eigen::Index>(counts[g]);
    const FeatureMatrix f(map.middleRows(row, width));
    const DenseTensor m = normalize_descriptor(hotd(f, order), f, order);
    const SuperDiagonal diag = super_diagonal(tso(m, params.eta_for(order)));
    for (Eigen::Index i = 0; i < width; ++i) {
      out[row + i] = sigme(diag.values[static_cast<std::size_t>(i)], params.eta_prime);
    }
    row += width;
  }
  return out;
}

Eigen::MatrixXd tenet_rpn_attend(std::span<const Eigen::VectorXd> supports,
                                 const Eigen::MatrixXd& query_map, int heads, double sigma) {
  if (supports.empty()) throw std::invalid_argument("tenet_rpn_attend: need Z >= 1 supports");
  AttentionBundle b;
  b.q = query_map;
  b.k.resize(query_map.rows(), static_cast<Eigen::Index>(supports.size()));
  for (std::size_t z = 0; z < supports.size(); ++z) {
    if (supports[z].size() != query_map.rows()) {
      throw std::invalid_argument("tenet_rpn_attend: support vector length differs from d");
    }
    b.k.col(static_cast<Eigen::Index>(z)) = supports[z];
  }
  b.v = b.k;
  b.sigma = sigma;
  b.heads = heads;
  return multi_head(b, AttentionKind::rbf).transpose();
}

Eigen::MatrixXd crop(const Eigen::MatrixXd& map, const Box& box) {
  if (box.begin >= box.end || box.end > static_cast<std::size_t>(map.cols())) {
    throw std::invalid_argument("crop: box outside the map");
  }
  return map.middleCols(static_cast<Eigen::Index>(box.begin), static_cast<Eigen::Index>(box.size()));
}

EpisodeOutput forward_episode(const EpisodeBatch& e, const PipelineConfig& cfg,
                              const PipelineWeights& w) {
  e.validate();
  cfg.tso.validate();
  if (w.heads.dim() != e.dim()) throw std::invalid_argument("pipeline weights do not match d");
  const std::size_t z_count = e.supports.size();
  const std::size_t b_count = e.boxes.size();
  const std::size_t threads = cfg.threads == 0 ? pool_threads() : cfg.threads;

  EpisodeOutput out;
  out.support_hops.resize(z_count);
  std::vector<Eigen::MatrixXd> support_wide(z_count);
  parallel_for(z_count, [&](std::size_t z) {
    out.support_hops[z] = hop_unit(e.supports[z], cfg.split, cfg.tso);
    support_wide[z] = w.lift * e.supports[z];
  }, threads);

  out.rpn_map = tenet_rpn_attend(out.support_hops, e.query, cfg.heads, cfg.sigma);

  out.roi_hops.resize(b_count);
  std::vector<Eigen::MatrixXd> roi_wide(b_count);
  parallel_for(b_count, [&](std::size_t b) {
    const Eigen::MatrixXd features = crop(e.query, e.boxes[b]);
    out.roi_hops[b] = hop_unit(features, cfg.split, cfg.tso);
    roi_wide[b] = w.lift * features;
  }, threads);

  std::vector<ShotEmbedding> shots(z_count);
  for (std::size_t z = 0; z < z_count; ++z) {
    shots[z] = {support_wide[z].rowwise().mean(), out.support_hops[z]};
  }
  std::vector<ShotEmbedding> rois(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    rois[b] = {roi_wide[b].rowwise().mean(), out.roi_hops[b]};
  }
  out.zshot = zshot_head(shots, rois, w.heads, cfg.heads, cfg.sigma);

  const auto [pooled_map, pooled_hop] = z_average(support_wide, out.support_hops);
  out.support_tokens =
      spatial_hop_head(build_spatial_hop_tokens(pooled_map, pooled_hop, w.heads), cfg.heads, cfg.sigma);

  out.roi_tokens.resize(b_count);
  out.relations.resize(b_count);
  parallel_for(b_count, [&](std::size_t b) {
    out.roi_tokens[b] = spatial_hop_head(
        build_spatial_hop_tokens(roi_wide[b], out.roi_hops[b], w.heads), cfg.heads, cfg.sigma);
    out.relations[b] = compute_relations(out.support_tokens, out.roi_tokens[b], w.heads);
  }, threads);
  return out;
}

void EpisodeOutput::store(MatrixBundle& bundle) const {
  for (std::size_t z = 0; z < support_hops.size(); ++z) {
    bundle.put("out/support_hop/" + std::to_string(z), to_row(vector_as_column(support_hops[z])));
  }
  for (std::size_t b = 0; b < roi_hops.size(); ++b) {
    const std::string id = std::to_string(b);
    bundle.put("out/roi_hop/" + id, to_row(vector_as_column(roi_hops[b])));
    bundle.put("out/roi_tokens/" + id, to_row(roi_tokens[b].tokens));
    bundle.put("out/relation/" + id + "/spatial", to_row(relations[b].spatial));
    bundle.put("out/relation/" + id + "/fo_ho", to_row(vector_as_column(relations[b].fo_ho)));
    bundle.put("out/relation/" + id + "/combined", to_row(relations[b].combined));
  }
  bundle.put("out/rpn_map", to_row(rpn_map));
  bundle.put("out/zshot", to_row(zshot));
  bundle.put("out/support_tokens", to_row(support_tokens.tokens));
}

JacobianResult numerical_jacobian(const VectorFunction& fn, const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("numerical_jacobian: step must be positive");
  JacobianResult r;
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const Eigen::VectorXd plus = fn(probe);
    probe[j] = x[j] - step;
    const Eigen::VectorXd minus = fn(probe);
    probe[j] = x[j];
    if (j == 0) r.jacobian.resize(plus.size(), x.size());
    if (plus.size() != r.jacobian.rows() || minus.size() != r.jacobian.rows()) {
      throw std::invalid_argument("numerical_jacobian: output length changed between probes");
    }
    if (!plus.allFinite() || !minus.allFinite()) r.finite = false;
    r.jacobian.col(j) = (plus - minus) / (2.0 * step);
  }
  return r;
}

EpisodeBatch synth_episode(std::uint64_t seed, std::size_t z, std::size_t b, std::size_t d,
                           std::size_t n, double separation) {
  if (z == 0 || b == 0 || d == 0 || n == 0) {
    throw std::invalid_argument("synth_episode: Z, B, d and N must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> directions(z);
  for (auto& u : directions) {
    u.resize(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    u.normalize();
  }
  auto sample = [&](int cls) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, j) = separation * directions[static_cast<std::size_t>(cls)][i] + normal(rng);
      }
    }
    return m;
  };

  EpisodeBatch e;
  for (std::size_t s = 0; s < z; ++s) {
    e.support_classes.push_back(static_cast<int>(s));
    e.supports.push_back(sample(static_cast<int>(s)));
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(z) - 1);
  e.query.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(b * n));
  for (std::size_t r = 0; r < b; ++r) {
    const int cls = pick(rng);
    e.roi_classes.push_back(cls);
    e.boxes.push_back({r * n, (r + 1) * n});
    e.query.middleCols(static_cast<Eigen::Index>(r * n), static_cast<Eigen::Index>(n)) = sample(cls);
  }
  return e;
}

std::vector<bool> matched_class_first(const EpisodeBatch& e, const EpisodeOutput& out, double sigma) {
  if (e.roi_classes.size() != out.roi_hops.size() || e.support_classes.size() != out.support_hops.size()) {
    throw std::invalid_argument("matched_class_first: episode carries no class labels");
  }
  std::vector<bool> hits;
  for (std::size_t b = 0; b < out.roi_hops.size(); ++b) {
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t z = 0; z < out.support_hops.size(); ++z) {
      const double s = rbf_similarity(out.roi_hops[b], out.support_hops[z], sigma);
      if (s > best_sim) {
        best_sim = s;
        best = z;
      }
    }
    hits.push_back(e.support_classes[best] == e.roi_classes[b]);
  }
  return hits;
}

}  // namespace tenet
