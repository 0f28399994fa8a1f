#include "suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "tenet/attention.hpp"
#include "tenet/descriptors.hpp"
#include "tenet/hop_pipeline.hpp"
#include "tenet/relation_heads.hpp"
#include "tenet/shrinkage.hpp"
#include "tenet/tso.hpp"

namespace tenet::cli {
namespace {

using Rng = std::mt19937_64;

Check bounded(std::string name, double residual, double threshold) {
  return {std::move(name), std::isfinite(residual) && residual <= threshold, residual, threshold};
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

DenseTensor matrix_tensor(const Eigen::MatrixXd& m) {
  const RowMatrix row = m;
  return {2, static_cast<std::size_t>(m.rows()), std::vector<double>(row.data(), row.data() + row.size())};
}

double relative_diff(const DenseTensor& a, const DenseTensor& b) {
  return max_abs_diff(a, b) / std::max(1.0, max_abs(b));
}

DenseTensor normalized_hotd(Eigen::Index d, Eigen::Index n, std::size_t order, Rng& rng) {
  const FeatureMatrix f(gaussian(d, n, rng));
  return normalize_descriptor(hotd(f, order), f, order);
}

std::vector<Check> descriptors_suite(const SuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<Check> out;

  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d = uniform_int(rng, 1, 6);
    const auto order = static_cast<std::size_t>(uniform_int(rng, 2, 4));
    const FeatureMatrix f(gaussian(d, uniform_int(rng, 1, 6), rng));
    const FeatureMatrix g(gaussian(d, uniform_int(rng, 1, 6), rng));
    const double lhs = poly_kernel_sum(f, g, order);
    const double rhs = inner(hotd(f, order), hotd(g, order));
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  out.push_back(bounded("linearization_identity", worst, 1e-10));

  const Eigen::MatrixXd x = gaussian(4, 7, rng);
  std::vector<Eigen::Index> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd shuffled(4, 7);
  for (Eigen::Index j = 0; j < 7; ++j) shuffled.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  worst = 0.0;
  for (std::size_t r = 2; r <= 4; ++r) {
    worst = std::max(worst, max_abs_diff(hotd(FeatureMatrix(x), r), hotd(FeatureMatrix(shuffled), r)));
  }
  out.push_back(bounded("column_permutation_invariance", worst, 1e-14));

  const double c = 1.7;
  const DenseTensor base = hotd(FeatureMatrix(x), 3);
  out.push_back(bounded("homogeneity",
                        relative_diff(hotd(FeatureMatrix(c * x), 3), scale(base, c * c * c)), 1e-12));

  const FeatureMatrix f4(gaussian(4, 5, rng));
  const double trace = unfold(normalize_descriptor(hotd(f4, 4), f4, 4), 2).matrix.trace();
  out.push_back(bounded("normalized_unfolding_trace", trace <= 1.0 ? 1.0 - trace : trace, 1e-5));

  if (opts.input) {
    if (opts.input->order() != 2) throw std::invalid_argument("descriptors suite: --input must be an order-2 tensor");
    const FeatureMatrix f = feature_matrix_from_tensor(*opts.input);
    const double lhs = poly_kernel_sum(f, f, 2);
    const double rhs = inner(hotd(f, 2), hotd(f, 2));
    out.push_back(bounded("input_linearization_identity", std::abs(lhs - rhs) / std::max(1.0, lhs), 1e-10));
  }
  return out;
}

std::vector<Check> tso_suite(const SuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<Check> out;

  const DenseTensor m2 = matrix_tensor(random_trace_normalized_psd(16, opts.seed));
  const DenseTensor m4 = normalized_hotd(4, 6, 4, rng);
  double worst2 = 0.0;
  double worst4 = 0.0;
  for (int eta = 1; eta <= 64; ++eta) {
    worst2 = std::max(worst2, relative_diff(tso_fast_even(m2, eta).tensor, tso_naive(m2, eta).tensor));
    worst4 = std::max(worst4, relative_diff(tso_fast_even(m4, eta).tensor, tso_naive(m4, eta).tensor));
  }
  out.push_back(bounded("fast_even_vs_naive_r2", worst2, 1e-10));
  out.push_back(bounded("fast_even_vs_naive_r4", worst4, 1e-10));

  const DenseTensor m3 = normalized_hotd(6, 8, 3, rng);
  const DenseTensor identity3 = identity_tensor(6, 3);
  DenseTensor power = subtract(identity3, m3);
  double worst3 = relative_diff(tso_fast_odd(m3, 1).tensor, m3);
  for (int eta = 3; eta <= 27; eta *= 3) {
    power = contract(contract(power, power, 1), power, 2);
    worst3 = std::max(worst3, relative_diff(tso_fast_odd(m3, eta).tensor, subtract(identity3, power)));
  }
  out.push_back(bounded("fast_odd_vs_chain_r3", worst3, 1e-10));

  double spectral = 0.0;
  double overshoot = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd m = random_trace_normalized_psd(6, opts.seed + 100 + static_cast<std::uint64_t>(trial));
    const Eigen::VectorXd lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
    const Eigen::VectorXd mapped = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(maxexp_f(m, opts.eta)).eigenvalues();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      spectral = std::max(spectral, std::abs(mapped[i] - maxexp_scalar(lambda[i], opts.eta)));
      overshoot = std::max({overshoot, -mapped[i], mapped[i] - 1.0});
    }
  }
  out.push_back(bounded("spectral_oracle", spectral, 1e-10));
  out.push_back(bounded("no_overshoot", std::max(0.0, overshoot), 1e-12));

  double identity_gap = 0.0;
  for (const DenseTensor* t : {&m2, &m3, &m4}) identity_gap = std::max(identity_gap, max_abs_diff(tso(*t, 1), *t));
  out.push_back(bounded("eta_one_identity", identity_gap, 1e-14));

  double drop = 0.0;
  std::vector<double> previous = super_diagonal(m4).values;
  for (int eta = 2; eta <= 32; ++eta) {
    const std::vector<double> current = super_diagonal(tso(m4, eta)).values;
    for (std::size_t i = 0; i < current.size(); ++i) drop = std::max(drop, previous[i] - current[i]);
    previous = current;
  }
  out.push_back(bounded("super_diagonal_monotone", std::max(0.0, drop), 1e-12));

  if (opts.input) {
    const DenseTensor& t = *opts.input;
    if (t.order() % 2 == 0) {
      out.push_back(bounded("input_fast_vs_naive",
                            relative_diff(tso_fast_even(t, opts.eta).tensor, tso_naive(t, opts.eta).tensor), 1e-10));
    } else {
      const int eta = resolve_odd_eta(opts.eta, true).used;
      out.push_back(bounded("input_odd_finite", std::isfinite(max_abs(tso_fast_odd(t, eta).tensor)) ? 0.0 : 1.0, 0.0));
    }
  }
  return out;
}

/// Spectra whose complements (1 - lambda_i)^eta stay above 1e-8, where the
/// stationarity residual is still resolvable in double precision.
ShrinkageProblem random_problem(Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (;;) {
    const int d = uniform_int(rng, 2, 8);
    const int eta = uniform_int(rng, 2, 32);
    std::vector<double> raw(static_cast<std::size_t>(d));
    for (double& v : raw) v = u(rng);
    const SpectrumVector lambda = SpectrumVector::normalize(raw);
    const double top = *std::max_element(lambda.values.begin(), lambda.values.end());
    if (std::pow(1.0 - top, eta) >= 1e-8) return ShrinkageProblem::make(lambda, eta);
  }
}

std::vector<Check> theorems_suite(const SuiteOptions& opts) {
  std::vector<Check> out;
  const ShrinkageProblem example = ShrinkageProblem::make(SpectrumVector{{0.5, 0.3, 0.2}, true}, 7);
  const Theorem1Report ex = verify_theorem1(example);
  out.push_back(bounded("theorem1_example_distance", ex.distance_inf, 1e-4));
  out.push_back(bounded("theorem1_example_stationarity", ex.stationarity, 1e-6));

  Rng rng(opts.seed);
  double distance = 0.0;
  double stationarity = 0.0;
  double elementwise = 0.0;
  double gap = 0.0;
  for (int i = 0; i < 10; ++i) {
    const ShrinkageProblem prob = random_problem(rng);
    const Theorem1Report r = verify_theorem1(prob);
    distance = std::max(distance, r.distance_inf);
    stationarity = std::max(stationarity, r.stationarity);
    gap = std::max(gap, r.objective_gap);
    const std::vector<double> closed = closed_form_minimizer(prob);
    for (std::size_t k = 0; k < closed.size(); ++k) {
      elementwise = std::max(elementwise, std::abs(closed[k] - maxexp_scalar(prob.lambda[k], prob.eta)));
    }
  }
  out.push_back(bounded("theorem1_random_distance", distance, 1e-4));
  out.push_back(bounded("theorem1_random_stationarity", stationarity, 1e-6));
  out.push_back(bounded("theorem1_objective_gap", std::max(0.0, gap), 1e-8));
  out.push_back(bounded("closed_form_elementwise", elementwise, 1e-12));

  const Theorem2Report t2 = verify_theorem2(8, 5, opts.seed);
  out.push_back(bounded("theorem2_limit", t2.final_deviation, 1e-6));
  out.push_back(bounded("theorem2_monotone", t2.monotone ? 0.0 : 1.0, 0.0));
  out.push_back(bounded("theorem2_orthogonality", t2.orthogonality_residual, 1e-12));
  return out;
}

std::vector<Check> attention_suite(const SuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<Check> out;
  const Eigen::MatrixXd q = gaussian(8, 5, rng);
  const Eigen::MatrixXd k = gaussian(8, 6, rng);
  const Eigen::MatrixXd v = gaussian(8, 6, rng);

  const Eigen::MatrixXd soft = attention_weights(q, k, AttentionKind::softmax, opts.sigma);
  out.push_back(bounded("softmax_rows_sum_to_one", (soft.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12));

  const Eigen::MatrixXd self = attention_weights(q, q, AttentionKind::rbf, opts.sigma);
  out.push_back(bounded("rbf_self_similarity", (self.diagonal().array() - 1.0).abs().maxCoeff(), 1e-15));

  double single = 0.0;
  for (auto kind : {AttentionKind::softmax, AttentionKind::rbf}) {
    const AttentionBundle b{q, k, v, opts.sigma, 1};
    single = std::max(single, (multi_head(b, kind) - attention(b, kind)).cwiseAbs().maxCoeff());
  }
  out.push_back(bounded("single_head_equivalence", single, 1e-14));

  std::vector<Eigen::Index> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd kp(8, 6), vp(8, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    kp.col(j) = k.col(perm[static_cast<std::size_t>(j)]);
    vp.col(j) = v.col(perm[static_cast<std::size_t>(j)]);
  }
  double permuted = 0.0;
  for (auto kind : {AttentionKind::softmax, AttentionKind::rbf}) {
    const AttentionBundle a{q, k, v, opts.sigma, 4};
    const AttentionBundle b{q, kp, vp, opts.sigma, 4};
    permuted = std::max(permuted, (multi_head(a, kind) - multi_head(b, kind)).cwiseAbs().maxCoeff());
  }
  out.push_back(bounded("key_value_permutation_invariance", permuted, 1e-12));

  out.push_back(bounded("head_split_round_trip", (concat_heads(split_heads(q, 4)) - q).cwiseAbs().maxCoeff(), 0.0));

  const Eigen::MatrixXd ln = layer_norm_residual(gaussian(4, 16, rng), gaussian(4, 16, rng));
  const double mean_gap = ln.rowwise().mean().cwiseAbs().maxCoeff();
  const double var_gap = ((ln.rowwise().squaredNorm() / 16.0).array() - 1.0).abs().maxCoeff();
  out.push_back(bounded("layer_norm_statistics", std::max(mean_gap, var_gap), 1e-9));
  return out;
}

std::vector<Check> heads_suite(const SuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<Check> out;
  const std::size_t d = 8;
  const auto n = static_cast<Eigen::Index>(d);
  const HeadWeights w = HeadWeights::seeded(d, opts.seed);

  std::vector<ShotEmbedding> shots;
  for (int z = 0; z < 3; ++z) shots.push_back({gaussian(2 * n, 1, rng).col(0), gaussian(n, 1, rng).col(0)});
  std::vector<ShotEmbedding> queries;
  for (int b = 0; b < 2; ++b) queries.push_back({gaussian(2 * n, 1, rng).col(0), gaussian(n, 1, rng).col(0)});
  std::vector<ShotEmbedding> rotated{shots[2], shots[0], shots[1]};
  const double zperm =
      (zshot_head(shots, queries, w, 4, opts.sigma) - zshot_head(rotated, queries, w, 4, opts.sigma)).cwiseAbs().maxCoeff();
  out.push_back(bounded("zshot_support_permutation_invariance", zperm, 1e-12));

  const Eigen::MatrixXd map_s = gaussian(2 * n, 5, rng);
  const Eigen::MatrixXd map_q = gaussian(2 * n, 5, rng);
  const TokenMatrix ts = spatial_hop_head(build_spatial_hop_tokens(map_s, gaussian(n, 1, rng).col(0), w), 4, opts.sigma);
  const TokenMatrix tq = spatial_hop_head(build_spatial_hop_tokens(map_q, gaussian(n, 1, rng).col(0), w), 4, opts.sigma);
  const RelationOutput fwd = compute_relations(ts, tq, w);
  const RelationOutput back = compute_relations(tq, ts, w);
  out.push_back(bounded("spatial_relation_antisymmetry", (fwd.spatial + back.spatial).cwiseAbs().maxCoeff(), 0.0));
  out.push_back(bounded("relations_finite", fwd.combined.allFinite() && fwd.fo_ho.allFinite() ? 0.0 : 1.0, 0.0));

  const Eigen::VectorXd psi = gaussian(n, 1, rng).col(0);
  Eigen::MatrixXd reversed = map_s.rowwise().reverse();
  const TokenMatrix a = spatial_hop_head(build_spatial_hop_tokens(map_s, psi, w), 4, opts.sigma);
  const TokenMatrix b = spatial_hop_head(build_spatial_hop_tokens(reversed, psi, w), 4, opts.sigma);
  double equivariance = (a.spatial().rowwise().reverse() - b.spatial()).cwiseAbs().maxCoeff();
  equivariance = std::max(equivariance, (a.first_order() - b.first_order()).cwiseAbs().maxCoeff());
  equivariance = std::max(equivariance, (a.high_order() - b.high_order()).cwiseAbs().maxCoeff());
  out.push_back(bounded("spatial_permutation_equivariance", equivariance, 1e-12));
  return out;
}

std::vector<Check> pipeline_suite(const SuiteOptions& opts) {
  std::vector<Check> out;
  PipelineConfig cfg;
  cfg.tso.eta2 = cfg.tso.eta4 = opts.eta;
  cfg.tso.eta3 = resolve_odd_eta(opts.eta, true).used;
  cfg.tso.eta_prime = opts.eta_prime;
  cfg.sigma = opts.sigma;

  double orderless = 0.0;
  double determinism = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::uint64_t seed = opts.seed + s;
    EpisodeBatch e = synth_episode(seed, 3, 2, 16, 6, 2.0);
    const PipelineWeights w = PipelineWeights::seeded(16, seed);
    cfg.threads = 1;
    const EpisodeOutput base = forward_episode(e, cfg, w);
    cfg.threads = 4;
    const EpisodeOutput wide = forward_episode(e, cfg, w);
    determinism = std::max(determinism, (base.zshot - wide.zshot).cwiseAbs().maxCoeff());
    for (std::size_t b = 0; b < base.relations.size(); ++b) {
      determinism = std::max(determinism,
                             (base.relations[b].combined - wide.relations[b].combined).cwiseAbs().maxCoeff());
    }
    for (auto& support : e.supports) support = support.rowwise().reverse().eval();
    const EpisodeOutput permuted = forward_episode(e, cfg, w);
    orderless = std::max(orderless, (base.zshot - permuted.zshot).cwiseAbs().maxCoeff());
    orderless = std::max(orderless, (base.rpn_map - permuted.rpn_map).cwiseAbs().maxCoeff());
    for (std::size_t z = 0; z < base.support_hops.size(); ++z) {
      orderless = std::max(orderless, (base.support_hops[z] - permuted.support_hops[z]).cwiseAbs().maxCoeff());
    }
    for (std::size_t b = 0; b < base.relations.size(); ++b) {
      orderless = std::max(orderless, (base.relations[b].fo_ho - permuted.relations[b].fo_ho).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(bounded("orderless_invariance", orderless, 1e-10));
  out.push_back(bounded("thread_count_determinism", determinism, 0.0));

  Rng rng(opts.seed);
  const Eigen::MatrixXd map = gaussian(16, 12, rng);
  Eigen::MatrixXd zeroed = map;
  zeroed.bottomRows(6).setZero();
  const Eigen::VectorXd full = hop_unit(map, cfg.split, cfg.tso);
  const Eigen::VectorXd partial = hop_unit(zeroed, cfg.split, cfg.tso);
  out.push_back(bounded("group_independence", (full.head(10) - partial.head(10)).cwiseAbs().maxCoeff(), 0.0));

  int hits = 0;
  int total = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const EpisodeBatch e = synth_episode(opts.seed + s, 5, 4, 48, 32, 10.0);
    const EpisodeOutput o = forward_episode(e, cfg, PipelineWeights::seeded(48, opts.seed + s));
    for (bool hit : matched_class_first(e, o, cfg.sigma)) {
      hits += hit ? 1 : 0;
      ++total;
    }
  }
  out.push_back(bounded("separation_miss_rate", 1.0 - static_cast<double>(hits) / total, 0.05));
  return out;
}

}  // namespace

bool SuiteResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"descriptors", "tso", "theorems", "attention", "heads", "pipeline"};
  return names;
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r;
  r.name = name;
  if (name == "descriptors") {
    r.checks = descriptors_suite(opts);
  } else if (name == "tso") {
    r.checks = tso_suite(opts);
  } else if (name == "theorems") {
    r.checks = theorems_suite(opts);
  } else if (name == "attention") {
    r.checks = attention_suite(opts);
  } else if (name == "heads") {
    r.checks = heads_suite(opts);
  } else if (name == "pipeline") {
    r.checks = pipeline_suite(opts);
  } else {
    throw std::invalid_argument("unknown suite '" + name + "'");
  }
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void write_report_json(std::ostream& out, const std::vector<SuiteResult>& results) {
  nlohmann::json report;
  report["schema_version"] = kReportSchemaVersion;
  report["suites"] = nlohmann::json::array();
  bool all = true;
  for (const auto& s : results) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : s.checks) {
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"residual", c.residual}, {"threshold", c.threshold}});
    }
    report["suites"].push_back({{"name", s.name}, {"pass", s.pass()}, {"wall_time_ms", s.wall_time_ms}, {"checks", checks}});
    all = all && s.pass();
  }
  report["pass"] = all;
  out << report.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const std::vector<SuiteResult>& results) {
  out << "suite,check,pass,residual,threshold\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : results) {
    for (const auto& c : s.checks) {
      out << s.name << ',' << c.name << ',' << (c.pass ? 1 : 0) << ',' << c.residual << ',' << c.threshold << '\n';
    }
  }
}

}  // namespace tenet::cli
