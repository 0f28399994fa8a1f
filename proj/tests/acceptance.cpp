// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tenet/attention.hpp"
#include "tenet/bench.hpp"
#include "tenet/descriptors.hpp"
#include "tenet/hop_pipeline.hpp"
#include "tenet/shrinkage.hpp"
#include "tenet/tso.hpp"

using namespace tenet;
using Rng = std::mt19937_64;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char timing[96];
  if (limit_s > 0) {
    std::snprintf(timing, sizeof timing, "%.2f s (limit %.0f s)", secs, limit_s);
    if (secs >= limit_s) o.pass = false;
  } else {
    std::snprintf(timing, sizeof timing, "%.2f s", secs);
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s; %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), timing);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double max_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

Outcome kernel_linearization() {
  Rng rng(1001);
  std::uniform_int_distribution<int> dim(1, 8), count(1, 6), order(2, 4);
  double worst = 0.0;
  double worst_oracle = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto d = static_cast<std::size_t>(dim(rng));
    const auto r = static_cast<std::size_t>(order(rng));
    const auto f = oracle::random_columns(d, static_cast<std::size_t>(count(rng)), rng);
    const auto g = oracle::random_columns(d, static_cast<std::size_t>(count(rng)), rng);
    const FeatureMatrix ff(testing::to_eigen(f)), gg(testing::to_eigen(g));
    const double lhs = poly_kernel_sum(ff, gg, r);
    const double rhs = inner(hotd(ff, r), hotd(gg, r));
    const double expected = oracle::poly_kernel(f, g, r);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    worst_oracle = std::max(worst_oracle, std::abs(rhs - expected) / std::max(std::abs(expected), 1e-300));
  }
  return {worst <= 1e-10 && worst_oracle <= 1e-10,
          fmt("200 instances, max rel |kernel - <T,T'>| = %.2e, vs oracle %.2e (<= 1e-10)", worst, worst_oracle)};
}

Outcome tso_correctness() {
  Rng rng(1002);
  const DenseTensor m2 = testing::matrix_tensor(random_trace_normalized_psd(64, 1002));
  const FeatureMatrix f4(testing::gaussian(8, 10, rng));
  const DenseTensor m4 = normalize_descriptor(hotd(f4, 4), f4, 4);
  std::vector<int> etas(64);
  std::iota(etas.begin(), etas.end(), 1);
  etas.push_back(1024);
  double even = 0.0;
  for (int eta : etas) {
    for (const DenseTensor* m : {&m2, &m4}) {
      even = std::max(even, testing::rel_diff(tso_fast_even(*m, eta).tensor, tso_naive(*m, eta).tensor));
    }
  }

  // Odd path against the plain-loop chain A <- (A x_1 A) x_2 A.
  const FeatureMatrix f3(testing::gaussian(6, 9, rng));
  const DenseTensor m3 = normalize_descriptor(hotd(f3, 3), f3, 3);
  const oracle::Tensor t3 = testing::to_oracle(m3);
  const oracle::Tensor id3 = oracle::identity(6, 3);
  oracle::Tensor power = oracle::minus(id3, t3);
  double odd = testing::rel_diff(tso_fast_odd(m3, 1).tensor, m3);
  for (int eta = 3; eta <= 27; eta *= 3) {
    power = oracle::contract(oracle::contract(power, power, 1), power, 2);
    const DenseTensor expected = testing::from_oracle(oracle::minus(id3, power));
    odd = std::max(odd, testing::rel_diff(tso_fast_odd(m3, eta).tensor, expected));
  }
  return {even <= 1e-10 && odd <= 1e-10,
          fmt("even r=2 d=64 / r=4 d=8, eta 1..64 and 1024: %.2e; odd r=3 eta 1,3,9,27: %.2e (<= 1e-10)", even, odd)};
}

Outcome spectral_oracle() {
  Rng rng(1003);
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    oracle::Vec lambda(static_cast<std::size_t>(dim(rng)));
    double sum = 0.0;
    for (double& v : lambda) sum += (v = u(rng));
    for (double& v : lambda) v /= sum;
    const oracle::Mat m = oracle::with_spectrum(lambda, rng);
    std::sort(lambda.begin(), lambda.end());
    for (int eta : {2, 7, 32}) {
      const Eigen::MatrixXd out = maxexp_f(testing::to_eigen(m), eta);
      oracle::Mat om(lambda.size(), lambda.size());
      for (std::size_t r = 0; r < lambda.size(); ++r) {
        for (std::size_t c = 0; c < lambda.size(); ++c) {
          om(r, c) = 0.5 * (out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +
                            out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)));
        }
      }
      const oracle::Vec got = oracle::jacobi_eigenvalues(om);
      // 1 - (1 - x)^eta is increasing, so sorted inputs map to sorted outputs.
      for (std::size_t k = 0; k < lambda.size(); ++k) {
        worst = std::max(worst, std::abs(got[k] - (1.0 - std::pow(1.0 - lambda[k], eta))));
      }
    }
  }
  return {worst <= 1e-10, fmt("100 matrices, eta in {2,7,32}: max eigenvalue error %.2e (<= 1e-10)", worst)};
}

Outcome theorem1() {
  Rng rng(1004);
  std::uniform_int_distribution<int> dim(2, 8), exponent(2, 32);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double distance = 0.0;
  double stationarity = 0.0;
  int problems = 0;
  int rejected = 0;
  while (problems < 50) {
    const int eta = exponent(rng);
    std::vector<double> raw(static_cast<std::size_t>(dim(rng)));
    for (double& v : raw) v = u(rng);
    const SpectrumVector lambda = SpectrumVector::normalize(raw);
    // Complements below 1e-8 leave the stationarity residual at rounding level.
    if (std::pow(1.0 - *std::max_element(lambda.values.begin(), lambda.values.end()), eta) < 1e-8) {
      ++rejected;
      continue;
    }
    ++problems;
    const ShrinkageProblem prob = ShrinkageProblem::make(lambda, eta);
    const Theorem1Report r = verify_theorem1(prob);
    for (std::size_t i = 0; i < prob.lambda.size(); ++i) {
      const double expected = 1.0 - std::pow(1.0 - prob.lambda[i], eta);
      distance = std::max(distance, std::abs(r.best_numerical[i] - expected));
    }
    stationarity = std::max(stationarity, r.stationarity);
  }
  return {distance <= 1e-4 && stationarity <= 1e-6,
          fmt("50 problems (%.0f redrawn): max inf-distance %.2e (<= 1e-4), stationarity %.2e (<= 1e-6)",
              rejected, distance, stationarity)};
}

Outcome theorem2() {
  const Theorem2Report r = verify_theorem2(8, 5);
  const Eigen::MatrixXd m = random_trace_normalized_psd(8, 1005);
  const double direct = max_diff(maxexp_f(m, 1 << 20), Eigen::MatrixXd::Identity(8, 8));
  const bool pass = r.final_deviation <= 1e-6 && r.monotone && direct <= 1e-6;
  return {pass, fmt("eta=2^20: |out - I|_inf = %.2e over 5 trials, %.2e direct (<= 1e-6); monotone %.0f", r.final_deviation,
                    direct, r.monotone ? 1 : 0)};
}

Outcome complexity() {
  const BenchSummary s = summarize_bench(bench_tso(BenchGrid{}));
  const bool pass = std::abs(s.naive_slope - 1.0) <= 0.25 && std::abs(s.fast_slope - 1.0) <= 0.35 && s.ratio_at_max <= 0.2;
  return {pass, fmt("naive slope vs eta %.3f (1 +- 0.25), fast slope vs log2 eta %.3f (1 +- 0.35), ratio at 1024 %.4f (<= 0.2)",
                    s.naive_slope, s.fast_slope, s.ratio_at_max)};
}

Outcome orderless() {
  PipelineConfig cfg;
  cfg.split = SplitConfig::parse("2:1:1");
  cfg.heads = 2;
  Rng rng(1007);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const EpisodeBatch e = synth_episode(seed, 3, 2, 8, 6, 4.0);
    const PipelineWeights w = PipelineWeights::seeded(8, seed);
    EpisodeBatch p = e;
    // One spatial permutation of the support grid, applied to every support crop.
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(e.supports.front().cols()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& s : p.supports) {
      const Eigen::MatrixXd copy = s;
      for (Eigen::Index j = 0; j < s.cols(); ++j) s.col(j) = copy.col(perm[static_cast<std::size_t>(j)]);
    }
    const EpisodeOutput a = forward_episode(e, cfg, w);
    const EpisodeOutput b = forward_episode(p, cfg, w);
    for (std::size_t z = 0; z < a.support_hops.size(); ++z) worst = std::max(worst, max_diff(a.support_hops[z], b.support_hops[z]));
    worst = std::max(worst, max_diff(a.rpn_map, b.rpn_map));
    worst = std::max(worst, max_diff(a.zshot, b.zshot));
    for (std::size_t r = 0; r < a.relations.size(); ++r) {
      worst = std::max(worst, max_diff(a.roi_hops[r], b.roi_hops[r]));
      worst = std::max(worst, max_diff(a.relations[r].fo_ho, b.relations[r].fo_ho));
      worst = std::max(worst, max_diff(a.relations[r].combined.bottomRows(8), b.relations[r].combined.bottomRows(8)));
    }
  }
  return {worst <= 1e-10, fmt("50 episodes, HOP/RPN/Z-shot/FO-HO outputs max change %.2e (<= 1e-10)", worst)};
}

Outcome attention_checks() {
  Rng rng(1008);
  double rows = 0.0, diag = 0.0, single = 0.0, perm = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Eigen::MatrixXd q = testing::gaussian(8, 5, rng);
    const Eigen::MatrixXd k = testing::gaussian(8, 7, rng);
    const Eigen::MatrixXd v = testing::gaussian(8, 7, rng);
    const Eigen::MatrixXd w = attention_weights(q, k, AttentionKind::softmax, 0.5);
    rows = std::max(rows, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
    const Eigen::MatrixXd self = attention_weights(k, k, AttentionKind::rbf, 0.5);
    diag = std::max(diag, (self.diagonal().array() - 1.0).abs().maxCoeff());

    std::vector<Eigen::Index> order(7);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd kp(8, 7), vp(8, 7);
    for (Eigen::Index j = 0; j < 7; ++j) {
      kp.col(j) = k.col(order[static_cast<std::size_t>(j)]);
      vp.col(j) = v.col(order[static_cast<std::size_t>(j)]);
    }
    for (auto kind : {AttentionKind::softmax, AttentionKind::rbf}) {
      single = std::max(single, max_diff(multi_head({q, k, v, 0.5, 1}, kind), attention({q, k, v, 0.5, 1}, kind)));
      perm = std::max(perm, max_diff(multi_head({q, k, v, 0.5, 4}, kind), multi_head({q, kp, vp, 0.5, 4}, kind)));
    }
  }
  const bool pass = rows <= 1e-12 && diag == 0.0 && single <= 1e-14 && perm <= 1e-12;
  return {pass, fmt("softmax row sums %.1e (<= 1e-12), RBF diagonal %.1e (= 0), T=1 %.1e (<= 1e-14), permutation %.1e (<= 1e-12)",
                    rows, diag, single, perm)};
}

Outcome gradients() {
  double sig = 0.0, mx = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double p = -0.05 + 0.1 * i / 19.0;
    const VectorFunction f = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, sigme(x[0], 200.0)); };
    const double fd = numerical_jacobian(f, Eigen::VectorXd::Constant(1, p)).jacobian(0, 0);
    const double an = 100.0 / std::pow(std::cosh(100.0 * p), 2);
    sig = std::max(sig, std::abs(fd - an) / std::abs(an));

    const double lambda = 0.04 * (i + 1);
    const int eta = i % 2 == 0 ? 2 : 7;
    const VectorFunction g = [eta](const Eigen::VectorXd& x) {
      return Eigen::VectorXd::Constant(1, maxexp_scalar(x[0], eta));
    };
    const double fd2 = numerical_jacobian(g, Eigen::VectorXd::Constant(1, lambda)).jacobian(0, 0);
    const double an2 = eta * std::pow(1.0 - lambda, eta - 1);
    mx = std::max(mx, std::abs(fd2 - an2) / std::abs(an2));
  }

  Rng rng(1009);
  const Eigen::MatrixXd map = testing::gaussian(8, 5, rng);
  const VectorFunction hop = [](const Eigen::VectorXd& x) {
    return hop_unit(Eigen::Map<const Eigen::MatrixXd>(x.data(), 8, 5), SplitConfig::parse("2:1:1"), TsoParams{});
  };
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(map.data(), map.size());
  const JacobianResult coarse = numerical_jacobian(hop, x, 1e-5);
  const JacobianResult fine = numerical_jacobian(hop, x, 1e-6);
  const double halving = max_diff(coarse.jacobian, fine.jacobian) / std::max(1.0, fine.jacobian.cwiseAbs().maxCoeff());
  const bool pass = sig <= 1e-5 && mx <= 1e-5 && coarse.finite && fine.finite && halving <= 1e-3;
  return {pass, fmt("20 probes: sigme rel %.2e, maxexp_scalar rel %.2e (<= 1e-5); hop_unit step 1e-5 vs 1e-6 %.2e (<= 1e-3)",
                    sig, mx, halving)};
}

Outcome separation() {
  PipelineConfig cfg;
  std::size_t hits = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const EpisodeBatch e = synth_episode(seed, 5, 4, 48, 32, 10.0);
    const EpisodeOutput out = forward_episode(e, cfg, PipelineWeights::seeded(48, seed));
    for (bool hit : matched_class_first(e, out, cfg.sigma)) {
      hits += hit ? 1 : 0;
      ++total;
    }
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(total);
  return {rate >= 0.95, fmt("100 seeds, Z=5 B=4 d=48 N=32: matched class first for %.0f/%.0f RoIs = %.3f (>= 0.95)",
                            static_cast<double>(hits), static_cast<double>(total), rate)};
}

}  // namespace

int main() {
  report(1, "kernel linearization identity", 5, kernel_linearization);
  report(2, "TSO fast vs naive", 30, tso_correctness);
  report(3, "spectral oracle", 0, spectral_oracle);
  report(4, "theorem 1 minimizer", 60, theorem1);
  report(5, "theorem 2 limit", 1, theorem2);
  report(6, "complexity slopes", 0, complexity);
  report(7, "orderless invariance end-to-end", 0, orderless);
  report(8, "attention correctness", 0, attention_checks);
  report(9, "gradient sanity", 0, gradients);
  report(10, "separation smoke test", 0, separation);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
