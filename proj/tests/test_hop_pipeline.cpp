#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"

#include "helpers.hpp"
#include "oracles.hpp"
#include "tenet/hop_pipeline.hpp"

using namespace tenet;

namespace {

// Descriptor, shrinkage and diagonal for one channel group, using only the
// plain-loop oracle.
std::vector<double> group_oracle(const Eigen::MatrixXd& rows, std::size_t order, int eta, double eta_prime) {
  const auto cols = testing::columns(rows);
  oracle::Tensor t = oracle::hotd(cols, order);
  double norm = 0.0;
  for (const auto& c : cols) norm += std::pow(std::sqrt(oracle::dot(c, c)), static_cast<double>(order));
  norm = 1e-6 + norm / static_cast<double>(cols.size());
  for (double& v : t.a) v /= norm;

  const oracle::Tensor identity = oracle::identity(t.dim, order);
  const oracle::Tensor base = oracle::minus(identity, t);
  oracle::Tensor power = base;
  if (order % 2 == 0) {
    for (int i = 1; i < eta; ++i) power = oracle::contract(power, base, order / 2);
  } else {
    for (int n = eta / 3; n > 0; n /= 3) {
      power = oracle::contract(oracle::contract(power, power, order / 2), power, order - order / 2);
    }
  }
  const oracle::Tensor out = oracle::minus(identity, power);

  std::vector<double> diag(t.dim);
  std::size_t stride = 0;
  for (std::size_t k = 0; k < order; ++k) stride = stride * t.dim + 1;
  for (std::size_t i = 0; i < t.dim; ++i) {
    diag[i] = 2.0 / (1.0 + std::exp(-eta_prime * out.a[i * stride])) - 1.0;
  }
  return diag;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.split = SplitConfig::parse("2:1:1");
  cfg.heads = 2;
  return cfg;
}

double max_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("split configuration") {
  CHECK(SplitConfig{}.channel_counts(16) == std::array<std::size_t, 3>{10, 4, 2});
  CHECK(SplitConfig::parse("2:1:1").channel_counts(8) == std::array<std::size_t, 3>{4, 2, 2});
  CHECK(SplitConfig{}.channel_counts(48) == std::array<std::size_t, 3>{30, 12, 6});
  // 5*20/8 = 12, 2*20/8 = 5, 1*20/8 = 2; the remainder 1 goes to order 2.
  CHECK(SplitConfig{}.channel_counts(20) == std::array<std::size_t, 3>{13, 5, 2});
  CHECK(SplitConfig::parse("5:2:1").to_string() == "5:2:1");
  CHECK_THROWS_AS(SplitConfig{}.channel_counts(8), std::invalid_argument);
  CHECK_THROWS_AS(SplitConfig::parse("5:2"), std::invalid_argument);
  CHECK_THROWS_AS(SplitConfig::parse("5:2:1:1"), std::invalid_argument);
  CHECK_THROWS_AS(SplitConfig::parse("5:0:1"), std::invalid_argument);
  CHECK_THROWS_AS(SplitConfig::parse("5:x:1"), std::invalid_argument);
  CHECK_THROWS_AS(SplitConfig::parse("5:2.5:1"), std::invalid_argument);
}

TEST_CASE("hop unit on a 2:1:1 split") {
  std::mt19937_64 rng(71);
  const Eigen::VectorXd out = hop_unit(testing::gaussian(8, 5, rng), SplitConfig::parse("2:1:1"), TsoParams{});
  CHECK(out.size() == 8);
  CHECK(out.allFinite());
  CHECK(out.cwiseAbs().maxCoeff() <= 1.0);

  const Eigen::VectorXd zero = hop_unit(Eigen::MatrixXd::Zero(8, 5), SplitConfig::parse("2:1:1"), TsoParams{});
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(hop_unit(testing::gaussian(5, 5, rng), SplitConfig::parse("2:1:1"), TsoParams{}), std::invalid_argument);
}

TEST_CASE("hop unit matches the per-group oracle") {
  std::mt19937_64 rng(72);
  const Eigen::MatrixXd map = testing::gaussian(16, 6, rng);
  for (double eta_prime : {200.0, 1.0}) {
    TsoParams p;
    p.eta_prime = eta_prime;
    const Eigen::VectorXd got = hop_unit(map, SplitConfig{}, p);
    const std::array<Eigen::Index, 3> begin{0, 10, 14}, width{10, 4, 2};
    const std::array<int, 3> eta{7, 9, 7};
    for (std::size_t g = 0; g < 3; ++g) {
      const auto expected = group_oracle(map.middleRows(begin[g], width[g]), g + 2, eta[g], eta_prime);
      for (Eigen::Index i = 0; i < width[g]; ++i) {
        CHECK(std::abs(got[begin[g] + i] - expected[static_cast<std::size_t>(i)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("hop unit groups are independent") {
  std::mt19937_64 rng(73);
  const Eigen::MatrixXd map = testing::gaussian(16, 6, rng);
  TsoParams p;
  p.eta_prime = 1.0;
  const Eigen::VectorXd base = hop_unit(map, SplitConfig{}, p);
  Eigen::MatrixXd other = map;
  other.topRows(10).setZero();
  const Eigen::VectorXd changed = hop_unit(other, SplitConfig{}, p);
  CHECK(changed.tail(6) == base.tail(6));
  CHECK(changed.head(10).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd shuffled = map;
  shuffled.middleRows(10, 4) = testing::gaussian(4, 6, rng);
  const Eigen::VectorXd mixed = hop_unit(shuffled, SplitConfig{}, p);
  CHECK(mixed.head(10) == base.head(10));
  CHECK(mixed.tail(2) == base.tail(2));
}

TEST_CASE("rpn attention") {
  std::mt19937_64 rng(74);
  const Eigen::MatrixXd query = testing::gaussian(4, 2, rng);
  const std::vector<Eigen::VectorXd> supports{testing::gaussian(4, 1, rng).col(0), testing::gaussian(4, 1, rng).col(0)};
  const Eigen::MatrixXd out = tenet_rpn_attend(supports, query, 1, 0.5);
  REQUIRE(out.rows() == 4);
  REQUIRE(out.cols() == 2);
  const auto keys = testing::columns(Eigen::MatrixXd((Eigen::MatrixXd(4, 2) << supports[0], supports[1]).finished()));
  const auto expected = oracle::rbf_attention(testing::columns(query), keys, keys, 0.5);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(std::abs(out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) - expected[j][c]) <= 1e-12);
    }
  }

  const std::vector<Eigen::VectorXd> one{supports[0]};
  const Eigen::MatrixXd single = tenet_rpn_attend(one, query, 1, 0.5);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double ratio = single(0, j) / supports[0][0];
    CHECK((single.col(j) - ratio * supports[0]).cwiseAbs().maxCoeff() <= 1e-14);
  }

  std::vector<Eigen::VectorXd> three{testing::gaussian(4, 1, rng).col(0), testing::gaussian(4, 1, rng).col(0),
                                     testing::gaussian(4, 1, rng).col(0)};
  const Eigen::MatrixXd a = tenet_rpn_attend(three, query, 2, 0.5);
  std::swap(three[0], three[1]);
  std::swap(three[1], three[2]);
  CHECK(max_diff(tenet_rpn_attend(three, query, 2, 0.5), a) <= 1e-12);
  CHECK_THROWS_AS(tenet_rpn_attend(std::vector<Eigen::VectorXd>{}, query, 1, 0.5), std::invalid_argument);
}

TEST_CASE("forward episode shapes") {
  const EpisodeBatch e = synth_episode(3, 5, 3, 8, 9, 4.0);
  const PipelineWeights w = PipelineWeights::seeded(8, 1);
  const EpisodeOutput out = forward_episode(e, small_config(), w);
  REQUIRE(out.support_hops.size() == 5);
  REQUIRE(out.roi_hops.size() == 3);
  REQUIRE(out.relations.size() == 3);
  CHECK(out.rpn_map.rows() == 8);
  CHECK(out.rpn_map.cols() == 27);
  CHECK(out.zshot.rows() == 3);
  CHECK(out.zshot.cols() == 16);
  CHECK(out.support_tokens.tokens.rows() == 8);
  CHECK(out.support_tokens.tokens.cols() == 11);
  for (const auto& r : out.relations) {
    CHECK(r.spatial.rows() == 8);
    CHECK(r.spatial.cols() == 9);
    CHECK(r.fo_ho.size() == 16);
    CHECK(r.combined.rows() == 16);
    CHECK(r.combined.cols() == 9);
    CHECK(r.combined.allFinite());
  }
  CHECK(out.zshot.allFinite());
  CHECK(out.rpn_map.allFinite());
}

TEST_CASE("forward episode on a self-matching RoI") {
  std::mt19937_64 rng(75);
  EpisodeBatch e;
  e.supports.push_back(testing::gaussian(8, 6, rng));
  e.query = e.supports.front();
  e.boxes.push_back({0, 6});
  const EpisodeOutput out = forward_episode(e, small_config(), PipelineWeights::seeded(8, 2));
  CHECK(out.relations[0].spatial.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd fo = out.roi_tokens[0].first_order();
  const Eigen::VectorXd ho = out.roi_tokens[0].high_order();
  CHECK((out.relations[0].fo_ho.head(8) - fo.cwiseProduct(fo)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((out.relations[0].fo_ho.tail(8) - ho.cwiseProduct(ho)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(out.roi_hops[0] == out.support_hops[0]);
}

namespace {

Eigen::MatrixXd permute_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& perm) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = m.col(perm[static_cast<std::size_t>(j)]);
  return out;
}

std::vector<Eigen::Index> random_perm(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace

TEST_CASE("forward episode ignores the column order of support crops") {
  const EpisodeBatch e = synth_episode(11, 3, 2, 8, 7, 4.0);
  const PipelineWeights w = PipelineWeights::seeded(8, 3);
  const EpisodeOutput a = forward_episode(e, small_config(), w);
  std::mt19937_64 rng(76);

  SUBCASE("each support shuffled on its own") {
    EpisodeBatch shuffled = e;
    for (auto& s : shuffled.supports) s = permute_columns(s, random_perm(s.cols(), rng));
    const EpisodeOutput b = forward_episode(shuffled, small_config(), w);
    for (std::size_t z = 0; z < 3; ++z) CHECK(max_diff(a.support_hops[z], b.support_hops[z]) <= 1e-10);
    CHECK(max_diff(a.rpn_map, b.rpn_map) <= 1e-10);
    CHECK(max_diff(a.zshot, b.zshot) <= 1e-10);
  }

  SUBCASE("one spatial permutation shared by all supports") {
    EpisodeBatch shuffled = e;
    const auto perm = random_perm(7, rng);
    for (auto& s : shuffled.supports) s = permute_columns(s, perm);
    const EpisodeOutput b = forward_episode(shuffled, small_config(), w);
    for (std::size_t z = 0; z < 3; ++z) CHECK(max_diff(a.support_hops[z], b.support_hops[z]) <= 1e-10);
    CHECK(max_diff(a.rpn_map, b.rpn_map) <= 1e-10);
    CHECK(max_diff(a.zshot, b.zshot) <= 1e-10);
    CHECK(max_diff(a.support_tokens.first_order(), b.support_tokens.first_order()) <= 1e-10);
    CHECK(max_diff(a.support_tokens.high_order(), b.support_tokens.high_order()) <= 1e-10);
    CHECK(max_diff(permute_columns(Eigen::MatrixXd(a.support_tokens.spatial()), perm),
                   Eigen::MatrixXd(b.support_tokens.spatial())) <= 1e-10);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(max_diff(a.relations[r].fo_ho, b.relations[r].fo_ho) <= 1e-10);
      CHECK(max_diff(a.relations[r].combined.bottomRows(8), b.relations[r].combined.bottomRows(8)) <= 1e-10);
    }
  }
}

TEST_CASE("forward episode is independent of the thread count") {
  const EpisodeBatch e = synth_episode(12, 4, 6, 8, 5, 4.0);
  const PipelineWeights w = PipelineWeights::seeded(8, 4);
  PipelineConfig one = small_config();
  one.threads = 1;
  PipelineConfig four = small_config();
  four.threads = 4;
  MatrixBundle a, b;
  forward_episode(e, one, w).store(a);
  forward_episode(e, four, w).store(b);
  CHECK(a == b);
  MatrixBundle again;
  forward_episode(e, four, w).store(again);
  CHECK(again == b);
}

TEST_CASE("forward episode validation") {
  EpisodeBatch e = synth_episode(13, 2, 2, 8, 4, 4.0);
  const PipelineWeights w = PipelineWeights::seeded(8, 5);
  EpisodeBatch wide = e;
  wide.boxes[1] = {2, 8};
  CHECK_THROWS_AS(forward_episode(wide, small_config(), w), std::invalid_argument);
  EpisodeBatch outside = e;
  outside.boxes[1] = {6, 10};
  CHECK_THROWS_AS(forward_episode(outside, small_config(), w), std::invalid_argument);
  EpisodeBatch none = e;
  none.boxes.clear();
  CHECK_THROWS_AS(forward_episode(none, small_config(), w), std::invalid_argument);
  CHECK_THROWS_AS(forward_episode(e, small_config(), PipelineWeights::seeded(6, 5)), std::invalid_argument);
}

TEST_CASE("numerical jacobians") {
  const VectorFunction sig = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, sigme(x[0], 200.0));
  };
  CHECK(std::abs(numerical_jacobian(sig, Eigen::VectorXd::Zero(1)).jacobian(0, 0) - 100.0) <= 1e-3);

  const VectorFunction mx = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, maxexp_scalar(x[0], 2));
  };
  CHECK(std::abs(numerical_jacobian(mx, Eigen::VectorXd::Constant(1, 0.5)).jacobian(0, 0) - 1.0) <= 1e-5);

  std::mt19937_64 rng(77);
  const Eigen::MatrixXd map = testing::gaussian(8, 5, rng);
  const VectorFunction hop = [&](const Eigen::VectorXd& x) {
    return hop_unit(Eigen::Map<const Eigen::MatrixXd>(x.data(), 8, 5), SplitConfig::parse("2:1:1"), TsoParams{});
  };
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(map.data(), map.size());
  const JacobianResult coarse = numerical_jacobian(hop, x, 1e-5);
  const JacobianResult fine = numerical_jacobian(hop, x, 1e-6);
  CHECK(coarse.finite);
  CHECK(fine.finite);
  CHECK(coarse.jacobian.rows() == 8);
  CHECK(coarse.jacobian.cols() == 40);
  const double scale = std::max(1.0, fine.jacobian.cwiseAbs().maxCoeff());
  CHECK(max_diff(coarse.jacobian, fine.jacobian) / scale <= 1e-3);

  const VectorFunction root = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, std::sqrt(x[0]));
  };
  CHECK_FALSE(numerical_jacobian(root, Eigen::VectorXd::Zero(1)).finite);
  CHECK_THROWS_AS(numerical_jacobian(sig, Eigen::VectorXd::Zero(1), 0.0), std::invalid_argument);
}

TEST_CASE("synthetic episodes") {
  const EpisodeBatch a = synth_episode(21, 3, 4, 6, 5, 10.0);
  const EpisodeBatch b = synth_episode(21, 3, 4, 6, 5, 10.0);
  MatrixBundle ba, bb;
  a.store(ba);
  b.store(bb);
  CHECK(ba == bb);
  CHECK(a.query.cols() == 20);
  CHECK(a.support_classes == std::vector<int>{0, 1, 2});
  CHECK(a.roi_classes.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) CHECK(a.boxes[r].size() == 5);
  MatrixBundle other;
  synth_episode(22, 3, 4, 6, 5, 10.0).store(other);
  CHECK_FALSE(other == ba);

  // Without separation every entry is N(0, 1): support and query means agree within 3 sigma.
  const EpisodeBatch flat = synth_episode(23, 4, 4, 8, 16, 0.0);
  double support_sum = 0.0;
  double support_count = 0.0;
  for (const auto& s : flat.supports) {
    support_sum += s.sum();
    support_count += static_cast<double>(s.size());
  }
  const double query_count = static_cast<double>(flat.query.size());
  const double gap = std::abs(support_sum / support_count - flat.query.sum() / query_count);
  CHECK(gap <= 3.0 * std::sqrt(1.0 / support_count + 1.0 / query_count));

  CHECK_THROWS_AS(synth_episode(1, 0, 1, 4, 4, 1.0), std::invalid_argument);
}

TEST_CASE("matched class ranks first at separation 10") {
  PipelineConfig cfg;
  cfg.threads = 1;
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const EpisodeBatch e = synth_episode(seed, 5, 4, 48, 32, 10.0);
    const EpisodeOutput out = forward_episode(e, cfg, PipelineWeights::seeded(48, seed));
    for (bool hit : matched_class_first(e, out, cfg.sigma)) {
      hits += hit ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(hits) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("episode bundles round trip") {
  const EpisodeBatch e = synth_episode(31, 2, 3, 8, 4, 5.0);
  MatrixBundle bundle;
  e.store(bundle);
  std::stringstream buf;
  write_bundle(buf, bundle);
  const EpisodeBatch back = EpisodeBatch::load(read_bundle(buf));
  REQUIRE(back.supports.size() == 2);
  CHECK(back.supports[1] == e.supports[1]);
  CHECK(back.query == e.query);
  CHECK(back.boxes[2].begin == 8);
  CHECK(back.boxes[2].end == 12);
  CHECK(back.roi_classes == e.roi_classes);

  MatrixBundle bad = bundle;
  RowMatrix boxes = bundle.get("boxes");
  boxes(0, 1) = 3.5;
  bad.put("boxes", boxes);
  CHECK_THROWS_AS(EpisodeBatch::load(bad), std::invalid_argument);

  const EpisodeOutput out = forward_episode(e, small_config(), PipelineWeights::seeded(8, 6));
  MatrixBundle dump;
  out.store(dump);
  CHECK(dump.find("out/zshot").has_value());
  CHECK(dump.find("out/relation/2/combined").has_value());
  CHECK(dump.get("out/support_hop/1").size() == 8);
}
