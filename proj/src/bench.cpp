#include "tenet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include "tenet/descriptors.hpp"
#include "tenet/shrinkage.hpp"
#include "tenet/tensor.hpp"
#include "tenet/tso.hpp"

namespace tenet {
namespace {

DenseTensor bench_input(int r, int d, std::uint64_t seed) {
  if (r == 2) {
    const Eigen::MatrixXd m = random_trace_normalized_psd(d, seed);
    RowMatrix row = m;
    return DenseTensor(2, static_cast<std::size_t>(d),
                       std::vector<double>(row.data(), row.data() + row.size()));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(d, 2 * d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  const FeatureMatrix f(x);
  return normalize_descriptor(hotd(f, static_cast<std::size_t>(r)), f, static_cast<std::size_t>(r));
}

template <class Fn>
double median_ns(const BenchGrid& grid, Fn&& fn) {
  for (int i = 0; i < grid.warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(grid.runs));
  for (int i = 0; i < grid.runs; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count()));
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<long>(samples.size() / 2), samples.end());
  return std::max(1.0, samples[samples.size() / 2]);
}

std::size_t analytic_count(int r, int eta, BenchAlgorithm a) {
  if (r % 2 != 0) {
    std::size_t steps = 0;
    for (int n = eta; n > 1; n /= 3) ++steps;
    return 2 * steps;
  }
  return a == BenchAlgorithm::naive ? static_cast<std::size_t>(eta - 1) : fast_even_contraction_count(eta);
}

}  // namespace

const char* to_string(BenchAlgorithm a) { return a == BenchAlgorithm::naive ? "naive" : "fast"; }

std::vector<BenchRecord> bench_tso(const BenchGrid& grid) {
  if (grid.runs < 9) throw std::invalid_argument("bench_tso: at least 9 timed runs are required");
  check_capacity(static_cast<std::size_t>(grid.r), static_cast<std::size_t>(grid.d));
  const DenseTensor input = bench_input(grid.r, grid.d, grid.seed);
  std::vector<BenchRecord> out;
  for (int eta : grid.etas) {
    for (BenchAlgorithm a : {BenchAlgorithm::naive, BenchAlgorithm::fast}) {
      auto run = [&] {
        if (grid.r % 2 != 0) return tso_fast_odd(input, eta);
        return a == BenchAlgorithm::naive ? tso_naive(input, eta) : tso_fast_even(input, eta);
      };
      const std::size_t count = run().contractions;
      if (count != analytic_count(grid.r, eta, a)) {
        throw std::logic_error("bench_tso: contraction count mismatch at eta=" + std::to_string(eta));
      }
      BenchRecord rec;
      rec.op = "tso";
      rec.r = grid.r;
      rec.d = grid.d;
      rec.eta = eta;
      rec.algorithm = a;
      rec.contraction_count = count;
      rec.wall_time_ns = median_ns(grid, run);
      out.push_back(rec);
    }
  }
  return out;
}

SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_log_log: need >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("fit_log_log: values must be positive");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_log_log: x values are all equal");
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

BenchSummary summarize_bench(const std::vector<BenchRecord>& records) {
  std::vector<double> nx, ny, fx, fy;
  std::map<int, double> naive_at, fast_at;
  for (const auto& r : records) {
    if (r.eta <= 1) continue;
    if (r.algorithm == BenchAlgorithm::naive) {
      nx.push_back(r.eta);
      ny.push_back(r.wall_time_ns);
      naive_at[r.eta] = r.wall_time_ns;
    } else {
      fx.push_back(std::log2(static_cast<double>(r.eta)));
      fy.push_back(r.wall_time_ns);
      fast_at[r.eta] = r.wall_time_ns;
    }
  }
  BenchSummary s;
  s.naive_slope = fit_log_log(nx, ny).slope;
  s.fast_slope = fit_log_log(fx, fy).slope;
  const int top = naive_at.rbegin()->first;
  s.ratio_at_max = fast_at.at(top) / naive_at.at(top);
  return s;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << "op,r,d,eta,algorithm,wall_time_ns,contraction_count\n";
  for (const auto& r : records) {
    out << r.op << ',' << r.r << ',' << r.d << ',' << r.eta << ',' << to_string(r.algorithm) << ','
        << static_cast<long long>(r.wall_time_ns) << ',' << r.contraction_count << '\n';
  }
}

}  // namespace tenet
