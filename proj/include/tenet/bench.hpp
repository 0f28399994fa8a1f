#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tenet {

enum class BenchAlgorithm { naive, fast };

const char* to_string(BenchAlgorithm a);

struct BenchRecord {
  std::string op;
  int r = 2;
  int d = 0;
  int eta = 1;
  BenchAlgorithm algorithm = BenchAlgorithm::fast;
  double wall_time_ns = 0.0;  ///< median over the timed runs
  std::size_t contraction_count = 0;
};

struct BenchGrid {
  int r = 2;
  int d = 64;
  std::vector<int> etas{2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  int runs = 9;
  int warmup = 2;
  std::uint64_t seed = 1;
};

/// Times naive and fast shrinkage paths on one seeded trace-normalized input
/// per grid point, single threaded, steady clock. Throws std::logic_error if a
/// measured contraction count differs from the analytic one.
std::vector<BenchRecord> bench_tso(const BenchGrid& grid);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(y) = slope * log(x) + intercept.
SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

struct BenchSummary {
  double naive_slope = 0.0;  ///< log time vs log eta
  double fast_slope = 0.0;   ///< log time vs log log2(eta)
  double ratio_at_max = 0.0; ///< fast / naive at the largest eta
};

/// Expects records from bench_tso; etas <= 1 are ignored in the fits.
BenchSummary summarize_bench(const std::vector<BenchRecord>& records);

/// Header "op,r,d,eta,algorithm,wall_time_ns,contraction_count".
void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

}  // namespace tenet
