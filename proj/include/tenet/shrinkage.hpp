#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tenet/tso.hpp"

namespace tenet {

/// Spectrum lambda and exponent eta together with the quantities that make
/// 1 - (1 - lambda)^eta the minimizer of a KL divergence between complement
/// distributions plus a Tsallis-entropy penalty:
///
///   s = d - 1,  t = d - sum_i (1 - (1 - lambda_i)^eta) = sum_i (1 - lambda_i)^eta,
///   alpha = 1 / eta,  delta = eta t^(1/eta) (1 - 1/eta) / s.
struct ShrinkageProblem {
  std::vector<double> lambda;
  int eta = 2;
  double s = 0.0;
  double t = 0.0;
  double t_prime = 0.0;
  double alpha = 0.0;
  double delta = 0.0;

  /// Entries equal to 1 are clamped to 1 - 1e-9 before complements are taken.
  static ShrinkageProblem make(const SpectrumVector& lambda, int eta);

  std::size_t dim() const { return lambda.size(); }
  /// lambda°_i = (1 - lambda_i) / s.
  std::vector<double> source_complement() const;
};

/// f(lambda, lambda') = D_KL(lambda° || lambda°') + delta / (alpha - 1) (1 - sum (lambda°'_i)^alpha)
/// with lambda°' = (1 - lambda') / t. Throws std::domain_error unless every
/// lambda'_i lies in [0, 1).
double objective(const ShrinkageProblem& prob, std::span<const double> candidate);

/// Same objective parameterized by the raw complements 1 - lambda'_i, which
/// keeps full relative precision when lambda'_i is close to 1.
double objective_from_complement(const ShrinkageProblem& prob, std::span<const double> complement);

/// Analytic partial derivatives d f / d lambda'_i.
std::vector<double> objective_gradient(const ShrinkageProblem& prob, std::span<const double> candidate);
std::vector<double> objective_gradient_from_complement(const ShrinkageProblem& prob,
                                                       std::span<const double> complement);

/// lambda'_i = 1 - t (eta / (delta s))^eta (1 - 1/eta)^eta (1 - lambda_i)^eta.
std::vector<double> closed_form_minimizer(const ShrinkageProblem& prob);
/// 1 - lambda'_i of the closed form, evaluated without cancellation.
std::vector<double> closed_form_complement(const ShrinkageProblem& prob);

struct MinimizerOptions {
  int starts = 8;
  int max_iterations = 5000;
  double gradient_tolerance = 1e-12;
  std::uint64_t seed = 0x5eed;
};

/// Outcome of one logit-space BFGS run.
struct MinimizerResult {
  std::vector<double> minimizer;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Unconstrained BFGS over x = logit(lambda') from one start point.
MinimizerResult minimize_objective(const ShrinkageProblem& prob, std::span<const double> start_logits,
                                   const MinimizerOptions& options);

struct Theorem1Report {
  int d = 0;
  int eta = 0;
  std::vector<double> closed_form;
  std::vector<double> best_numerical;
  double distance_inf = 0.0;  ///< ||best numerical - closed form||_inf
  double stationarity = 0.0;  ///< max_i |d f / d lambda'_i| at the closed form
  double objective_gap = 0.0; ///< f(closed form) - min over numerical runs
  double trace_residual = 0.0; ///< |t recomputed from the closed form - t|
  double complement_sum_residual = 0.0;  ///< |sum lambda°'_i - 1| at the closed form
  int starts = 0;
  int converged_starts = 0;
  bool converged = false;  ///< false if any start exhausted its budget
  double wall_time_ms = 0.0;
};

Theorem1Report verify_theorem1(const ShrinkageProblem& prob, const MinimizerOptions& options = {});

struct Theorem2Report {
  int d = 0;
  int trials = 0;
  std::vector<int> etas;            ///< 2, 4, ..., 2^20
  std::vector<double> deviation;    ///< max over trials of ||maxexp_f(m, eta) - I||_inf
  bool monotone = false;
  double final_deviation = 0.0;
  double orthogonality_residual = 0.0;  ///< max ||U U^T - I||_inf over trials
  double wall_time_ms = 0.0;
};

/// Random full-rank PSD trace-normalized matrices pushed through maxexp_f for
/// eta = 2 .. 2^20 by doubling.
Theorem2Report verify_theorem2(int d, int trials, std::uint64_t seed = 0x7e02);

/// Random full-rank trace-normalized PSD matrix with eigenvalues drawn from
/// [min_eig, 1] before normalization.
Eigen::MatrixXd random_trace_normalized_psd(int d, std::uint64_t seed, double min_eig = 0.05);

/// Lines of "d,eta,residual,stationarity,wall_time_ms".
void write_theorem_csv_header(std::ostream& out);
void write_theorem_csv(std::ostream& out, const Theorem1Report& r);
void write_theorem_csv(std::ostream& out, const Theorem2Report& r);
void write_theorem_text(std::ostream& out, const Theorem1Report& r);
void write_theorem_text(std::ostream& out, const Theorem2Report& r);

}  // namespace tenet
