#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tenet/tensor.hpp"

namespace tenet {

/// Raised when an odd-order shrinkage is requested with an exponent that is
/// not a power of three. Carries the closest admissible exponent.
class InvalidOddEta : public std::invalid_argument {
 public:
  InvalidOddEta(int requested, int nearest);
  int requested() const noexcept { return requested_; }
  int nearest() const noexcept { return nearest_; }

 private:
  int requested_;
  int nearest_;
};

bool is_power_of_three(int eta);
/// Closest power of three to eta (ties go to the larger one): 7 -> 9, 6 -> 9.
int nearest_power_of_three(int eta);

/// Non-negative spectrum, optionally l1-normalized as lambda_i / (eps + sum lambda).
struct SpectrumVector {
  std::vector<double> values;
  bool normalized = false;

  static SpectrumVector normalize(std::vector<double> raw);
};

/// Exponents of the shrinkage operator per order and the SigmE slope.
struct TsoParams {
  int eta2 = 7;
  int eta3 = 9;
  int eta4 = 7;
  double eta_prime = 200.0;

  int eta_for(std::size_t order) const;
  /// Throws if an exponent is < 1, eta3 is not a power of 3 or eta_prime < 1.
  void validate() const;

  /// Flat "key=value" lines: eta2, eta3, eta4, eta_prime.
  std::string to_config() const;
  static TsoParams from_config(const std::string& text);
};

/// Outcome of requesting an odd-order exponent under the rounding policy.
struct EtaChoice {
  int requested = 1;
  int used = 1;
  bool substituted() const { return requested != used; }
};

/// With round_odd_eta, maps eta to the nearest power of three; otherwise
/// throws InvalidOddEta for exponents that are not powers of three.
EtaChoice resolve_odd_eta(int eta, bool round_odd_eta);

/// 1 - (1 - lambda)^eta for lambda in [0, 1].
double maxexp_scalar(double lambda, int eta);

/// I - (I - M)^eta for a symmetric PSD matrix with trace in (0, 1].
Eigen::MatrixXd maxexp_f(const Eigen::MatrixXd& m, int eta);

/// Tensor plus the number of tensor contractions spent computing it.
struct TsoRun {
  DenseTensor tensor;
  std::size_t contractions = 0;
};

/// I_r - (I_r - T)^eta. Even orders use exponentiation by squaring; odd
/// orders use the alternating triple chain and need eta = 3^k.
DenseTensor tso(const DenseTensor& t, int eta);

/// Even order, exponentiation by squaring on floor(log2 eta) + popcount(eta) - 1
/// contractions over r/2 modes.
TsoRun tso_fast_even(const DenseTensor& t, int eta);

/// Odd order, eta = 3^k: k steps of A <- (A x_{floor(r/2)} A) x_{ceil(r/2)} A.
TsoRun tso_fast_odd(const DenseTensor& t, int eta);

/// Reference paths: eta - 1 successive contractions for even orders, the
/// step-by-step triple chain for odd orders.
TsoRun tso_naive(const DenseTensor& t, int eta);

/// Analytic contraction count of tso_fast_even.
std::size_t fast_even_contraction_count(int eta);

/// 2 / (1 + exp(-eta_prime * p)) - 1.
double sigme(double p, double eta_prime);

/// SigmE(diag(tso(t, eta_r)); eta_prime).
std::vector<double> extract_representation(const DenseTensor& t, const TsoParams& params);

/// diag(M^{1/2}) through an eigendecomposition.
std::vector<double> sqrtm_diag_approx(const Eigen::MatrixXd& m);

/// Checks a tensor for super-symmetry. Below 1e-10 it is returned as is,
/// up to 1e-6 it is symmetrized, beyond that std::domain_error is thrown.
DenseTensor enforce_symmetry(const DenseTensor& t);

}  // namespace tenet
