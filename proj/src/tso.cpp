#include "tenet/tso.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "tenet/descriptors.hpp"
#include "tenet/errors.hpp"

namespace tenet {
namespace {

constexpr double kSymmetricTol = 1e-10;
constexpr double kSymmetrizeLimit = 1e-6;
constexpr double kPsdTol = 1e-8;
constexpr double kUnitTol = 1e-12;

void require_eta(int eta) {
  if (eta < 1) throw std::invalid_argument("eta must be a positive integer, got " + std::to_string(eta));
}

Eigen::MatrixXd to_matrix(const DenseTensor& t) { return Eigen::MatrixXd(t.as_matrix(1)); }

DenseTensor from_matrix(const Eigen::MatrixXd& m) {
  const RowMatrix rm = m;
  return {2, static_cast<std::size_t>(m.rows()),
          std::vector<double>(rm.data(), rm.data() + rm.size())};
}

void require_symmetric_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetricTol) {
    throw std::invalid_argument("matrix is not symmetric");
  }
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

InvalidOddEta::InvalidOddEta(int requested, int nearest)
    : std::invalid_argument("odd-order eta must be a power of 3, got " + std::to_string(requested) +
                            " (nearest valid: " + std::to_string(nearest) + ")"),
      requested_(requested),
      nearest_(nearest) {}

bool is_power_of_three(int eta) {
  if (eta < 1) return false;
  while (eta % 3 == 0) eta /= 3;
  return eta == 1;
}

int nearest_power_of_three(int eta) {
  if (eta <= 1) return 1;
  int lo = 1;
  while (lo * 3 <= eta) lo *= 3;
  const int hi = lo * 3;
  return (eta - lo < hi - eta) ? lo : hi;
}

SpectrumVector SpectrumVector::normalize(std::vector<double> raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (v < -kUnitTol) throw std::domain_error("spectrum has a negative entry");
    sum += std::max(v, 0.0);
  }
  for (double& v : raw) v = std::max(v, 0.0) / (kNormEpsilon + sum);
  return {std::move(raw), true};
}

int TsoParams::eta_for(std::size_t order) const {
  switch (order) {
    case 2: return eta2;
    case 3: return eta3;
    case 4: return eta4;
    default: throw std::invalid_argument("no exponent configured for order " + std::to_string(order));
  }
}

void TsoParams::validate() const {
  require_eta(eta2);
  require_eta(eta3);
  require_eta(eta4);
  if (!is_power_of_three(eta3)) throw InvalidOddEta(eta3, nearest_power_of_three(eta3));
  if (!(eta_prime >= 1.0) || !std::isfinite(eta_prime)) {
    throw std::invalid_argument("eta_prime must be a finite value >= 1");
  }
}

std::string TsoParams::to_config() const {
  std::ostringstream out;
  out.precision(17);
  out << "eta2=" << eta2 << "\neta3=" << eta3 << "\neta4=" << eta4 << "\neta_prime=" << eta_prime
      << "\n";
  return out.str();
}

TsoParams TsoParams::from_config(const std::string& text) {
  TsoParams p;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (key == "eta2") {
        p.eta2 = std::stoi(value, &used);
      } else if (key == "eta3") {
        p.eta3 = std::stoi(value, &used);
      } else if (key == "eta4") {
        p.eta4 = std::stoi(value, &used);
      } else if (key == "eta_prime") {
        p.eta_prime = std::stod(value, &used);
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
      if (used != value.size()) throw std::invalid_argument("bad value '" + value + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": value out of range");
    }
  }
  p.validate();
  return p;
}

EtaChoice resolve_odd_eta(int eta, bool round_odd_eta) {
  require_eta(eta);
  if (is_power_of_three(eta)) return {eta, eta};
  const int nearest = nearest_power_of_three(eta);
  if (!round_odd_eta) throw InvalidOddEta(eta, nearest);
  return {eta, nearest};
}

double maxexp_scalar(double lambda, int eta) {
  require_eta(eta);
  if (!(lambda >= -kUnitTol && lambda <= 1.0 + kUnitTol)) {
    throw std::domain_error("maxexp_scalar: lambda outside [0, 1]");
  }
  lambda = std::clamp(lambda, 0.0, 1.0);
  return 1.0 - std::pow(1.0 - lambda, eta);
}

Eigen::MatrixXd maxexp_f(const Eigen::MatrixXd& m, int eta) {
  require_symmetric_matrix(m);
  if (min_eigenvalue(m) < -kPsdTol) throw std::domain_error("maxexp_f: matrix is not PSD");
  if (m.trace() > 1.0 + 1e-9) throw std::domain_error("maxexp_f: trace exceeds 1");
  return to_matrix(tso_fast_even(from_matrix(m), eta).tensor);
}

DenseTensor enforce_symmetry(const DenseTensor& t) {
  const double asym = max_asymmetry(t);
  if (asym <= kSymmetricTol) return t;
  if (asym <= kSymmetrizeLimit) return symmetrize(t);
  throw std::domain_error("tensor is not super-symmetric (asymmetry " + std::to_string(asym) + ")");
}

std::size_t fast_even_contraction_count(int eta) {
  require_eta(eta);
  const auto n = static_cast<unsigned>(eta);
  return static_cast<std::size_t>(std::bit_width(n) - 1 + std::popcount(n) - 1);
}

TsoRun tso_fast_even(const DenseTensor& t, int eta) {
  require_eta(eta);
  if (t.order() % 2 != 0) throw std::invalid_argument("tso_fast_even: order must be even");
  check_capacity(t.order(), t.dim());
  const DenseTensor input = enforce_symmetry(t);
  if (eta == 1) return {input, 0};

  const std::size_t half = t.order() / 2;
  const DenseTensor identity = identity_tensor(t.dim(), t.order());
  DenseTensor square = subtract(identity, input);
  std::optional<DenseTensor> acc;
  std::size_t contractions = 0;
  for (unsigned n = static_cast<unsigned>(eta); n != 0;) {
    if (n & 1U) {
      if (acc) {
        acc = contract(*acc, square, half);
        ++contractions;
      } else {
        acc = square;
      }
      --n;
    }
    n /= 2;
    if (n > 0) {
      square = contract(square, square, half);
      ++contractions;
    }
  }
  return {subtract(identity, *acc), contractions};
}

TsoRun tso_fast_odd(const DenseTensor& t, int eta) {
  require_eta(eta);
  if (t.order() % 2 == 0) throw std::invalid_argument("tso_fast_odd: order must be odd");
  if (!is_power_of_three(eta)) throw InvalidOddEta(eta, nearest_power_of_three(eta));
  check_capacity(t.order(), t.dim());
  const DenseTensor input = enforce_symmetry(t);
  if (eta == 1) return {input, 0};

  const std::size_t lo = t.order() / 2;
  const std::size_t hi = t.order() - lo;
  const DenseTensor identity = identity_tensor(t.dim(), t.order());
  DenseTensor power = subtract(identity, input);
  std::size_t contractions = 0;
  for (int n = eta / 3; n > 0; n /= 3) {
    power = contract(contract(power, power, lo), power, hi);
    contractions += 2;
  }
  return {subtract(identity, power), contractions};
}

TsoRun tso_naive(const DenseTensor& t, int eta) {
  require_eta(eta);
  if (t.order() % 2 != 0) return tso_fast_odd(t, eta);
  check_capacity(t.order(), t.dim());
  const DenseTensor input = enforce_symmetry(t);
  if (eta == 1) return {input, 0};
  const std::size_t half = t.order() / 2;
  const DenseTensor identity = identity_tensor(t.dim(), t.order());
  const DenseTensor base = subtract(identity, input);
  DenseTensor power = base;
  for (int i = 1; i < eta; ++i) power = contract(power, base, half);
  return {subtract(identity, power), static_cast<std::size_t>(eta - 1)};
}

DenseTensor tso(const DenseTensor& t, int eta) {
  return t.order() % 2 == 0 ? tso_fast_even(t, eta).tensor : tso_fast_odd(t, eta).tensor;
}

double sigme(double p, double eta_prime) {
  // 2 / (1 + e^{-x}) - 1 == tanh(x / 2), which stays accurate near zero.
  return std::tanh(0.5 * eta_prime * p);
}

std::vector<double> extract_representation(const DenseTensor& t, const TsoParams& params) {
  std::vector<double> out = super_diagonal(tso(t, params.eta_for(t.order()))).values;
  for (double& v : out) v = sigme(v, params.eta_prime);
  return out;
}

std::vector<double> sqrtm_diag_approx(const Eigen::MatrixXd& m) {
  require_symmetric_matrix(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("sqrtm: eigensolver failed");
  if (es.eigenvalues().minCoeff() < -kPsdTol) throw std::domain_error("sqrtm: negative eigenvalue");
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& u = es.eigenvectors();
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = (u.row(i).array().square() * roots.transpose().array()).sum();
  }
  return out;
}

}  // namespace tenet
