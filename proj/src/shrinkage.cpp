#include "tenet/shrinkage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace tenet {
namespace {

constexpr double kClampBelowOne = 1.0 - 1e-9;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Penalty weight in d f / d c_i = -a_i / c_i + kappa c_i^(alpha - 1).
double kappa(const ShrinkageProblem& p) { return p.delta * p.alpha / (1.0 - p.alpha); }

void require_dim(const ShrinkageProblem& p, std::size_t n) {
  if (n != p.dim()) throw std::invalid_argument("candidate length does not match the spectrum");
}

std::vector<double> complement_of(std::span<const double> candidate) {
  std::vector<double> u(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const double v = candidate[i];
    if (!(v >= 0.0 && v < 1.0)) {
      throw std::domain_error("objective: candidate entries must lie in [0, 1)");
    }
    u[i] = 1.0 - v;
  }
  return u;
}

// Objective and logit-space gradient at x, where lambda' = logistic(x).
double value_and_logit_gradient(const ShrinkageProblem& p, const Eigen::VectorXd& x,
                                Eigen::VectorXd& grad) {
  const double k = kappa(p);
  const std::vector<double> a = p.source_complement();
  std::vector<double> u(p.dim());
  grad.resize(x.size());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    u[i] = logistic(-x[ii]);
    const double c = u[i] / p.t;
    grad[ii] = logistic(x[ii]) * (a[i] - k * std::pow(c, p.alpha));
  }
  for (double v : u) {
    if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
  }
  return objective_from_complement(p, u);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

ShrinkageProblem ShrinkageProblem::make(const SpectrumVector& spectrum, int eta) {
  const std::size_t d = spectrum.values.size();
  if (d < 2) throw std::invalid_argument("shrinkage problem needs d >= 2");
  if (eta < 2) throw std::invalid_argument("shrinkage problem needs eta >= 2");
  ShrinkageProblem p;
  p.eta = eta;
  p.lambda.reserve(d);
  for (double v : spectrum.values) {
    if (v < -1e-12 || v > 1.0 + 1e-12) throw std::domain_error("spectrum entries must lie in [0, 1]");
    p.lambda.push_back(std::clamp(v, 0.0, kClampBelowOne));
  }
  p.s = static_cast<double>(d) - 1.0;
  p.t = 0.0;
  for (double v : p.lambda) p.t += std::pow(1.0 - v, eta);
  p.t_prime = static_cast<double>(d) - p.t;
  p.alpha = 1.0 / static_cast<double>(eta);
  p.delta = static_cast<double>(eta) * std::pow(p.t, p.alpha) * (1.0 - p.alpha) / p.s;
  return p;
}

std::vector<double> ShrinkageProblem::source_complement() const {
  std::vector<double> a(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) a[i] = (1.0 - lambda[i]) / s;
  return a;
}

double objective_from_complement(const ShrinkageProblem& p, std::span<const double> complement) {
  require_dim(p, complement.size());
  const std::vector<double> a = p.source_complement();
  double kl = 0.0;
  double tsallis_sum = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (!(complement[i] > 0.0)) throw std::domain_error("objective: complement must be positive");
    const double c = complement[i] / p.t;
    kl += a[i] * (std::log(a[i]) - std::log(c));
    tsallis_sum += std::pow(c, p.alpha);
  }
  return kl + p.delta / (p.alpha - 1.0) * (1.0 - tsallis_sum);
}

double objective(const ShrinkageProblem& p, std::span<const double> candidate) {
  require_dim(p, candidate.size());
  const std::vector<double> u = complement_of(candidate);
  return objective_from_complement(p, u);
}

std::vector<double> objective_gradient_from_complement(const ShrinkageProblem& p,
                                                       std::span<const double> complement) {
  require_dim(p, complement.size());
  const double k = kappa(p);
  const std::vector<double> a = p.source_complement();
  std::vector<double> g(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (!(complement[i] > 0.0)) throw std::domain_error("gradient: complement must be positive");
    const double c = complement[i] / p.t;
    // d c_i / d lambda'_i = -1 / t.
    g[i] = (a[i] / c - k * std::pow(c, p.alpha - 1.0)) / p.t;
  }
  return g;
}

std::vector<double> objective_gradient(const ShrinkageProblem& p, std::span<const double> candidate) {
  require_dim(p, candidate.size());
  const std::vector<double> u = complement_of(candidate);
  return objective_gradient_from_complement(p, u);
}

std::vector<double> closed_form_complement(const ShrinkageProblem& p) {
  const double eta = p.eta;
  const double scale =
      p.t * std::pow(eta / (p.delta * p.s), eta) * std::pow(1.0 - 1.0 / eta, eta);
  std::vector<double> u(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) u[i] = scale * std::pow(1.0 - p.lambda[i], p.eta);
  return u;
}

std::vector<double> closed_form_minimizer(const ShrinkageProblem& p) {
  std::vector<double> out = closed_form_complement(p);
  for (double& v : out) v = 1.0 - v;
  return out;
}

MinimizerResult minimize_objective(const ShrinkageProblem& p, std::span<const double> start_logits,
                                   const MinimizerOptions& options) {
  require_dim(p, start_logits.size());
  const auto n = static_cast<Eigen::Index>(p.dim());
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(start_logits.data(), n);
  Eigen::VectorXd g;
  double f = value_and_logit_gradient(p, x, g);
  if (!std::isfinite(f)) throw std::domain_error("minimizer: start point outside the domain");
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);

  MinimizerResult result;
  for (; result.iterations < options.max_iterations; ++result.iterations) {
    if (g.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd dir = -h * g;
    if (dir.dot(g) >= 0.0) {
      h.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    Eigen::VectorXd x_next;
    Eigen::VectorXd g_next;
    double f_next = f;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      x_next = x + step * dir;
      f_next = value_and_logit_gradient(p, x_next, g_next);
      if (std::isfinite(f_next) && f_next <= f + 1e-4 * step * dir.dot(g)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable decrease left: the gradient sits at the rounding floor.
      result.converged = g.cwiseAbs().maxCoeff() <= 1e-8;
      break;
    }
    const Eigen::VectorXd s = x_next - x;
    const Eigen::VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    x = x_next;
    g = g_next;
    f = f_next;
  }
  result.value = f;
  result.minimizer.resize(p.dim());
  for (Eigen::Index i = 0; i < n; ++i) result.minimizer[static_cast<std::size_t>(i)] = logistic(x[i]);
  return result;
}

Theorem1Report verify_theorem1(const ShrinkageProblem& p, const MinimizerOptions& options) {
  const auto d = static_cast<int>(p.dim());
  if (d < 2 || d > 16) throw std::invalid_argument("verify_theorem1: d must lie in [2, 16]");
  if (p.eta < 2 || p.eta > 32) throw std::invalid_argument("verify_theorem1: eta must lie in [2, 32]");
  const auto started = std::chrono::steady_clock::now();

  Theorem1Report r;
  r.d = d;
  r.eta = p.eta;
  r.starts = std::max(options.starts, 8);
  const std::vector<double> closed_u = closed_form_complement(p);
  r.closed_form = closed_form_minimizer(p);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> start_dist(-3.0, 3.0);
  double best = std::numeric_limits<double>::infinity();
  r.converged = true;
  for (int s = 0; s < r.starts; ++s) {
    std::vector<double> x0(p.dim());
    for (double& v : x0) v = start_dist(rng);
    MinimizerResult run = minimize_objective(p, x0, options);
    if (run.converged) {
      ++r.converged_starts;
    } else {
      r.converged = false;
    }
    if (run.value < best) {
      best = run.value;
      r.best_numerical = std::move(run.minimizer);
    }
  }

  for (std::size_t i = 0; i < p.dim(); ++i) {
    r.distance_inf = std::max(r.distance_inf, std::abs(r.best_numerical[i] - r.closed_form[i]));
  }
  for (double g : objective_gradient_from_complement(p, closed_u)) {
    r.stationarity = std::max(r.stationarity, std::abs(g));
  }
  r.objective_gap = objective_from_complement(p, closed_u) - best;
  double t_again = 0.0;
  for (double u : closed_u) t_again += u;
  r.trace_residual = std::abs(t_again - p.t);
  r.complement_sum_residual = std::abs(t_again / p.t - 1.0);
  r.wall_time_ms = elapsed_ms(started);
  return r;
}

Eigen::MatrixXd random_trace_normalized_psd(int d, std::uint64_t seed, double min_eig) {
  if (d < 1) throw std::invalid_argument("random_trace_normalized_psd: d must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(min_eig, 1.0);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  std::vector<double> raw(static_cast<std::size_t>(d));
  for (double& v : raw) v = eig(rng);
  const SpectrumVector lambda = SpectrumVector::normalize(std::move(raw));
  const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(lambda.values.data(), d);
  const Eigen::MatrixXd m = q * diag.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

Theorem2Report verify_theorem2(int d, int trials, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("verify_theorem2: d must be at least 2");
  if (trials < 1) throw std::invalid_argument("verify_theorem2: trials must be positive");
  const auto started = std::chrono::steady_clock::now();
  Theorem2Report r;
  r.d = d;
  r.trials = trials;
  for (int k = 1; k <= 20; ++k) r.etas.push_back(1 << k);
  r.deviation.assign(r.etas.size(), 0.0);
  r.monotone = true;
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::MatrixXd m = random_trace_normalized_psd(d, seed + static_cast<std::uint64_t>(trial));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::MatrixXd& u = es.eigenvectors();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    r.orthogonality_residual =
        std::max(r.orthogonality_residual, (u * u.transpose() - eye).cwiseAbs().maxCoeff());
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < r.etas.size(); ++k) {
      const double dev = (maxexp_f(m, r.etas[k]) - eye).cwiseAbs().maxCoeff();
      // Strict decrease is only observable above the rounding floor of 1 - x.
      const bool ok = previous > 1e-12 ? dev < previous : dev <= previous + 1e-15;
      r.monotone = r.monotone && ok;
      previous = dev;
      r.deviation[k] = std::max(r.deviation[k], dev);
    }
  }
  r.final_deviation = r.deviation.back();
  r.wall_time_ms = elapsed_ms(started);
  return r;
}

void write_theorem_csv_header(std::ostream& out) {
  out << "d,eta,residual,stationarity,wall_time_ms\n";
}

void write_theorem_csv(std::ostream& out, const Theorem1Report& r) {
  out << r.d << ',' << r.eta << ',' << r.distance_inf << ',' << r.stationarity << ','
      << r.wall_time_ms << '\n';
}

void write_theorem_csv(std::ostream& out, const Theorem2Report& r) {
  for (std::size_t k = 0; k < r.etas.size(); ++k) {
    out << r.d << ',' << r.etas[k] << ',' << r.deviation[k] << ",," << r.wall_time_ms << '\n';
  }
}

void write_theorem_text(std::ostream& out, const Theorem1Report& r) {
  out << "theorem1 d=" << r.d << " eta=" << r.eta << " distance_inf=" << r.distance_inf
      << " stationarity=" << r.stationarity << " objective_gap=" << r.objective_gap
      << " converged=" << r.converged_starts << '/' << r.starts << (r.converged ? "" : " FLAGGED")
      << '\n';
}

void write_theorem_text(std::ostream& out, const Theorem2Report& r) {
  out << "theorem2 d=" << r.d << " trials=" << r.trials << " final_deviation=" << r.final_deviation
      << " monotone=" << (r.monotone ? "yes" : "no")
      << " orthogonality=" << r.orthogonality_residual << '\n';
}

}  // namespace tenet
