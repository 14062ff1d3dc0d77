#pragma once

// Classic maximum-entropy estimation: the convex dual log Z(lambda) - lambda . target
// minimized by exponentiated gradient descent over split weights.

#include "umaxent/core.hpp"

#include <cstdint>
#include <deque>
#include <string_view>

namespace umaxent {

struct SolverConfig {
  int max_iterations = 5000;
  double lambda_norm_limit = 50.0;
  double convergence_tolerance = 1e-7;
  double initial_learning_rate = 1.0;
  double learning_rate_increment = 1e-5;
  double oscillation_decay = 0.99;
  int oscillation_window = 5;
  int oscillation_switch_threshold = 3;
  /// Sample count N of the penalty sum_k lambda_k^2 / N^2; absent disables it.
  std::optional<std::int64_t> regularization_n;

  void validate() const {
    if (max_iterations < 1) throw InvalidInput("solver.max_iterations must be positive");
    if (!(lambda_norm_limit > 0)) throw InvalidInput("solver.lambda_norm_limit must be positive");
    if (!(convergence_tolerance > 0)) {
      throw InvalidInput("solver.convergence_tolerance must be positive");
    }
    if (!(initial_learning_rate > 0)) {
      throw InvalidInput("solver.initial_learning_rate must be positive");
    }
    if (!(learning_rate_increment >= 0)) {
      throw InvalidInput("solver.learning_rate_increment must be non-negative");
    }
    if (!(oscillation_decay > 0 && oscillation_decay <= 1)) {
      throw InvalidInput("solver.oscillation_decay must lie in (0, 1]");
    }
    if (oscillation_window < 2) throw InvalidInput("solver.oscillation_window must be >= 2");
    if (oscillation_switch_threshold < 0) {
      throw InvalidInput("solver.oscillation_switch_threshold must be non-negative");
    }
    if (regularization_n && *regularization_n < 1) {
      throw InvalidInput("solver.regularization_n must be positive");
    }
  }
};

enum class StopReason { converged, max_iterations, norm_exceeded };

inline std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::converged:
      return "converged";
    case StopReason::max_iterations:
      return "max_iterations";
    case StopReason::norm_exceeded:
      return "norm_exceeded";
  }
  return "unknown";
}

struct SolveReport {
  Weights lambda;
  Simplex posterior;
  int iterations = 0;
  StopReason stop_reason = StopReason::max_iterations;
  double final_gradient_linf = 0.0;
  /// Learning rate at exit; EM carries it into the next M-step.
  double final_learning_rate = 0.0;
};

/// Phi_k = sum_X p(X) phi_k(X).
inline Eigen::VectorXd feature_expectations(const Simplex& p, const FeatureMap& features) {
  detail::require_same_size(p.size(), features.x_size(), "feature_expectations");
  return features.values() * p.probs();
}

namespace detail {

inline double regularization_scale(const SolverConfig& config) {
  if (!config.regularization_n) return 0.0;
  const double n = static_cast<double>(*config.regularization_n);
  return 1.0 / (n * n);
}

inline void check_dual_args(const Weights& lambda, const FeatureMap& features,
                            const Eigen::VectorXd& target) {
  require_same_size(lambda.size(), features.count(), "dual: lambda");
  require_same_size(target.size(), features.count(), "dual: target");
  if (!target.allFinite()) throw InvalidInput("dual: target must be finite");
}

}  // namespace detail

/// log Z(lambda) - lambda . target (+ sum lambda^2 / N^2 when regularized).
inline double dual_value(const Weights& lambda, const FeatureMap& features,
                         const Eigen::VectorXd& target,
                         const std::optional<Simplex>& prior = std::nullopt,
                         const SolverConfig& config = {}) {
  detail::check_dual_args(lambda, features, target);
  const Eigen::VectorXd log_prior = detail::log_of_prior(prior, features.x_size());
  Eigen::VectorXd scores = features.values().transpose() * lambda.values();
  if (log_prior.size() != 0) scores += log_prior;
  const double shift = scores.maxCoeff();
  const double log_z = shift + std::log((scores.array() - shift).exp().sum());
  return log_z - lambda.values().dot(target) +
         detail::regularization_scale(config) * lambda.values().squaredNorm();
}

inline Eigen::VectorXd dual_gradient(const Weights& lambda, const FeatureMap& features,
                                     const Eigen::VectorXd& target,
                                     const std::optional<Simplex>& prior = std::nullopt,
                                     const SolverConfig& config = {}) {
  detail::check_dual_args(lambda, features, target);
  const Simplex p = log_linear_distribution(lambda, features, prior);
  return feature_expectations(p, features) - target +
         2.0 * detail::regularization_scale(config) * lambda.values();
}

namespace detail {

// Counts increase/decrease reversals per component across a window of iterates.
inline int count_direction_switches(const std::deque<Eigen::VectorXd>& history) {
  int switches = 0;
  if (history.size() < 3) return 0;
  const Eigen::Index k = history.front().size();
  for (Eigen::Index c = 0; c < k; ++c) {
    int last_sign = 0;
    for (std::size_t t = 1; t < history.size(); ++t) {
      const double delta = history[t][c] - history[t - 1][c];
      const int sign = (delta > 0.0) - (delta < 0.0);
      if (sign == 0) continue;
      if (last_sign != 0 && sign != last_sign) ++switches;
      last_sign = sign;
    }
  }
  return switches;
}

inline double population_stddev(const std::deque<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace detail

inline constexpr int kConvergenceWindow = 5;
inline constexpr double kSplitWeightFloor = 1e-3;
inline constexpr double kErrorIndexTag = 1e-12;

/// Minimizes the (optionally regularized) dual by adaptive exponentiated gradient
/// descent on lambda = lambda_plus - lambda_minus. `start` warm-starts lambda.
///
/// Stops on max_iterations, on ||lambda||_2 > lambda_norm_limit (reported, not
/// thrown; lambda is then the last iterate within the limit), or when the population standard deviation of the last five
/// per-iteration errors sum_i (|g_i| + i * 1e-12) drops below the tolerance.
inline SolveReport solve_dual(const Eigen::VectorXd& target, const FeatureMap& features,
                              const SolverConfig& config,
                              const std::optional<Simplex>& prior = std::nullopt,
                              const std::optional<Weights>& start = std::nullopt) {
  config.validate();
  const Eigen::Index k = features.count();
  detail::require_same_size(target.size(), k, "solve_dual: target");
  if (!target.allFinite()) throw InvalidInput("solve_dual: target must be finite");
  if (start) detail::require_same_size(start->size(), k, "solve_dual: start");

  const Eigen::MatrixXd& phi = features.values();
  const Eigen::VectorXd log_prior = detail::log_of_prior(prior, features.x_size());
  const double reg = 2.0 * detail::regularization_scale(config);

  const Eigen::VectorXd lambda0 = start ? start->values() : Eigen::VectorXd::Zero(k);
  Eigen::VectorXd plus = lambda0.cwiseMax(0.0).array() + kSplitWeightFloor;
  Eigen::VectorXd minus = (-lambda0).cwiseMax(0.0).array() + kSplitWeightFloor;
  Eigen::VectorXd lambda = plus - minus;

  Eigen::VectorXd p(features.x_size());
  Eigen::VectorXd grad(k);
  auto evaluate_gradient = [&] {
    detail::log_linear_into(lambda, phi, log_prior, p);
    grad.noalias() = phi * p;
    grad -= target;
    if (reg != 0.0) grad += reg * lambda;
  };

  double rate = config.initial_learning_rate;
  std::deque<double> errors;
  std::deque<Eigen::VectorXd> history;
  history.push_back(lambda);

  SolveReport report;
  report.stop_reason = StopReason::max_iterations;
  int iterations = 0;
  while (true) {
    evaluate_gradient();
    double error = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      error += std::abs(grad[i]) + static_cast<double>(i) * kErrorIndexTag;
    }
    errors.push_back(error);
    if (errors.size() > kConvergenceWindow) errors.pop_front();
    if (errors.size() == kConvergenceWindow &&
        detail::population_stddev(errors) < config.convergence_tolerance) {
      report.stop_reason = StopReason::converged;
      break;
    }
    if (iterations >= config.max_iterations) break;

    plus.array() *= (-rate * grad.array()).exp();
    minus.array() *= (rate * grad.array()).exp();
    lambda = plus - minus;
    ++iterations;

    if (!lambda.allFinite() || lambda.norm() > config.lambda_norm_limit) {
      // Report the last iterate inside the bound; the step past it can be huge.
      report.stop_reason = StopReason::norm_exceeded;
      lambda = history.back();
      evaluate_gradient();
      break;
    }

    history.push_back(lambda);
    if (static_cast<int>(history.size()) > config.oscillation_window) history.pop_front();
    if (detail::count_direction_switches(history) > config.oscillation_switch_threshold) {
      rate *= config.oscillation_decay;
    }
    rate += config.learning_rate_increment;
  }

  report.lambda = Weights(lambda);
  report.posterior = Simplex(p);
  report.iterations = iterations;
  report.final_gradient_linf = grad.cwiseAbs().maxCoeff();
  report.final_learning_rate = rate;
  return report;
}

/// Standard maximum entropy: match the feature expectations of empirical_x.
inline SolveReport solve_maxent(const Simplex& empirical_x, const FeatureMap& features,
                                const SolverConfig& config,
                                const std::optional<Simplex>& prior = std::nullopt) {
  return solve_dual(feature_expectations(empirical_x, features), features, config, prior);
}

}  // namespace umaxent
