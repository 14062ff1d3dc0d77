#pragma once

// Uncertain maximum entropy: maximum-entropy estimation from noisy observations
// through a known channel Pr(omega | X), solved by expectation-maximization over
// the log-linear family, plus the fixed-bar and most-likely-X baselines.

#include "umaxent/random.hpp"
#include "umaxent/solver.hpp"

#include <cstdint>
#include <vector>

namespace umaxent {

struct EmConfig {
  int max_em_iterations = 5000;
  /// EM stops when ||lambda - lambda'||_2 falls below this.
  double em_convergence_tolerance = 1e-3;
  double em_norm_limit = 50.0;
  int restarts = 10;
  double inner_rate_growth = 1.1;
  double inner_rate_cap = 1000.0;
  double initial_lambda_range = 0.01;
  /// Start restart 0 at lambda' = 0 (the maximum-entropy point) instead of a random draw.
  bool zero_start_restart = true;
  std::uint64_t seed = 0;
  SolverConfig solver;

  void validate() const {
    if (max_em_iterations < 1) throw InvalidInput("em.max_em_iterations must be positive");
    if (!(em_convergence_tolerance > 0)) {
      throw InvalidInput("em.em_convergence_tolerance must be positive");
    }
    if (!(em_norm_limit > 0)) throw InvalidInput("em.em_norm_limit must be positive");
    if (restarts < 1) throw InvalidInput("em.restarts must be >= 1");
    if (!(inner_rate_growth > 0)) throw InvalidInput("em.inner_rate_growth must be positive");
    if (!(inner_rate_cap > 0)) throw InvalidInput("em.inner_rate_cap must be positive");
    if (!(initial_lambda_range >= 0)) {
      throw InvalidInput("em.initial_lambda_range must be non-negative");
    }
    solver.validate();
  }
};

struct UMaxEntResult {
  Weights lambda;
  Simplex posterior;
  double entropy = 0.0;
  int em_iterations = 0;
  int restarts_used = 0;
  int selected_restart = 0;
  double constraint_residual_linf = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  /// Log likelihood after the initial point and after every EM iteration of the
  /// selected restart.
  std::vector<double> likelihood_trace;
};

namespace detail {

// sum_omega P~(omega) sum_X Pr_bar(X | omega) phi(X), with Pr_bar(X | omega) by
// Bayes from `bar`. Observations with zero empirical mass are skipped.
inline Eigen::VectorXd corrected_expectations(const Eigen::VectorXd& bar,
                                              const Simplex& empirical_omega,
                                              const ObservationModel& obs,
                                              const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd& c = obs.channel();
  const Eigen::VectorXd marginal = c.transpose() * bar;
  Eigen::VectorXd ratio = Eigen::VectorXd::Zero(obs.omega_size());
  for (Eigen::Index w = 0; w < obs.omega_size(); ++w) {
    const double mass = empirical_omega[w];
    if (mass == 0.0) continue;
    if (!(marginal[w] > 0.0)) {
      throw InconsistentObservation(
          static_cast<std::size_t>(w),
          "observation '" + obs.omega_labels()[static_cast<std::size_t>(w)] +
              "' has empirical mass but zero model probability");
    }
    ratio[w] = mass / marginal[w];
  }
  const Eigen::VectorXd expected_x = bar.cwiseProduct(c * ratio);
  return features * expected_x;
}

inline void check_em_args(const Simplex& empirical_omega, const ObservationModel& obs,
                          const FeatureMap& features) {
  require_same_size(empirical_omega.size(), obs.omega_size(), "empirical omega vs channel");
  require_same_size(obs.x_size(), features.x_size(), "channel vs features");
}

}  // namespace detail

/// E-step: corrected empirical feature expectations under Pr_lambda'(X).
inline Eigen::VectorXd e_step(const Weights& lambda_prev, const Simplex& empirical_omega,
                              const ObservationModel& obs, const FeatureMap& features,
                              const std::optional<Simplex>& prior = std::nullopt) {
  detail::check_em_args(empirical_omega, obs, features);
  const Simplex px = log_linear_distribution(lambda_prev, features, prior);
  return detail::corrected_expectations(px.probs(), empirical_omega, obs, features.values());
}

/// sum_omega P~(omega) ln Pr_lambda(omega); -inf on a support violation.
inline double log_likelihood(const Weights& lambda, const Simplex& empirical_omega,
                             const ObservationModel& obs, const FeatureMap& features,
                             const std::optional<Simplex>& prior = std::nullopt) {
  detail::check_em_args(empirical_omega, obs, features);
  const Simplex px = log_linear_distribution(lambda, features, prior);
  const Eigen::VectorXd marginal = obs.channel().transpose() * px.probs();
  double total = 0.0;
  for (Eigen::Index w = 0; w < obs.omega_size(); ++w) {
    const double mass = empirical_omega[w];
    if (mass == 0.0) continue;
    if (!(marginal[w] > 0.0)) return -std::numeric_limits<double>::infinity();
    total += mass * std::log(marginal[w]);
  }
  return total;
}

/// Gradient of the observation log likelihood:
/// -sum_X Pr(X) phi(X) + sum_omega P~(omega) sum_X Pr(X | omega) phi(X).
inline Eigen::VectorXd check_stationarity(const Weights& lambda, const Simplex& empirical_omega,
                                          const ObservationModel& obs,
                                          const FeatureMap& features,
                                          const std::optional<Simplex>& prior = std::nullopt) {
  detail::check_em_args(empirical_omega, obs, features);
  const Simplex px = log_linear_distribution(lambda, features, prior);
  return detail::corrected_expectations(px.probs(), empirical_omega, obs, features.values()) -
         feature_expectations(px, features);
}

namespace detail {

struct EmRun {
  Weights lambda;
  Simplex posterior;
  double entropy = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

inline EmRun run_em(const Weights& start, const Simplex& empirical_omega,
                    const ObservationModel& obs, const FeatureMap& features, const EmConfig& em,
                    const std::optional<Simplex>& prior) {
  EmRun run;
  Weights current = start;
  SolverConfig inner = em.solver;
  run.trace.push_back(log_likelihood(current, empirical_omega, obs, features, prior));
  for (int it = 1; it <= em.max_em_iterations; ++it) {
    const Eigen::VectorXd target = e_step(current, empirical_omega, obs, features, prior);
    SolveReport m_step = solve_dual(target, features, inner, prior, current);
    inner.initial_learning_rate =
        std::min(m_step.final_learning_rate * em.inner_rate_growth, em.inner_rate_cap);
    const double step = (m_step.lambda.values() - current.values()).norm();
    const bool diverged = m_step.stop_reason == StopReason::norm_exceeded;
    current = std::move(m_step.lambda);
    run.posterior = std::move(m_step.posterior);
    run.iterations = it;
    run.trace.push_back(log_likelihood(current, empirical_omega, obs, features, prior));
    if (diverged || current.norm() > em.em_norm_limit) break;
    if (step < em.em_convergence_tolerance) {
      run.converged = true;
      break;
    }
  }
  run.lambda = std::move(current);
  run.entropy = entropy(run.posterior);
  return run;
}

}  // namespace detail

/// Solves the uncertain maximum-entropy program by EM with restarts. Each restart
/// alternates E-step and M-step until the weight change is below tolerance; among
/// converged restarts the posterior with the highest entropy wins (ties to the
/// lower restart index). When no restart converges, the highest-entropy
/// diverged attempt is returned with converged = false.
inline UMaxEntResult solve_umaxent(const Simplex& empirical_omega, const ObservationModel& obs,
                                   const FeatureMap& features, const EmConfig& em,
                                   const std::optional<Simplex>& prior = std::nullopt) {
  em.validate();
  detail::check_em_args(empirical_omega, obs, features);
  const Eigen::Index k = features.count();

  std::optional<detail::EmRun> best;
  int best_index = -1;
  for (int r = 0; r < em.restarts; ++r) {
    Eigen::VectorXd init = Eigen::VectorXd::Zero(k);
    if (!(r == 0 && em.zero_start_restart)) {
      Rng rng(mix_seed({em.seed, static_cast<std::uint64_t>(r)}));
      for (Eigen::Index i = 0; i < k; ++i) {
        init[i] = rng.uniform(-em.initial_lambda_range, em.initial_lambda_range);
      }
    }
    detail::EmRun run = detail::run_em(Weights(init), empirical_omega, obs, features, em, prior);
    const bool better = !best || (run.converged && !best->converged) ||
                        (run.converged == best->converged && run.entropy > best->entropy);
    if (better) {
      best = std::move(run);
      best_index = r;
    }
  }

  UMaxEntResult result;
  result.lambda = best->lambda;
  result.posterior = best->posterior;
  result.entropy = best->entropy;
  result.em_iterations = best->iterations;
  result.restarts_used = em.restarts;
  result.selected_restart = best_index;
  result.converged = best->converged;
  result.likelihood_trace = std::move(best->trace);
  result.log_likelihood = result.likelihood_trace.back();
  result.constraint_residual_linf =
      check_stationarity(result.lambda, empirical_omega, obs, features, prior)
          .cwiseAbs()
          .maxCoeff();
  return result;
}

/// Baseline that fixes Pr_bar(X) in the Bayes correction (true or uniform) and
/// solves standard maximum entropy once, without EM.
inline SolveReport solve_fixed_bar(const Simplex& bar, const Simplex& empirical_omega,
                                   const ObservationModel& obs, const FeatureMap& features,
                                   const SolverConfig& config,
                                   const std::optional<Simplex>& prior = std::nullopt) {
  detail::check_em_args(empirical_omega, obs, features);
  detail::require_same_size(bar.size(), obs.x_size(), "solve_fixed_bar: bar");
  const Eigen::VectorXd target =
      detail::corrected_expectations(bar.probs(), empirical_omega, obs, features.values());
  return solve_dual(target, features, config, prior);
}

/// Pseudo-empirical distribution over X obtained by decoding every observation
/// to argmax_X Pr(omega | X). Mass of an observation whose maximum is shared by
/// several X is split equally among them.
inline Simplex ml_x_pseudo_empirical(const Simplex& empirical_omega,
                                     const ObservationModel& obs) {
  detail::require_same_size(empirical_omega.size(), obs.omega_size(), "ml_x: empirical omega");
  constexpr double kTieRelTol = 1e-12;
  Eigen::VectorXd pseudo = Eigen::VectorXd::Zero(obs.x_size());
  for (Eigen::Index w = 0; w < obs.omega_size(); ++w) {
    const double mass = empirical_omega[w];
    if (mass == 0.0) continue;
    const auto column = obs.channel().col(w);
    const double best = column.maxCoeff();
    if (!(best > 0.0)) {
      throw InconsistentObservation(static_cast<std::size_t>(w),
                                    "observation '" +
                                        obs.omega_labels()[static_cast<std::size_t>(w)] +
                                        "' has empirical mass but no X can produce it");
    }
    const double cutoff = best * (1.0 - kTieRelTol);
    const double ties = static_cast<double>((column.array() >= cutoff).count());
    for (Eigen::Index x = 0; x < obs.x_size(); ++x) {
      if (column[x] >= cutoff) pseudo[x] += mass / ties;
    }
  }
  return Simplex::from_weights(std::move(pseudo));
}

/// Most-likely-X baseline: decode, then standard maximum entropy.
inline SolveReport solve_ml_x(const Simplex& empirical_omega, const ObservationModel& obs,
                              const FeatureMap& features, const SolverConfig& config,
                              const std::optional<Simplex>& prior = std::nullopt) {
  detail::require_same_size(obs.x_size(), features.x_size(), "channel vs features");
  return solve_maxent(ml_x_pseudo_empirical(empirical_omega, obs), features, config, prior);
}

}  // namespace umaxent
