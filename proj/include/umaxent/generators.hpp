#pragma once

// Random problem instances and sampled datasets for the experiment harness.

#include "umaxent/core.hpp"
#include "umaxent/random.hpp"

#include <cstdint>
#include <numeric>
#include <vector>

namespace umaxent {

/// Pr0(X) proportional to exp(alpha * U(-1, 1)), one draw per X.
inline Simplex gen_true_distribution(double alpha, Eigen::Index x_size, Rng& rng) {
  if (!(alpha >= 0.0)) throw InvalidInput("alpha must be non-negative");
  if (x_size < 1) throw InvalidInput("x_size must be positive");
  Eigen::VectorXd w(x_size);
  for (Eigen::Index i = 0; i < x_size; ++i) w[i] = std::exp(alpha * rng.uniform(-1.0, 1.0));
  return Simplex::from_weights(std::move(w));
}

/// True when every X is argmax_X' Pr(X' | omega) under a uniform prior for some omega.
inline bool usable_for_ml_x(const ObservationModel& obs) {
  std::vector<bool> owned(static_cast<std::size_t>(obs.x_size()), false);
  for (Eigen::Index w = 0; w < obs.omega_size(); ++w) {
    if (obs.unreachable(w)) continue;
    Eigen::Index best = 0;
    obs.channel().col(w).maxCoeff(&best);
    owned[static_cast<std::size_t>(best)] = true;
  }
  for (bool b : owned) {
    if (!b) return false;
  }
  return true;
}

inline constexpr int kDefaultGenerationRetries = 1000;

/// Rows proportional to exp(beta * U(0, 1)); each X then receives +1/|Omega| on its
/// own randomly chosen omega (distinct across X) and is renormalized. Regenerated
/// until usable.
inline ObservationModel gen_observation_model(double beta, Eigen::Index x_size,
                                              Eigen::Index omega_size, Rng& rng,
                                              int max_retries = kDefaultGenerationRetries) {
  if (omega_size < x_size) throw InvalidInput("omega_size must be >= x_size");
  if (!(beta >= 0.0)) throw InvalidInput("beta must be non-negative");
  const double boost = 1.0 / static_cast<double>(omega_size);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Eigen::MatrixXd w(x_size, omega_size);
    std::vector<Eigen::Index> columns(static_cast<std::size_t>(omega_size));
    std::iota(columns.begin(), columns.end(), Eigen::Index{0});
    for (Eigen::Index x = 0; x < x_size; ++x) {
      for (Eigen::Index o = 0; o < omega_size; ++o) w(x, o) = std::exp(beta * rng.uniform());
      w.row(x) /= w.row(x).sum();
      // Partial Fisher-Yates: column x of the shuffle is this X's boost target.
      const auto i = static_cast<std::size_t>(x);
      std::swap(columns[i], columns[i + rng.index(columns.size() - i)]);
      w(x, columns[i]) += boost;
    }
    ObservationModel obs = ObservationModel::from_weights(std::move(w));
    if (usable_for_ml_x(obs)) return obs;
  }
  throw Error("no usable observation model within " + std::to_string(max_retries) + " attempts");
}

/// Negative observations: Pr(omega_j | X_i) = 1/(n-1) for j != i and 0 for j == i.
inline ObservationModel gen_negative_observation_model(Eigen::Index n) {
  if (n < 2) throw InvalidInput("negative observation model needs n >= 2");
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n - 1));
  c.diagonal().setZero();
  return ObservationModel(std::move(c));
}

/// One sample stream: X_i ~ truth and omega_i ~ Pr(. | X_i). Prefixes of the
/// stream are the datasets for smaller N.
struct Dataset {
  std::vector<std::uint32_t> x;
  std::vector<std::uint32_t> omega;
  Eigen::Index x_size = 0;
  Eigen::Index omega_size = 0;

  std::size_t size() const { return x.size(); }

  Simplex empirical_x(std::size_t n) const { return empirical(x, x_size, n); }
  Simplex empirical_omega(std::size_t n) const { return empirical(omega, omega_size, n); }

 private:
  static Simplex empirical(const std::vector<std::uint32_t>& s, Eigen::Index dim, std::size_t n) {
    if (n < 1 || n > s.size()) throw InvalidInput("dataset prefix out of range");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < n; ++i) counts[s[i]] += 1.0;
    return Simplex::from_weights(std::move(counts));
  }
};

inline Dataset draw_dataset(const Simplex& truth, const ObservationModel& obs, std::size_t n,
                            Rng& rng) {
  if (n < 1) throw InvalidInput("dataset size must be positive");
  detail::require_same_size(truth.size(), obs.x_size(), "draw_dataset");
  const std::vector<double> x_cdf = cumulative(truth.probs());
  std::vector<std::vector<double>> omega_cdf;
  omega_cdf.reserve(static_cast<std::size_t>(obs.x_size()));
  for (Eigen::Index x = 0; x < obs.x_size(); ++x) {
    omega_cdf.push_back(cumulative(obs.channel().row(x)));
  }
  Dataset data;
  data.x_size = obs.x_size();
  data.omega_size = obs.omega_size();
  data.x.reserve(n);
  data.omega.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = rng.categorical(x_cdf);
    data.x.push_back(static_cast<std::uint32_t>(x));
    data.omega.push_back(static_cast<std::uint32_t>(rng.categorical(omega_cdf[x])));
  }
  return data;
}

}  // namespace umaxent
