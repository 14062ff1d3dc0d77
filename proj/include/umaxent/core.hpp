#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace umaxent {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or dimensionally inconsistent input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Empirical mass on an observation the model assigns zero probability.
class InconsistentObservation : public InvalidInput {
 public:
  InconsistentObservation(std::size_t omega, const std::string& what)
      : InvalidInput(what), omega_(omega) {}
  std::size_t omega() const { return omega_; }

 private:
  std::size_t omega_;
};

inline constexpr double kSimplexTolerance = 1e-9;

/// Ordered, unique element labels for a finite space.
class ModelSpace {
 public:
  ModelSpace() = default;
  explicit ModelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw InvalidInput("model space must contain at least one element");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], i).second) {
        throw InvalidInput("duplicate model space label '" + labels_[i] + "'");
      }
    }
  }

  /// Labels "x0", "x1", ... for an anonymous space of size n.
  static ModelSpace anonymous(std::size_t n, const std::string& prefix = "x") {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i));
    return ModelSpace(std::move(labels));
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A finite probability distribution. Entries are non-negative and sum to one;
/// inputs within kSimplexTolerance of one are renormalized exactly.
class Simplex {
 public:
  Simplex() = default;

  explicit Simplex(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) throw InvalidInput("simplex must have at least one entry");
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
        throw InvalidInput("simplex entry " + std::to_string(i) + " is negative or not finite");
      }
    }
    const double total = probs_.sum();
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw InvalidInput("simplex entries sum to " + std::to_string(total) + ", not 1");
    }
    probs_ /= total;
  }

  Simplex(std::initializer_list<double> probs)
      : Simplex(Eigen::Map<const Eigen::VectorXd>(probs.begin(),
                                                  static_cast<Eigen::Index>(probs.size()))) {}

  /// Normalizes non-negative weights with a positive total.
  static Simplex from_weights(Eigen::VectorXd weights) {
    const double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw InvalidInput("cannot normalize weights with non-positive total");
    }
    weights /= total;
    return Simplex(std::move(weights));
  }

  static Simplex uniform(Eigen::Index n) {
    if (n < 1) throw InvalidInput("uniform simplex needs n >= 1");
    return Simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  static Simplex point_mass(Eigen::Index n, Eigen::Index at) {
    if (at < 0 || at >= n) throw InvalidInput("point mass index out of range");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    p[at] = 1.0;
    return Simplex(std::move(p));
  }

  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }

  bool strictly_positive() const { return (probs_.array() > 0.0).all(); }

  friend bool operator==(const Simplex& a, const Simplex& b) {
    return a.probs_.size() == b.probs_.size() && a.probs_ == b.probs_;
  }

 private:
  Eigen::VectorXd probs_;
};

/// Observation channel Pr(omega | X): one row per X, one column per omega.
class ObservationModel {
 public:
  ObservationModel() = default;

  explicit ObservationModel(Eigen::MatrixXd channel, std::vector<std::string> omega_labels = {})
      : channel_(std::move(channel)), omega_labels_(std::move(omega_labels)) {
    if (channel_.rows() == 0 || channel_.cols() == 0) {
      throw InvalidInput("observation channel must be non-empty");
    }
    if (omega_labels_.empty()) {
      omega_labels_ = ModelSpace::anonymous(static_cast<std::size_t>(channel_.cols()), "w").labels();
    }
    if (static_cast<Eigen::Index>(omega_labels_.size()) != channel_.cols()) {
      throw InvalidInput("omega label count does not match channel columns");
    }
    ModelSpace check(omega_labels_);  // uniqueness
    for (Eigen::Index x = 0; x < channel_.rows(); ++x) {
      for (Eigen::Index w = 0; w < channel_.cols(); ++w) {
        const double c = channel_(x, w);
        if (!std::isfinite(c) || c < 0.0) {
          throw InvalidInput("channel entry (" + std::to_string(x) + ", " + std::to_string(w) +
                             ") is negative or not finite");
        }
      }
      const double total = channel_.row(x).sum();
      if (std::abs(total - 1.0) > kSimplexTolerance) {
        throw InvalidInput("channel row " + std::to_string(x) + " sums to " +
                           std::to_string(total) + ", not 1");
      }
      channel_.row(x) /= total;
    }
    unreachable_.resize(static_cast<std::size_t>(channel_.cols()));
    for (Eigen::Index w = 0; w < channel_.cols(); ++w) {
      unreachable_[static_cast<std::size_t>(w)] = (channel_.col(w).array() == 0.0).all();
    }
  }

  /// Row-normalizes non-negative weights.
  static ObservationModel from_weights(Eigen::MatrixXd weights,
                                       std::vector<std::string> omega_labels = {}) {
    for (Eigen::Index x = 0; x < weights.rows(); ++x) {
      const double total = weights.row(x).sum();
      if (!(total > 0.0)) {
        throw InvalidInput("channel row " + std::to_string(x) + " has non-positive total");
      }
      weights.row(x) /= total;
    }
    return ObservationModel(std::move(weights), std::move(omega_labels));
  }

  static ObservationModel identity(Eigen::Index n) {
    return ObservationModel(Eigen::MatrixXd::Identity(n, n));
  }

  static ObservationModel uniform(Eigen::Index x_size, Eigen::Index omega_size) {
    return ObservationModel(
        Eigen::MatrixXd::Constant(x_size, omega_size, 1.0 / static_cast<double>(omega_size)));
  }

  const Eigen::MatrixXd& channel() const { return channel_; }
  Eigen::Index x_size() const { return channel_.rows(); }
  Eigen::Index omega_size() const { return channel_.cols(); }
  const std::vector<std::string>& omega_labels() const { return omega_labels_; }
  bool unreachable(Eigen::Index omega) const {
    return unreachable_.at(static_cast<std::size_t>(omega));
  }

 private:
  Eigen::MatrixXd channel_;
  std::vector<std::string> omega_labels_;
  std::vector<bool> unreachable_;
};

/// K feature functions tabulated over the model space (K x |X|).
class FeatureMap {
 public:
  FeatureMap() = default;

  explicit FeatureMap(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw InvalidInput("feature map needs K >= 1 and |X| >= 1");
    }
    if (!values_.allFinite()) throw InvalidInput("feature values must be finite");
  }

  /// phi_k(X_i) = [k == i]; K = n.
  static FeatureMap indicators(Eigen::Index n) { return FeatureMap(Eigen::MatrixXd::Identity(n, n)); }

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index count() const { return values_.rows(); }
  Eigen::Index x_size() const { return values_.cols(); }

 private:
  Eigen::MatrixXd values_;
};

/// Lagrange multipliers of the log-linear family.
class Weights {
 public:
  Weights() = default;

  explicit Weights(Eigen::VectorXd lambda) : lambda_(std::move(lambda)) {
    if (!lambda_.allFinite()) throw InvalidInput("weights must be finite");
  }

  Weights(std::initializer_list<double> lambda)
      : Weights(Eigen::Map<const Eigen::VectorXd>(lambda.begin(),
                                                  static_cast<Eigen::Index>(lambda.size()))) {}

  static Weights zero(Eigen::Index k) { return Weights(Eigen::VectorXd::Zero(k)); }

  const Eigen::VectorXd& values() const { return lambda_; }
  Eigen::Index size() const { return lambda_.size(); }
  double operator[](Eigen::Index i) const { return lambda_[i]; }
  double norm() const { return lambda_.norm(); }

  friend bool operator==(const Weights& a, const Weights& b) {
    return a.lambda_.size() == b.lambda_.size() && a.lambda_ == b.lambda_;
  }

 private:
  Eigen::VectorXd lambda_;
};

namespace detail {

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                       " vs " + std::to_string(b) + ")");
  }
}

inline double xlogy_ratio(double p, double q) {
  if (p == 0.0) return 0.0;
  return p * std::log(p / q);
}

// Writes the log-linear distribution into `out` without allocating. `log_prior`
// may be empty (uniform base measure).
inline void log_linear_into(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& log_prior, Eigen::VectorXd& out) {
  out.noalias() = features.transpose() * lambda;
  if (log_prior.size() != 0) out += log_prior;
  const double shift = out.maxCoeff();
  out = (out.array() - shift).exp();
  out /= out.sum();
}

inline Eigen::VectorXd log_of_prior(const std::optional<Simplex>& prior, Eigen::Index n) {
  if (!prior) return {};
  require_same_size(prior->size(), n, "prior");
  if (!prior->strictly_positive()) throw InvalidInput("prior must be strictly positive");
  return prior->probs().array().log().matrix();
}

}  // namespace detail

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(const Simplex& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

/// KL(p || q) in nats. Returns +inf when p has mass outside the support of q.
inline double kl_divergence(const Simplex& p, const Simplex& q) {
  detail::require_same_size(p.size(), q.size(), "kl_divergence");
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

/// Jensen-Shannon divergence in nats; bounded by ln 2.
inline double jsd(const Simplex& p, const Simplex& q) {
  detail::require_same_size(p.size(), q.size(), "jsd");
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    d += 0.5 * detail::xlogy_ratio(p[i], m) + 0.5 * detail::xlogy_ratio(q[i], m);
  }
  return std::clamp(d, 0.0, std::log(2.0));
}

/// Pr(X) proportional to q(X) exp(sum_k lambda_k phi_k(X)), with q uniform when absent.
inline Simplex log_linear_distribution(const Weights& lambda, const FeatureMap& features,
                                       const std::optional<Simplex>& prior = std::nullopt) {
  detail::require_same_size(lambda.size(), features.count(), "log_linear_distribution");
  const Eigen::VectorXd log_prior = detail::log_of_prior(prior, features.x_size());
  Eigen::VectorXd p(features.x_size());
  detail::log_linear_into(lambda.values(), features.values(), log_prior, p);
  return Simplex(std::move(p));
}

/// Pr(omega) = sum_X Pr(omega | X) Pr(X).
inline Simplex marginal_omega(const Simplex& px, const ObservationModel& obs) {
  detail::require_same_size(px.size(), obs.x_size(), "marginal_omega");
  Eigen::VectorXd m = obs.channel().transpose() * px.probs();
  return Simplex::from_weights(std::move(m));
}

/// Bayes table Pr(X | omega); rows at omega with Pr(omega) = 0 are undefined.
class BayesTable {
 public:
  BayesTable(Eigen::MatrixXd rows, std::vector<bool> defined)
      : rows_(std::move(rows)), defined_(std::move(defined)) {}

  Eigen::Index omega_size() const { return rows_.rows(); }
  bool defined(Eigen::Index omega) const { return defined_.at(static_cast<std::size_t>(omega)); }

  /// The posterior over X for one observation, or nullopt when undefined.
  std::optional<Simplex> row(Eigen::Index omega) const {
    if (!defined(omega)) return std::nullopt;
    return Simplex(rows_.row(omega).transpose());
  }

  /// Raw matrix (omega x X); undefined rows are zero.
  const Eigen::MatrixXd& matrix() const { return rows_; }

 private:
  Eigen::MatrixXd rows_;
  std::vector<bool> defined_;
};

inline BayesTable posterior_given_observation(const Simplex& px, const ObservationModel& obs) {
  detail::require_same_size(px.size(), obs.x_size(), "posterior_given_observation");
  const Eigen::Index m = obs.omega_size();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(m, px.size());
  std::vector<bool> defined(static_cast<std::size_t>(m), false);
  for (Eigen::Index w = 0; w < m; ++w) {
    Eigen::VectorXd joint = obs.channel().col(w).cwiseProduct(px.probs());
    const double total = joint.sum();
    if (total > 0.0) {
      rows.row(w) = (joint / total).transpose();
      defined[static_cast<std::size_t>(w)] = true;
    }
  }
  return BayesTable(std::move(rows), std::move(defined));
}

}  // namespace umaxent
