#pragma once

// Large, sparse observation spaces. A black-box predictor maps each observation
// to a distribution over X-hat (identified with X). Labeled predictions estimate
// the confusion channel Pr(X-hat | X); averaged unlabeled predictions become the
// empirical distribution that uncertain maximum entropy explains.

#include "umaxent/uncertain.hpp"

#include <span>
#include <vector>

namespace umaxent {

struct PredictionRecord {
  std::optional<std::size_t> true_x;
  Simplex prediction;
};

struct ConfusionModel {
  /// |X| x |X-hat|; rows without labeled records are zero.
  Eigen::MatrixXd channel;
  std::vector<std::size_t> counts;

  bool estimated(std::size_t x) const { return counts.at(x) > 0; }

  std::vector<std::size_t> unestimated() const {
    std::vector<std::size_t> missing;
    for (std::size_t x = 0; x < counts.size(); ++x) {
      if (counts[x] == 0) missing.push_back(x);
    }
    return missing;
  }

  /// The confusion rows as an observation channel; throws when a row is unestimated.
  ObservationModel observation_model() const {
    const std::vector<std::size_t> missing = unestimated();
    if (!missing.empty()) {
      std::string list;
      for (std::size_t x : missing) list += (list.empty() ? "" : ", ") + std::to_string(x);
      throw InvalidInput("confusion rows not estimated for X index(es): " + list);
    }
    return ObservationModel(channel);
  }
};

/// Row X is the renormalized mean prediction over records labeled X.
inline ConfusionModel estimate_confusion(std::span<const PredictionRecord> labeled) {
  if (labeled.empty()) throw InvalidInput("estimate_confusion: no labeled records");
  const Eigen::Index n = labeled.front().prediction.size();
  ConfusionModel model;
  model.channel = Eigen::MatrixXd::Zero(n, n);
  model.counts.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const PredictionRecord& r = labeled[i];
    if (!r.true_x) {
      throw InvalidInput("estimate_confusion: record " + std::to_string(i) + " has no true_x");
    }
    detail::require_same_size(r.prediction.size(), n, "estimate_confusion: prediction");
    if (*r.true_x >= static_cast<std::size_t>(n)) {
      throw InvalidInput("estimate_confusion: record " + std::to_string(i) +
                         " has out-of-range true_x");
    }
    model.channel.row(static_cast<Eigen::Index>(*r.true_x)) += r.prediction.probs().transpose();
    ++model.counts[*r.true_x];
  }
  for (Eigen::Index x = 0; x < n; ++x) {
    const double total = model.channel.row(x).sum();
    if (total > 0.0) model.channel.row(x) /= total;
  }
  return model;
}

/// Component-wise mean prediction.
inline Simplex aggregate_predictions(std::span<const PredictionRecord> records) {
  if (records.empty()) throw InvalidInput("aggregate_predictions: no records");
  const Eigen::Index n = records.front().prediction.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  for (const PredictionRecord& r : records) {
    detail::require_same_size(r.prediction.size(), n, "aggregate_predictions: prediction");
    sum += r.prediction.probs();
  }
  return Simplex::from_weights(std::move(sum));
}

/// Uncertain maximum entropy in the X-hat space with the confusion channel.
inline UMaxEntResult solve_umaxent_blackbox(const Simplex& ptilde_xhat,
                                            const ConfusionModel& confusion,
                                            const FeatureMap& features, const EmConfig& em,
                                            const std::optional<Simplex>& prior = std::nullopt) {
  return solve_umaxent(ptilde_xhat, confusion.observation_model(), features, em, prior);
}

/// Stand-in predictor: for observation omega it emits the distribution
/// proportional to Pr(omega | X-hat)^(1/temperature). Temperature 1 is the
/// Bayes posterior under a uniform prior; larger temperatures flatten it.
class SyntheticBlackBox {
 public:
  SyntheticBlackBox(ObservationModel truth, double temperature, std::uint64_t seed)
      : truth_(std::move(truth)), rng_(seed) {
    if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
    const Eigen::Index n = truth_.x_size();
    for (Eigen::Index w = 0; w < truth_.omega_size(); ++w) {
      Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
      const auto column = truth_.channel().col(w);
      if (column.maxCoeff() > 0.0) {
        const double top = std::log(column.maxCoeff());
        for (Eigen::Index x = 0; x < n; ++x) {
          if (column[x] > 0.0) weights[x] = std::exp((std::log(column[x]) - top) / temperature);
        }
        predictions_.emplace_back(Simplex::from_weights(std::move(weights)));
      } else {
        predictions_.emplace_back(std::nullopt);
      }
    }
    for (Eigen::Index x = 0; x < n; ++x) omega_cdf_.push_back(cumulative(truth_.channel().row(x)));
  }

  const ObservationModel& truth() const { return truth_; }

  /// Prediction for one observation; throws when omega is unreachable.
  const Simplex& predict(std::size_t omega) const {
    const auto& p = predictions_.at(omega);
    if (!p) throw InvalidInput("observation " + std::to_string(omega) + " is unreachable");
    return *p;
  }

  /// Samples omega ~ Pr(. | x) and returns it with the prediction.
  std::pair<std::size_t, PredictionRecord> draw(std::size_t x, bool labeled) {
    const std::size_t omega = rng_.categorical(omega_cdf_.at(x));
    PredictionRecord record{labeled ? std::optional<std::size_t>(x) : std::nullopt,
                            predict(omega)};
    return {omega, std::move(record)};
  }

 private:
  ObservationModel truth_;
  Rng rng_;
  std::vector<std::optional<Simplex>> predictions_;
  std::vector<std::vector<double>> omega_cdf_;
};

}  // namespace umaxent
