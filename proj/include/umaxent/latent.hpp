#pragma once

// Latent maximum entropy. Every X splits into an observed part Y and a
// perfectly hidden part Z; the problem reduces to uncertain maximum entropy with
// the 0/1 channel Pr(omega_y | X = (Y, Z)) = [y == Y].

#include "umaxent/uncertain.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace umaxent {

class LatentStructure {
 public:
  /// One model element: the index of its observed part and the label of its hidden part.
  struct Element {
    std::size_t y = 0;
    std::string z;
  };

  LatentStructure() = default;

  /// `elements` lists the model space in order; element i is X_i.
  LatentStructure(std::vector<std::string> y_labels, std::vector<Element> elements)
      : y_space_(std::move(y_labels)), elements_(std::move(elements)) {
    if (elements_.empty()) throw InvalidInput("latent structure needs at least one element");
    members_.assign(y_space_.size(), {});
    std::map<std::pair<std::size_t, std::string>, std::size_t> seen;
    for (std::size_t x = 0; x < elements_.size(); ++x) {
      const Element& e = elements_[x];
      if (e.y >= y_space_.size()) {
        throw InvalidInput("latent element " + std::to_string(x) + " refers to unknown y index " +
                           std::to_string(e.y));
      }
      if (!seen.emplace(std::make_pair(e.y, e.z), x).second) {
        throw InvalidInput("latent element (" + y_space_.label(e.y) + ", " + e.z +
                           ") appears twice");
      }
      members_[e.y].push_back(x);
    }
    for (std::size_t y = 0; y < members_.size(); ++y) {
      if (members_[y].empty()) {
        throw InvalidInput("observed value '" + y_space_.label(y) + "' has no hidden completions");
      }
    }
  }

  /// Elements enumerated Y-major from a map Y -> Z_Y.
  static LatentStructure from_z_sets(std::vector<std::string> y_labels,
                                     const std::vector<std::vector<std::string>>& z_sets) {
    if (z_sets.size() != y_labels.size()) {
      throw InvalidInput("latent structure: one Z set per Y label required");
    }
    std::vector<Element> elements;
    for (std::size_t y = 0; y < z_sets.size(); ++y) {
      for (const std::string& z : z_sets[y]) elements.push_back({y, z});
    }
    return LatentStructure(std::move(y_labels), std::move(elements));
  }

  std::size_t x_size() const { return elements_.size(); }
  std::size_t y_size() const { return y_space_.size(); }
  const ModelSpace& y_space() const { return y_space_; }
  const std::vector<Element>& elements() const { return elements_; }
  std::size_t y_of(std::size_t x) const { return elements_.at(x).y; }
  /// Indices of X with observed part y (the set Z_Y in model order).
  const std::vector<std::size_t>& members(std::size_t y) const { return members_.at(y); }

  /// Model-space labels "y/z".
  ModelSpace model_space() const {
    std::vector<std::string> labels;
    labels.reserve(elements_.size());
    for (const Element& e : elements_) labels.push_back(y_space_.label(e.y) + "/" + e.z);
    return ModelSpace(std::move(labels));
  }

 private:
  ModelSpace y_space_;
  std::vector<Element> elements_;
  std::vector<std::vector<std::size_t>> members_;
};

inline ObservationModel expand_latent(const LatentStructure& structure) {
  const auto n = static_cast<Eigen::Index>(structure.x_size());
  const auto m = static_cast<Eigen::Index>(structure.y_size());
  Eigen::MatrixXd channel = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index x = 0; x < n; ++x) {
    channel(x, static_cast<Eigen::Index>(structure.y_of(static_cast<std::size_t>(x)))) = 1.0;
  }
  return ObservationModel(std::move(channel), structure.y_space().labels());
}

inline UMaxEntResult solve_latent_maxent(const Simplex& empirical_y,
                                         const LatentStructure& structure,
                                         const FeatureMap& features, const EmConfig& em,
                                         const std::optional<Simplex>& prior = std::nullopt) {
  return solve_umaxent(empirical_y, expand_latent(structure), features, em, prior);
}

}  // namespace umaxent
