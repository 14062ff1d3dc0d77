#pragma once

// Problem files for one-off solves. A problem is a JSON object with a `mode`:
//
//   maxent   empirical_x
//   umaxent  empirical_omega, channel, omega_labels?
//   latent   empirical_y, latent
//   blackbox labeled, unlabeled (arrays of records or JSONL paths)
//
// plus optional `x_labels`, `features` (K x |X|; indicators by default) and `prior`.

#include "umaxent/serialize.hpp"

namespace umaxent {

inline const std::vector<std::string>& problem_modes() {
  static const std::vector<std::string> modes = {"maxent", "umaxent", "latent", "blackbox"};
  return modes;
}

struct ProblemOutcome {
  Json result;
  bool converged = false;
};

namespace detail {

inline std::vector<PredictionRecord> records_from(const JsonView& v,
                                                  const std::filesystem::path& base_dir) {
  if (v.raw().is_string()) {
    const std::filesystem::path file = base_dir / v.string();
    std::ifstream in(file);
    if (!in) v.fail("cannot open prediction stream '" + file.string() + "'");
    return read_prediction_stream(in, file.string());
  }
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(prediction_from_json(v[i]));
  if (out.empty()) v.fail("no records");
  return out;
}

inline FeatureMap problem_features(const JsonView& p, Eigen::Index x_size) {
  if (auto f = p.find("features")) {
    const Eigen::MatrixXd m = f->matrix();
    FeatureMap features = f->build([&] { return FeatureMap(m); });
    if (features.x_size() != x_size) {
      f->fail("has " + std::to_string(features.x_size()) + " columns but the model space has " +
              std::to_string(x_size) + " elements");
    }
    return features;
  }
  return FeatureMap::indicators(x_size);
}

inline std::optional<Simplex> problem_prior(const JsonView& p, Eigen::Index x_size) {
  auto f = p.find("prior");
  if (!f) return std::nullopt;
  Simplex prior = simplex_from_json(*f);
  if (prior.size() != x_size) f->fail("size does not match the model space");
  if (!prior.strictly_positive()) f->fail("must be strictly positive");
  return prior;
}

inline std::vector<std::string> problem_x_labels(const JsonView& p, Eigen::Index x_size) {
  if (auto f = p.find("x_labels")) {
    std::vector<std::string> labels = f->strings();
    if (static_cast<Eigen::Index>(labels.size()) != x_size) {
      f->fail("label count does not match the model space");
    }
    f->build([&] { return ModelSpace(labels); });
    return labels;
  }
  return ModelSpace::anonymous(static_cast<std::size_t>(x_size)).labels();
}

}  // namespace detail

/// Solves a parsed problem. Relative JSONL paths resolve against `base_dir`.
inline ProblemOutcome solve_problem(const Json& document, const RunConfig& config,
                                    const std::filesystem::path& base_dir = ".",
                                    const std::string& name = "problem") {
  const JsonView p(document, name);
  const JsonView mode_view = p.at("mode");
  const std::string mode = mode_view.string();
  ProblemOutcome out;

  if (mode == "maxent") {
    p.only({"mode", "empirical_x", "x_labels", "features", "prior"});
    const Simplex empirical = simplex_from_json(p.at("empirical_x"));
    const auto labels = detail::problem_x_labels(p, empirical.size());
    const FeatureMap features = detail::problem_features(p, empirical.size());
    const auto prior = detail::problem_prior(p, empirical.size());
    const SolveReport r = solve_maxent(empirical, features, config.solver, prior);
    out.result = to_json(r, labels);
    out.converged = r.stop_reason == StopReason::converged;
  } else if (mode == "umaxent") {
    p.only({"mode", "empirical_omega", "channel", "omega_labels", "x_labels", "features", "prior"});
    const Simplex empirical = simplex_from_json(p.at("empirical_omega"));
    const JsonView channel = p.at("channel");
    const Eigen::MatrixXd c = channel.matrix();
    std::vector<std::string> omega_labels;
    if (auto l = p.find("omega_labels")) omega_labels = l->strings();
    const ObservationModel obs = channel.build([&] { return ObservationModel(c, omega_labels); });
    if (obs.omega_size() != empirical.size()) {
      p.at("empirical_omega").fail("size does not match the channel's observation count");
    }
    const auto labels = detail::problem_x_labels(p, obs.x_size());
    const FeatureMap features = detail::problem_features(p, obs.x_size());
    const auto prior = detail::problem_prior(p, obs.x_size());
    const UMaxEntResult r =
        p.build([&] { return solve_umaxent(empirical, obs, features, config.em, prior); });
    out.result = to_json(r, labels);
    out.converged = r.converged;
  } else if (mode == "latent") {
    p.only({"mode", "empirical_y", "latent", "features", "prior"});
    const LatentStructure structure = latent_from_json(p.at("latent"));
    const Simplex empirical = simplex_from_json(p.at("empirical_y"));
    if (empirical.size() != static_cast<Eigen::Index>(structure.y_size())) {
      p.at("empirical_y").fail("size does not match latent.labels");
    }
    const auto x_size = static_cast<Eigen::Index>(structure.x_size());
    const FeatureMap features = detail::problem_features(p, x_size);
    const auto prior = detail::problem_prior(p, x_size);
    const UMaxEntResult r = p.build(
        [&] { return solve_latent_maxent(empirical, structure, features, config.em, prior); });
    out.result = to_json(r, structure.model_space().labels());
    out.converged = r.converged;
  } else if (mode == "blackbox") {
    p.only({"mode", "labeled", "unlabeled", "x_labels", "features", "prior"});
    const JsonView labeled_view = p.at("labeled");
    const JsonView unlabeled_view = p.at("unlabeled");
    const auto labeled = detail::records_from(labeled_view, base_dir);
    const auto unlabeled = detail::records_from(unlabeled_view, base_dir);
    const ConfusionModel confusion = labeled_view.build([&] { return estimate_confusion(labeled); });
    const Simplex ptilde = unlabeled_view.build([&] { return aggregate_predictions(unlabeled); });
    if (ptilde.size() != confusion.channel.rows()) {
      unlabeled_view.fail("prediction size differs from the labeled records");
    }
    const auto labels = detail::problem_x_labels(p, ptilde.size());
    const FeatureMap features = detail::problem_features(p, ptilde.size());
    const auto prior = detail::problem_prior(p, ptilde.size());
    const UMaxEntResult r = labeled_view.build(
        [&] { return solve_umaxent_blackbox(ptilde, confusion, features, config.em, prior); });
    out.result = to_json(r, labels);
    out.result["confusion"] = to_json(confusion);
    out.result["aggregated"] = to_json(ptilde, labels);
    out.converged = r.converged;
  } else {
    std::string valid;
    for (const auto& m : problem_modes()) valid += (valid.empty() ? "" : ", ") + m;
    mode_view.fail("unknown mode '" + mode + "' (valid: " + valid + ")");
  }
  out.result["mode"] = mode;
  return out;
}

}  // namespace umaxent
