#pragma once

// JSON reading and writing for problem instances, configurations and results.
// Readers reject unknown keys and report the offending field as a dotted path.

#include "umaxent/blackbox.hpp"
#include "umaxent/harness.hpp"
#include "umaxent/latent.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace umaxent {

using Json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kConfigVersion = 1;

/// Read-only cursor into a JSON document that carries its field path for diagnostics.
class JsonView {
 public:
  JsonView(const Json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const Json& raw() const { return *value_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw InvalidInput(path_ + ": " + message);
  }

  const JsonView& object() const {
    if (!value_->is_object()) fail("expected an object");
    return *this;
  }

  bool has(const std::string& key) const { return object().raw().contains(key); }

  JsonView at(const std::string& key) const {
    object();
    const auto it = value_->find(key);
    if (it == value_->end()) throw InvalidInput(child_path(key) + ": missing required field");
    return JsonView(*it, child_path(key));
  }

  std::optional<JsonView> find(const std::string& key) const {
    object();
    const auto it = value_->find(key);
    if (it == value_->end() || it->is_null()) return std::nullopt;
    return JsonView(*it, child_path(key));
  }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const {
    object();
    for (const auto& [key, _] : value_->items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw InvalidInput(child_path(key) + ": unknown field");
      }
    }
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::int64_t integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    if (value_->is_number_unsigned() &&
        value_->get<std::uint64_t>() >
            static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      fail("integer out of range");
    }
    return value_->get<std::int64_t>();
  }

  int small_integer() const {
    const std::int64_t v = integer();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      fail("integer out of range");
    }
    return static_cast<int>(v);
  }

  std::uint64_t unsigned_integer() const {
    if (value_->is_number_unsigned()) return value_->get<std::uint64_t>();
    if (value_->is_number_integer() && value_->get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(value_->get<std::int64_t>());
    }
    fail("expected a non-negative integer");
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  std::size_t size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }

  JsonView operator[](std::size_t i) const {
    size();
    return JsonView((*value_)[i], path_ + "[" + std::to_string(i) + "]");
  }

  Eigen::VectorXd vector() const {
    const std::size_t n = size();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = (*this)[i].number();
    return v;
  }

  Eigen::MatrixXd matrix() const {
    const std::size_t rows = size();
    if (rows == 0) fail("expected a non-empty array of rows");
    const std::size_t cols = (*this)[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const JsonView row = (*this)[r];
      if (row.size() != cols) row.fail("row length differs from row 0");
      m.row(static_cast<Eigen::Index>(r)) = row.vector().transpose();
    }
    return m;
  }

  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].string());
    return out;
  }

  /// Runs `build`, prefixing any library validation error with this field's path.
  template <typename F>
  auto build(F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const InvalidInput& e) {
      if (std::string_view(e.what()).starts_with(path_)) throw;
      fail(e.what());
    }
  }

 private:
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json* value_;
  std::string path_;
};

inline Json parse_json(std::istream& in, const std::string& what) {
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(what + ": malformed JSON (" + std::string(e.what()) + ")");
  }
}

inline Json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput(file.string() + ": cannot open file");
  return parse_json(in, file.string());
}

namespace detail {

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

}  // namespace detail

// ---- model objects ---------------------------------------------------------

inline Json to_json(const Simplex& s, const std::vector<std::string>& labels = {}) {
  Json j;
  if (!labels.empty()) j["labels"] = labels;
  j["probs"] = detail::vector_json(s.probs());
  return j;
}

/// Accepts either a bare array of probabilities or {"probs": [...], "labels": [...]}.
inline Simplex simplex_from_json(const JsonView& v, std::vector<std::string>* labels = nullptr) {
  if (v.raw().is_array()) return v.build([&] { return Simplex(v.vector()); });
  v.only({"probs", "labels"});
  const JsonView probs = v.at("probs");
  Simplex s = probs.build([&] { return Simplex(probs.vector()); });
  if (auto l = v.find("labels")) {
    std::vector<std::string> names = l->strings();
    if (static_cast<Eigen::Index>(names.size()) != s.size()) {
      l->fail("label count does not match probs");
    }
    if (labels) *labels = std::move(names);
  }
  return s;
}

inline Json to_json(const ObservationModel& obs) {
  return Json{{"labels", obs.omega_labels()}, {"channel", detail::matrix_json(obs.channel())}};
}

/// {"channel": [[Pr(omega | X)...] per X], "labels": [omega labels]}.
inline ObservationModel observation_from_json(const JsonView& v) {
  v.only({"channel", "labels"});
  const JsonView channel = v.at("channel");
  const Eigen::MatrixXd c = channel.matrix();
  std::vector<std::string> labels;
  if (auto l = v.find("labels")) labels = l->strings();
  return channel.build([&] { return ObservationModel(c, labels); });
}

inline Json to_json(const FeatureMap& f) { return Json{{"features", detail::matrix_json(f.values())}}; }

/// {"features": [[phi_k(X)...] per feature k]}.
inline FeatureMap features_from_json(const JsonView& v) {
  v.only({"features"});
  const JsonView values = v.at("features");
  const Eigen::MatrixXd m = values.matrix();
  return values.build([&] { return FeatureMap(m); });
}

inline Json to_json(const LatentStructure& s) {
  Json elements = Json::array();
  for (const auto& e : s.elements()) {
    elements.push_back(Json{{"y", s.y_space().label(e.y)}, {"z", e.z}});
  }
  return Json{{"labels", s.y_space().labels()}, {"elements", elements}};
}

/// {"labels": [Y labels], "z_sets": [[Z labels] per Y]} or
/// {"labels": [...], "elements": [{"y": label, "z": label}...]}.
inline LatentStructure latent_from_json(const JsonView& v) {
  v.only({"labels", "z_sets", "elements"});
  const JsonView labels_view = v.at("labels");
  std::vector<std::string> labels = labels_view.strings();
  const ModelSpace space = labels_view.build([&] { return ModelSpace(labels); });
  if (v.has("z_sets") == v.has("elements")) v.fail("exactly one of z_sets or elements is required");
  if (auto sets = v.find("z_sets")) {
    std::vector<std::vector<std::string>> z;
    for (std::size_t i = 0; i < sets->size(); ++i) z.push_back((*sets)[i].strings());
    return sets->build([&] { return LatentStructure::from_z_sets(labels, z); });
  }
  const JsonView list = v.at("elements");
  std::vector<LatentStructure::Element> elements;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const JsonView e = list[i];
    e.only({"y", "z"});
    const JsonView y = e.at("y");
    const std::string y_label = y.string();
    const auto index = space.index_of(y_label);
    if (!index) y.fail("unknown observed label '" + y_label + "'");
    elements.push_back({*index, e.at("z").string()});
  }
  return list.build([&] { return LatentStructure(labels, std::move(elements)); });
}

inline Json to_json(const PredictionRecord& r) {
  Json j;
  j["true_x"] = r.true_x ? Json(*r.true_x) : Json(nullptr);
  j["prediction"] = detail::vector_json(r.prediction.probs());
  return j;
}

/// {"true_x": index or null, "prediction": [...]}.
inline PredictionRecord prediction_from_json(const JsonView& v) {
  v.only({"true_x", "prediction"});
  PredictionRecord r{std::nullopt, simplex_from_json(v.at("prediction"))};
  if (auto x = v.find("true_x")) r.true_x = static_cast<std::size_t>(x->unsigned_integer());
  return r;
}

/// One PredictionRecord per non-blank line.
inline std::vector<PredictionRecord> read_prediction_stream(std::istream& in,
                                                            const std::string& name) {
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw InvalidInput(where + ": malformed JSON (" + std::string(e.what()) + ")");
    }
    records.push_back(prediction_from_json(JsonView(j, where)));
  }
  return records;
}

inline void write_prediction_stream(std::ostream& out, const std::vector<PredictionRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

// ---- configuration -----------------------------------------------------------

inline Json to_json(const SolverConfig& c) {
  Json j{{"max_iterations", c.max_iterations},
         {"lambda_norm_limit", c.lambda_norm_limit},
         {"convergence_tolerance", c.convergence_tolerance},
         {"initial_learning_rate", c.initial_learning_rate},
         {"learning_rate_increment", c.learning_rate_increment},
         {"oscillation_decay", c.oscillation_decay},
         {"oscillation_window", c.oscillation_window},
         {"oscillation_switch_threshold", c.oscillation_switch_threshold}};
  j["regularization_n"] = c.regularization_n ? Json(*c.regularization_n) : Json(nullptr);
  return j;
}

inline SolverConfig solver_config_from_json(const JsonView& v) {
  v.only({"max_iterations", "lambda_norm_limit", "convergence_tolerance", "initial_learning_rate",
          "learning_rate_increment", "oscillation_decay", "oscillation_window",
          "oscillation_switch_threshold", "regularization_n"});
  SolverConfig c;
  if (auto f = v.find("max_iterations")) c.max_iterations = f->small_integer();
  if (auto f = v.find("lambda_norm_limit")) c.lambda_norm_limit = f->number();
  if (auto f = v.find("convergence_tolerance")) c.convergence_tolerance = f->number();
  if (auto f = v.find("initial_learning_rate")) c.initial_learning_rate = f->number();
  if (auto f = v.find("learning_rate_increment")) c.learning_rate_increment = f->number();
  if (auto f = v.find("oscillation_decay")) c.oscillation_decay = f->number();
  if (auto f = v.find("oscillation_window")) c.oscillation_window = f->small_integer();
  if (auto f = v.find("oscillation_switch_threshold")) {
    c.oscillation_switch_threshold = f->small_integer();
  }
  if (auto f = v.find("regularization_n")) c.regularization_n = f->integer();
  c.validate();
  return c;
}

/// EM settings without the nested solver block (it lives at the top level of a config).
inline Json to_json(const EmConfig& c) {
  return Json{{"max_em_iterations", c.max_em_iterations},
              {"em_convergence_tolerance", c.em_convergence_tolerance},
              {"em_norm_limit", c.em_norm_limit},
              {"restarts", c.restarts},
              {"inner_rate_growth", c.inner_rate_growth},
              {"inner_rate_cap", c.inner_rate_cap},
              {"initial_lambda_range", c.initial_lambda_range},
              {"zero_start_restart", c.zero_start_restart},
              {"seed", c.seed}};
}

inline EmConfig em_config_from_json(const JsonView& v, const SolverConfig& solver) {
  v.only({"max_em_iterations", "em_convergence_tolerance", "em_norm_limit", "restarts",
          "inner_rate_growth", "inner_rate_cap", "initial_lambda_range", "zero_start_restart",
          "seed"});
  EmConfig c;
  c.solver = solver;
  if (auto f = v.find("max_em_iterations")) c.max_em_iterations = f->small_integer();
  if (auto f = v.find("em_convergence_tolerance")) c.em_convergence_tolerance = f->number();
  if (auto f = v.find("em_norm_limit")) c.em_norm_limit = f->number();
  if (auto f = v.find("restarts")) c.restarts = f->small_integer();
  if (auto f = v.find("inner_rate_growth")) c.inner_rate_growth = f->number();
  if (auto f = v.find("inner_rate_cap")) c.inner_rate_cap = f->number();
  if (auto f = v.find("initial_lambda_range")) c.initial_lambda_range = f->number();
  if (auto f = v.find("zero_start_restart")) c.zero_start_restart = f->boolean();
  if (auto f = v.find("seed")) c.seed = f->unsigned_integer();
  c.validate();
  return c;
}

/// Experiment settings without EM/solver blocks.
inline Json to_json(const ExperimentConfig& c) {
  return Json{{"x_size", c.x_size},
              {"omega_sizes", c.omega_sizes},
              {"alpha", c.alphas},
              {"beta", c.betas},
              {"sample_schedule", c.sample_schedule},
              {"repeats", c.repeats},
              {"master_seed", c.master_seed},
              {"variants", c.variants},
              {"x_sizes", c.x_sizes},
              {"temperature", c.temperature},
              {"labeled_samples", c.labeled_samples},
              {"generation_retries", c.generation_retries}};
}

namespace detail {

inline std::vector<double> number_or_list(const JsonView& v) {
  if (v.raw().is_number()) return {v.number()};
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v[i].number());
  return out;
}

template <typename T>
std::vector<T> integer_list(const JsonView& v) {
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::int64_t x = v[i].integer();
    if (x < 0) v[i].fail("expected a non-negative integer");
    out.push_back(static_cast<T>(x));
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const JsonView& v, const EmConfig& em) {
  v.only({"x_size", "omega_sizes", "alpha", "beta", "sample_schedule", "repeats", "master_seed",
          "variants", "x_sizes", "temperature", "labeled_samples", "generation_retries"});
  ExperimentConfig c;
  c.em = em;
  if (auto f = v.find("x_size")) c.x_size = f->integer();
  if (auto f = v.find("omega_sizes")) c.omega_sizes = detail::integer_list<Eigen::Index>(*f);
  if (auto f = v.find("alpha")) c.alphas = detail::number_or_list(*f);
  if (auto f = v.find("beta")) c.betas = detail::number_or_list(*f);
  if (auto f = v.find("sample_schedule")) {
    c.sample_schedule = detail::integer_list<std::size_t>(*f);
  }
  if (auto f = v.find("repeats")) c.repeats = f->small_integer();
  if (auto f = v.find("master_seed")) c.master_seed = f->unsigned_integer();
  if (auto f = v.find("variants")) c.variants = f->strings();
  if (auto f = v.find("x_sizes")) c.x_sizes = detail::integer_list<Eigen::Index>(*f);
  if (auto f = v.find("temperature")) c.temperature = f->number();
  if (auto f = v.find("labeled_samples")) {
    c.labeled_samples = static_cast<std::size_t>(f->unsigned_integer());
  }
  if (auto f = v.find("generation_retries")) c.generation_retries = f->small_integer();
  c.validate();
  return c;
}

/// A complete configuration document: {"version": 1, "solver": {...}, "em": {...}, "experiment": {...}}.
struct RunConfig {
  SolverConfig solver;
  EmConfig em;
  ExperimentConfig experiment;
};

inline RunConfig run_config_from_json(const Json& document, const std::string& name = "config") {
  const JsonView v(document, name);
  v.only({"version", "solver", "em", "experiment"});
  const JsonView version = v.at("version");
  if (version.integer() != kConfigVersion) {
    version.fail("unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  }
  RunConfig c;
  if (auto f = v.find("solver")) c.solver = f->build([&] { return solver_config_from_json(*f); });
  const Json empty = Json::object();
  const auto em_view = v.find("em");
  const JsonView em_source = em_view ? *em_view : JsonView(empty, name + ".em");
  c.em = em_source.build([&] { return em_config_from_json(em_source, c.solver); });
  const auto ex_view = v.find("experiment");
  const JsonView ex_source = ex_view ? *ex_view : JsonView(empty, name + ".experiment");
  c.experiment = ex_source.build([&] { return experiment_config_from_json(ex_source, c.em); });
  return c;
}

inline Json to_json(const RunConfig& c) {
  return Json{{"version", kConfigVersion},
              {"solver", to_json(c.solver)},
              {"em", to_json(c.em)},
              {"experiment", to_json(c.experiment)}};
}

// ---- results -----------------------------------------------------------------

inline Json to_json(const SolveReport& r, const std::vector<std::string>& labels = {}) {
  return Json{{"lambda", detail::vector_json(r.lambda.values())},
              {"posterior", to_json(r.posterior, labels)},
              {"entropy", entropy(r.posterior)},
              {"iterations", r.iterations},
              {"stop_reason", std::string(to_string(r.stop_reason))},
              {"converged", r.stop_reason == StopReason::converged},
              {"final_gradient_linf", r.final_gradient_linf},
              {"final_learning_rate", r.final_learning_rate}};
}

inline Json to_json(const UMaxEntResult& r, const std::vector<std::string>& labels = {}) {
  return Json{{"lambda", detail::vector_json(r.lambda.values())},
              {"posterior", to_json(r.posterior, labels)},
              {"entropy", r.entropy},
              {"em_iterations", r.em_iterations},
              {"restarts_used", r.restarts_used},
              {"selected_restart", r.selected_restart},
              {"constraint_residual_linf", r.constraint_residual_linf},
              {"log_likelihood", std::isfinite(r.log_likelihood) ? Json(r.log_likelihood)
                                                                 : Json(nullptr)},
              {"converged", r.converged},
              {"likelihood_trace", r.likelihood_trace}};
}

inline Json to_json(const ConfusionModel& m) {
  return Json{{"channel", detail::matrix_json(m.channel)}, {"counts", m.counts}};
}

/// Run metadata written next to an experiment CSV.
inline Json experiment_metadata(const std::string& experiment, const RunConfig& config,
                                std::size_t rows) {
  return Json{{"experiment", experiment},
              {"code_version", kLibraryVersion},
              {"config", to_json(config)},
              {"master_seed", config.experiment.master_seed},
              {"seed_derivation",
               "trial seed = mix_seed(master_seed, study, configuration index, repeat); "
               "EM seed = mix_seed(trial seed, N); restart r seed = mix_seed(EM seed, r)"},
              {"std_convention", "population (divide by n)"},
              {"csv_header", kCsvHeader},
              {"rows", rows}};
}

}  // namespace umaxent
