#pragma once

// Desk-scale experiment runners: random models, negative observations, and the
// synthetic black-box pipeline. Every (configuration, repeat) unit draws its
// randomness from mix_seed(master_seed, experiment, configuration, repeat), so
// results do not depend on scheduling or the number of worker threads.

#include "umaxent/blackbox.hpp"
#include "umaxent/generators.hpp"
#include "umaxent/uncertain.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace umaxent {

inline const std::vector<std::string>& random_model_variants() {
  static const std::vector<std::string> names = {"true_x",     "ml_x",    "true_bar",
                                                 "uniform_bar", "umaxent", "umaxent_regularized"};
  return names;
}

inline const std::vector<std::string>& negative_obs_variants() {
  static const std::vector<std::string> names = {"umaxent", "ml_x"};
  return names;
}

inline const std::vector<std::string>& blackbox_variants() {
  static const std::vector<std::string> names = {"umaxent_blackbox", "just_aggregation",
                                                 "umaxent_known_channel"};
  return names;
}

struct ExperimentConfig {
  Eigen::Index x_size = 10;
  std::vector<Eigen::Index> omega_sizes = {10, 20, 50, 100, 150, 200, 300};
  std::vector<double> alphas = {1, 2, 3, 4, 5};
  std::vector<double> betas = {1, 2, 3, 4, 5};
  std::vector<std::size_t> sample_schedule = default_schedule(18);
  int repeats = 100;
  std::uint64_t master_seed = 0;
  std::vector<std::string> variants = random_model_variants();
  /// Model sizes for the negative-observation study (|Omega| = |X|).
  std::vector<Eigen::Index> x_sizes = {10, 50};
  /// Black-box study: predictor temperature and labeled-sample budget (uniform over X).
  double temperature = 2.0;
  std::size_t labeled_samples = 10000;
  int generation_retries = kDefaultGenerationRetries;
  EmConfig em;

  /// {2^0, 2^1, ..., 2^max_exponent}.
  static std::vector<std::size_t> default_schedule(int max_exponent) {
    std::vector<std::size_t> s;
    for (int e = 0; e <= max_exponent; ++e) s.push_back(std::size_t{1} << e);
    return s;
  }

  void validate() const {
    if (x_size < 1) throw InvalidInput("experiment.x_size must be positive");
    if (repeats < 1) throw InvalidInput("experiment.repeats must be >= 1");
    if (sample_schedule.empty()) throw InvalidInput("experiment.sample_schedule is empty");
    if (sample_schedule.front() < 1) throw InvalidInput("experiment.sample_schedule must be >= 1");
    for (std::size_t i = 1; i < sample_schedule.size(); ++i) {
      if (sample_schedule[i] <= sample_schedule[i - 1]) {
        throw InvalidInput("experiment.sample_schedule must be strictly increasing");
      }
    }
    if (!(temperature > 0)) throw InvalidInput("experiment.temperature must be positive");
    if (labeled_samples < 1) throw InvalidInput("experiment.labeled_samples must be positive");
    if (omega_sizes.empty()) throw InvalidInput("experiment.omega_sizes is empty");
    if (x_sizes.empty()) throw InvalidInput("experiment.x_sizes is empty");
    if (alphas.empty()) throw InvalidInput("experiment.alpha is empty");
    if (betas.empty()) throw InvalidInput("experiment.beta is empty");
    const auto& known = random_model_variants();
    for (const std::string& v : variants) {
      if (std::find(known.begin(), known.end(), v) == known.end()) {
        throw InvalidInput("experiment.variants: unknown variant '" + v + "'");
      }
    }
    em.validate();
  }

  std::size_t max_samples() const { return sample_schedule.back(); }
};

struct TrialResult {
  std::string variant;
  Eigen::Index omega_size = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t n_samples = 0;
  int repeat = 0;
  double jsd_to_truth = 0.0;
  double posterior_entropy = 0.0;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
};

/// Worker-count-independent parallel loop over [0, count).
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

namespace detail {

enum class Study : std::uint64_t { random_models = 1, negative_obs = 2, blackbox = 3 };

struct Cell {
  Eigen::Index omega_size;
  double alpha;
  double beta;
};

inline bool enabled(const ExperimentConfig& c, const std::string& variant) {
  return std::find(c.variants.begin(), c.variants.end(), variant) != c.variants.end();
}

template <typename Solve>
TrialResult run_variant(const std::string& variant, const Cell& cell, std::size_t n, int repeat,
                        std::uint64_t seed, const Simplex& truth, Solve&& solve) {
  TrialResult t{variant, cell.omega_size, cell.alpha, cell.beta, n, repeat, 0.0, 0.0, false, 0,
                seed};
  try {
    const auto [posterior, converged, iterations] = solve();
    t.jsd_to_truth = jsd(posterior, truth);
    t.posterior_entropy = entropy(posterior);
    t.converged = converged;
    t.iterations = iterations;
  } catch (const Error&) {
    // Failed trial: recorded as non-converged with the uninformed (uniform) answer.
    const Simplex u = Simplex::uniform(truth.size());
    t.jsd_to_truth = jsd(u, truth);
    t.posterior_entropy = entropy(u);
  }
  return t;
}

using Outcome = std::tuple<Simplex, bool, int>;

inline Outcome outcome(const SolveReport& r) {
  return {r.posterior, r.stop_reason == StopReason::converged, r.iterations};
}

inline Outcome outcome(const UMaxEntResult& r) { return {r.posterior, r.converged, r.em_iterations}; }

template <typename Unit>
std::vector<TrialResult> run_units(std::size_t units, int jobs, const ProgressFn& progress,
                                   Unit&& unit) {
  std::vector<std::vector<TrialResult>> per_unit(units);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(units, jobs, [&](std::size_t u) {
    per_unit[u] = unit(u);
    const std::size_t d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(d, units);
    }
  });
  std::vector<TrialResult> all;
  for (auto& v : per_unit) all.insert(all.end(), v.begin(), v.end());
  return all;
}

/// Configurations of the random-channel studies, in output order.
inline std::vector<Cell> channel_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto m : config.omega_sizes)
    for (double a : config.alphas)
      for (double b : config.betas) cells.push_back({m, a, b});
  return cells;
}

}  // namespace detail

/// Truth and channel of one random-channel trial, with the generator positioned
/// where the trial continues drawing its dataset.
struct RandomInstance {
  std::uint64_t seed;
  Rng rng;
  Simplex truth;
  ObservationModel obs;
};

inline RandomInstance random_instance(const ExperimentConfig& config, detail::Study study,
                                      std::size_t config_index, int repeat) {
  const auto cells = detail::channel_cells(config);
  const detail::Cell& cell = cells.at(config_index);
  const std::uint64_t seed = mix_seed({config.master_seed, static_cast<std::uint64_t>(study),
                                       config_index, static_cast<std::uint64_t>(repeat)});
  Rng rng(seed);
  Simplex truth = gen_true_distribution(cell.alpha, config.x_size, rng);
  ObservationModel obs = gen_observation_model(cell.beta, config.x_size, cell.omega_size, rng,
                                               config.generation_retries);
  return {seed, std::move(rng), std::move(truth), std::move(obs)};
}

/// Canonical ordering used for output: configuration, repeat, N, variant name.
inline void sort_results(std::vector<TrialResult>& results) {
  std::sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.omega_size, a.alpha, a.beta, a.repeat, a.n_samples, a.variant) <
           std::tie(b.omega_size, b.alpha, b.beta, b.repeat, b.n_samples, b.variant);
  });
}

/// Random observation models: every enabled variant at every N of the schedule.
inline std::vector<TrialResult> run_random_models(const ExperimentConfig& config, int jobs = 1,
                                                  const ProgressFn& progress = {}) {
  config.validate();
  const std::vector<detail::Cell> cells = detail::channel_cells(config);
  const auto reps = static_cast<std::size_t>(config.repeats);
  const FeatureMap features = FeatureMap::indicators(config.x_size);

  auto results = detail::run_units(cells.size() * reps, jobs, progress, [&](std::size_t u) {
    const std::size_t ci = u / reps;
    const int repeat = static_cast<int>(u % reps);
    const detail::Cell& cell = cells[ci];
    RandomInstance inst = random_instance(config, detail::Study::random_models, ci, repeat);
    const std::uint64_t seed = inst.seed;
    Rng& rng = inst.rng;
    const Simplex& truth = inst.truth;
    const ObservationModel& obs = inst.obs;
    const Dataset data = draw_dataset(truth, obs, config.max_samples(), rng);
    const Simplex uniform = Simplex::uniform(config.x_size);

    std::vector<TrialResult> out;
    for (std::size_t n : config.sample_schedule) {
      const Simplex emp_x = data.empirical_x(n);
      const Simplex emp_w = data.empirical_omega(n);
      EmConfig em = config.em;
      em.seed = mix_seed({seed, n});
      auto add = [&](const std::string& name, auto&& solve) {
        if (detail::enabled(config, name)) {
          out.push_back(detail::run_variant(name, cell, n, repeat, seed, truth, solve));
        }
      };
      add("true_x", [&] { return detail::outcome(solve_maxent(emp_x, features, em.solver)); });
      add("ml_x", [&] { return detail::outcome(solve_ml_x(emp_w, obs, features, em.solver)); });
      add("true_bar", [&] {
        return detail::outcome(solve_fixed_bar(truth, emp_w, obs, features, em.solver));
      });
      add("uniform_bar", [&] {
        return detail::outcome(solve_fixed_bar(uniform, emp_w, obs, features, em.solver));
      });
      add("umaxent", [&] { return detail::outcome(solve_umaxent(emp_w, obs, features, em)); });
      add("umaxent_regularized", [&] {
        EmConfig reg = em;
        reg.solver.regularization_n = static_cast<std::int64_t>(n);
        return detail::outcome(solve_umaxent(emp_w, obs, features, reg));
      });
    }
    return out;
  });
  sort_results(results);
  return results;
}

/// Negative observations (|Omega| = |X|): uncertain maximum entropy vs most-likely-X.
inline std::vector<TrialResult> run_negative_obs(const ExperimentConfig& config, int jobs = 1,
                                                 const ProgressFn& progress = {}) {
  config.validate();
  std::vector<detail::Cell> cells;
  for (auto n : config.x_sizes)
    for (double a : config.alphas) cells.push_back({n, a, 0.0});
  const auto reps = static_cast<std::size_t>(config.repeats);

  auto results = detail::run_units(cells.size() * reps, jobs, progress, [&](std::size_t u) {
    const std::size_t ci = u / reps;
    const int repeat = static_cast<int>(u % reps);
    const detail::Cell& cell = cells[ci];
    const std::uint64_t seed =
        mix_seed({config.master_seed, static_cast<std::uint64_t>(detail::Study::negative_obs), ci,
                  static_cast<std::uint64_t>(repeat)});
    Rng rng(seed);
    const Simplex truth = gen_true_distribution(cell.alpha, cell.omega_size, rng);
    const ObservationModel obs = gen_negative_observation_model(cell.omega_size);
    const FeatureMap features = FeatureMap::indicators(cell.omega_size);
    const Dataset data = draw_dataset(truth, obs, config.max_samples(), rng);

    std::vector<TrialResult> out;
    for (std::size_t n : config.sample_schedule) {
      const Simplex emp_w = data.empirical_omega(n);
      EmConfig em = config.em;
      em.seed = mix_seed({seed, n});
      out.push_back(detail::run_variant("umaxent", cell, n, repeat, seed, truth, [&] {
        return detail::outcome(solve_umaxent(emp_w, obs, features, em));
      }));
      out.push_back(detail::run_variant("ml_x", cell, n, repeat, seed, truth, [&] {
        return detail::outcome(solve_ml_x(emp_w, obs, features, em.solver));
      }));
    }
    return out;
  });
  sort_results(results);
  return results;
}

/// Synthetic black-box pipeline: confusion estimated from labeled predictions,
/// compared with plain aggregation and with the known channel.
inline std::vector<TrialResult> run_blackbox(const ExperimentConfig& config, int jobs = 1,
                                             const ProgressFn& progress = {}) {
  config.validate();
  const std::vector<detail::Cell> cells = detail::channel_cells(config);
  const auto reps = static_cast<std::size_t>(config.repeats);
  const FeatureMap features = FeatureMap::indicators(config.x_size);
  const auto x_count = static_cast<std::size_t>(config.x_size);

  auto results = detail::run_units(cells.size() * reps, jobs, progress, [&](std::size_t u) {
    const std::size_t ci = u / reps;
    const int repeat = static_cast<int>(u % reps);
    const detail::Cell& cell = cells[ci];
    RandomInstance inst = random_instance(config, detail::Study::blackbox, ci, repeat);
    const std::uint64_t seed = inst.seed;
    Rng& rng = inst.rng;
    const Simplex& truth = inst.truth;
    const ObservationModel& obs = inst.obs;
    SyntheticBlackBox box(obs, config.temperature, mix_seed({seed, 1}));

    std::vector<PredictionRecord> labeled;
    labeled.reserve(config.labeled_samples);
    for (std::size_t i = 0; i < config.labeled_samples; ++i) {
      labeled.push_back(box.draw(rng.index(x_count), true).second);
    }
    const ConfusionModel confusion = estimate_confusion(labeled);
    const Dataset data = draw_dataset(truth, obs, config.max_samples(), rng);

    std::vector<TrialResult> out;
    Eigen::VectorXd running = Eigen::VectorXd::Zero(config.x_size);
    std::size_t consumed = 0;
    for (std::size_t n : config.sample_schedule) {
      for (; consumed < n; ++consumed) running += box.predict(data.omega[consumed]).probs();
      const Simplex ptilde = Simplex::from_weights(running);
      const Simplex emp_w = data.empirical_omega(n);
      EmConfig em = config.em;
      em.seed = mix_seed({seed, n});
      out.push_back(detail::run_variant("umaxent_blackbox", cell, n, repeat, seed, truth, [&] {
        return detail::outcome(solve_umaxent_blackbox(ptilde, confusion, features, em));
      }));
      out.push_back(detail::run_variant("just_aggregation", cell, n, repeat, seed, truth, [&] {
        return detail::Outcome{ptilde, true, 0};
      }));
      out.push_back(detail::run_variant("umaxent_known_channel", cell, n, repeat, seed, truth, [&] {
        return detail::outcome(solve_umaxent(emp_w, obs, features, em));
      }));
    }
    return out;
  });
  sort_results(results);
  return results;
}

struct SummaryRow {
  std::string variant;
  Eigen::Index omega_size = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t n_samples = 0;
  std::size_t count = 0;
  double mean_jsd = 0.0;
  /// Population standard deviation (divides by the group size).
  double std_jsd = 0.0;
};

/// Mean and population standard deviation of JSD per (variant, configuration, N).
inline std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results) {
  if (results.empty()) throw InvalidInput("summarize: no results");
  using Key = std::tuple<std::string, Eigen::Index, double, double, std::size_t>;
  std::map<Key, std::vector<double>> groups;
  for (const TrialResult& t : results) {
    groups[{t.variant, t.omega_size, t.alpha, t.beta, t.n_samples}].push_back(t.jsd_to_truth);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, values] : groups) {
    SummaryRow row;
    std::tie(row.variant, row.omega_size, row.alpha, row.beta, row.n_samples) = key;
    row.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean_jsd = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - row.mean_jsd) * (v - row.mean_jsd);
    row.std_jsd = std::sqrt(var / static_cast<double>(values.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline constexpr const char* kCsvHeader =
    "variant,omega_size,alpha,beta,n_samples,repeat,jsd,entropy,converged,iterations,seed";

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes the header and one line per trial in the given order.
inline void write_csv(std::ostream& out, const std::vector<TrialResult>& results) {
  out << kCsvHeader << '\n';
  for (const TrialResult& t : results) {
    out << t.variant << ',' << t.omega_size << ',' << detail::format_double(t.alpha) << ','
        << detail::format_double(t.beta) << ',' << t.n_samples << ',' << t.repeat << ','
        << detail::format_double(t.jsd_to_truth) << ','
        << detail::format_double(t.posterior_entropy) << ',' << (t.converged ? 1 : 0) << ','
        << t.iterations << ',' << t.seed << '\n';
  }
}

}  // namespace umaxent
