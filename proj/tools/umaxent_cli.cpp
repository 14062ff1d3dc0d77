// Command-line front end: one-off solves from problem files and the three
// experiment studies. Exit codes: 0 success (converged), 2 solved but not
// converged, 1 input or runtime error.

#include "umaxent/umaxent.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace umaxent;

const std::vector<std::string> kSubcommands = {"solve", "random-models", "negative-obs",
                                               "blackbox"};

std::string subcommand_list() {
  std::string s;
  for (const auto& c : kSubcommands) s += (s.empty() ? "" : ", ") + c;
  return s;
}

struct Manifest {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string problem_path;
};

RunConfig load_config(const Manifest& m) {
  RunConfig config;
  if (!m.config_path.empty()) config = run_config_from_json(read_json_file(m.config_path), "config");
  if (m.seed) {
    config.em.seed = *m.seed;
    config.experiment.master_seed = *m.seed;
    config.experiment.em.seed = *m.seed;
  }
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  const fs::path out = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error("cannot create output directory " + out.string());
  return out;
}

int cmd_solve(const Manifest& m) {
  const RunConfig config = load_config(m);
  const fs::path problem(m.problem_path);
  const ProblemOutcome outcome =
      solve_problem(read_json_file(problem), config, problem.parent_path(), "problem");
  const std::string text = outcome.result.dump(2) + "\n";
  if (m.out_dir.empty()) {
    std::cout << text;
  } else {
    const fs::path file = prepare_out_dir(m.out_dir) / "result.json";
    write_file(file, text);
    std::cerr << "wrote " << file.string() << '\n';
  }
  if (!outcome.converged) std::cerr << "warning: solver did not converge\n";
  return outcome.converged ? 0 : 2;
}

int cmd_experiment(const std::string& name, const Manifest& m) {
  const RunConfig config = load_config(m);
  const fs::path out = prepare_out_dir(m.out_dir);
  int last_percent = -1;
  const ProgressFn progress = [&](std::size_t done, std::size_t total) {
    const int percent = static_cast<int>(100 * done / total);
    if (percent != last_percent || done == total) {
      last_percent = percent;
      std::cerr << name << ": " << done << "/" << total << " units (" << percent << "%)\n";
    }
  };
  std::vector<TrialResult> results;
  if (name == "random-models") {
    results = run_random_models(config.experiment, m.jobs, progress);
  } else if (name == "negative-obs") {
    results = run_negative_obs(config.experiment, m.jobs, progress);
  } else {
    results = run_blackbox(config.experiment, m.jobs, progress);
  }
  std::ostringstream csv;
  write_csv(csv, results);
  write_file(out / (name + ".csv"), csv.str());
  write_file(out / (name + ".meta.json"),
             experiment_metadata(name, config, results.size()).dump(2) + "\n");
  std::cerr << "wrote " << (out / (name + ".csv")).string() << " (" << results.size()
            << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2) {
    const std::string first = argv[1];
    if (!first.starts_with("-") &&
        std::find(kSubcommands.begin(), kSubcommands.end(), first) == kSubcommands.end()) {
      std::cerr << "error: unknown subcommand '" << first << "' (valid: " << subcommand_list()
                << ")\n";
      return 1;
    }
  }

  CLI::App app{"Uncertain maximum entropy solver and experiment runner"};
  app.require_subcommand(1);
  Manifest manifest;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", manifest.config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", manifest.out_dir, "Output directory");
    sub->add_option("--seed", manifest.seed, "Override the master seed");
    sub->add_option("--jobs", manifest.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve one problem file");
  solve->add_option("problem", manifest.problem_path, "Problem JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(solve);
  for (const std::string name : {"random-models", "negative-obs", "blackbox"}) {
    add_common(app.add_subcommand(name, "Run the " + name + " experiment"));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0 && app.get_subcommands().empty()) {
      std::cerr << "valid subcommands: " << subcommand_list() << '\n';
    }
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(manifest);
    for (CLI::App* sub : app.get_subcommands()) return cmd_experiment(sub->get_name(), manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
