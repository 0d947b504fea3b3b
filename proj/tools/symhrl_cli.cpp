// symhrl-cli: train, evaluate, export rules and plot learning curves.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "symhrl/harness.hpp"

namespace fs = std::filesystem;
using namespace symhrl;

namespace {

config::Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  config::Config cfg;
  if (!path.empty()) cfg.load_file(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides, bool no_model,
              const std::string& pretrained, const std::string& output, int jobs, bool quiet) {
  auto cfg = load_config(config_path, overrides);
  if (no_model) cfg.set("run.no_model", "true");
  if (!pretrained.empty()) cfg.set("run.pretrained_model", pretrained);
  if (!output.empty()) cfg.set("run.output", output);
  if (jobs > 0) cfg.set("run.jobs", std::to_string(jobs));
  const auto report = harness::run_all(cfg, quiet ? harness::Progress{} : [](const std::string& m) { std::cerr << m << "\n"; });
  for (const auto& s : report.seeds) {
    std::cout << "seed " << s.seed << ": " << s.real_episodes << " real episodes, " << s.real_steps << " real steps, ";
    if (s.solve)
      std::cout << "solved at real episode " << s.solve->real_episode << " (" << s.solve->real_steps << " steps)\n";
    else
      std::cout << "not solved\n";
  }
  const auto& e = report.episodes_to_solve;
  std::cout << "episodes to solve: median " << e.median << " IQR [" << e.q25 << ", " << e.q75 << "] solved " << e.solved
            << "/" << e.total << "\n";
  std::cout << "report: " << (fs::path(cfg.get("run.output")) / "report.json").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, const std::vector<std::string>& overrides,
             int episodes) {
  if (episodes < 1) throw std::invalid_argument("--episodes must be at least 1");
  const auto ckpt = harness::read_checkpoint(checkpoint_path);
  auto cfg = harness::checkpoint_config(ckpt);
  if (!config_path.empty()) cfg.load_file(config_path);
  for (const auto& o : overrides) cfg.apply_override(o);
  auto env = config::make_environment(cfg);
  agent::Agent agent(*env, config::agent_config(cfg, 0), config::model_config(cfg, 0), config::option_config(cfg, 0));
  agent.load_json(ckpt);
  int wins = 0;
  double steps = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const auto r = agent.evaluate_episode(static_cast<std::uint64_t>(100000 + i));
    wins += r.success;
    steps += static_cast<double>(r.real_steps);
  }
  std::cout << "episodes " << episodes << " success_rate " << static_cast<double>(wins) / episodes << " mean_steps "
            << steps / episodes << "\n";
  return 0;
}

int cmd_export(const std::string& checkpoint_path, double threshold, const std::string& output) {
  const auto ckpt = harness::read_checkpoint(checkpoint_path);
  auto cfg = harness::checkpoint_config(ckpt);
  auto env = config::make_environment(cfg);
  model::SymbolicModel m(env->vocab(), config::model_config(cfg, 0));
  m.load_json(ckpt.at("model"), false);
  const auto text = harness::rules_text(m, threshold < 0 ? cfg.number("run.rule_threshold") : threshold);
  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    out << text;
  }
  return 0;
}

std::vector<std::string> metrics_files(const std::string& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
  if (fs::exists(fs::path(dir) / "metrics.csv")) out.push_back((fs::path(dir) / "metrics.csv").string());
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) out.push_back((entry.path() / "metrics.csv").string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error(dir + " contains no metrics.csv");
  return out;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& output, const std::string& x, const std::string& metric,
             int window) {
  std::vector<harness::Series> series;
  for (const auto& d : dirs) {
    harness::Series s;
    s.label = fs::path(d).filename().string();
    if (s.label.empty()) s.label = fs::path(d).parent_path().filename().string();
    for (const auto& f : metrics_files(d)) {
      const auto rows = harness::read_metrics(f);
      s.runs.push_back(metric == "subtask" ? harness::subtask_curve(rows)
                                           : harness::success_curve(rows, static_cast<std::size_t>(window)));
    }
    series.push_back(std::move(s));
  }
  const auto axis = x == "episodes" ? harness::XAxis::Episodes : harness::XAxis::Steps;
  const std::string y = metric == "subtask" ? "mean subtask success rate" : "success (last " + std::to_string(window) + ")";
  const auto svg = harness::svg_plot(series, axis, metric == "subtask" ? "Subtask success" : "Learning curve", y);
  std::ofstream out(output, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + output);
  out << svg;
  std::cout << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical RL with a learned symbolic transition model"};
  app.require_subcommand(1);

  std::string config_path, pretrained, output, checkpoint;
  std::vector<std::string> overrides, dirs;
  bool no_model = false, quiet = false;
  int jobs = 0, episodes = 100, window = 32;
  double threshold = -1.0;
  std::string x_axis = "steps", metric = "success";

  auto* train = app.add_subcommand("train", "Train one agent per seed");
  train->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
  train->add_option("-s,--set", overrides, "Override, key=value (repeatable)");
  train->add_flag("--no-model", no_model, "Skip imagined episodes");
  train->add_option("--pretrained-model", pretrained, "Start from the symbolic model of this checkpoint")
      ->check(CLI::ExistingFile);
  train->add_option("-o,--output", output, "Output directory");
  train->add_option("-j,--jobs", jobs, "Seeds trained in parallel");
  train->add_flag("-q,--quiet", quiet, "No progress on stderr");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("checkpoint", checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  eval->add_option("-c,--config", config_path, "Config file applied over the checkpoint's config")->check(CLI::ExistingFile);
  eval->add_option("-s,--set", overrides, "Override, key=value (repeatable)");
  eval->add_option("-n,--episodes", episodes, "Evaluation episodes");

  auto* exp = app.add_subcommand("export-rules", "Print the rules of a checkpoint above a threshold");
  exp->add_option("checkpoint", checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  exp->add_option("-t,--threshold", threshold, "Rule weight threshold (default: run.rule_threshold)");
  exp->add_option("-o,--output", output, "Rule file (default: stdout)");

  auto* plot = app.add_subcommand("plot", "SVG learning curves, one series per run directory");
  plot->add_option("dirs", dirs, "Run directories")->required();
  plot->add_option("-o,--output", output, "SVG file")->required();
  plot->add_option("-x,--x-axis", x_axis, "steps or episodes")->check(CLI::IsMember({"steps", "episodes"}));
  plot->add_option("-m,--metric", metric, "success or subtask")->check(CLI::IsMember({"success", "subtask"}));
  plot->add_option("-w,--window", window, "Moving-average window")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(config_path, overrides, no_model, pretrained, output, jobs, quiet);
    if (eval->parsed()) return cmd_eval(checkpoint, config_path, overrides, episodes);
    if (exp->parsed()) return cmd_export(checkpoint, threshold, output);
    if (plot->parsed()) return cmd_plot(dirs, output, x_axis, metric, window);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
