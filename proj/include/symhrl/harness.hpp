#pragma once
// Experiment orchestration: one directory per seed with metrics CSV, event
// log, checkpoint and extracted rules; aggregation across seeds; SVG curves.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symhrl/agent.hpp"
#include "symhrl/config.hpp"

namespace symhrl::harness {

struct MetricsRow {
  int episode = 0;
  std::string kind;  // "real" or "model"
  std::int64_t cumulative_real_steps = 0;
  double ret = 0.0;
  bool success = false;
  double mean_subtask_t = 0.0;
  std::size_t clause_count = 0;
};

std::string csv_header();
std::string csv_row(const agent::EpisodeReport& r);
std::vector<MetricsRow> read_metrics(const std::string& path);

struct SolvePoint {
  int real_episode = 0;  // 1-based count of real episodes
  std::int64_t real_steps = 0;
};

// First real episode after which the last `window` real episodes succeeded
// at a rate of at least `rate`.
std::optional<SolvePoint> solve_point(const std::vector<MetricsRow>& rows, std::size_t window = 32, double rate = 0.9);

// (cumulative real steps, real episode count, trailing success rate) per real episode.
struct CurvePoint {
  double steps = 0.0;
  double episode = 0.0;
  double value = 0.0;
};
std::vector<CurvePoint> success_curve(const std::vector<MetricsRow>& rows, std::size_t window = 32);
std::vector<CurvePoint> subtask_curve(const std::vector<MetricsRow>& rows);

// Linear-interpolated quantile of unsorted values; +inf entries sort last.
double quantile(std::vector<double> values, double q);

struct Summary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int solved = 0;
  int total = 0;
};
// Unsolved runs enter as +inf.
Summary summarise(const std::vector<std::optional<double>>& values);

std::string rules_text(const model::SymbolicModel& m, double threshold);

struct SeedRun {
  std::uint64_t seed = 0;
  std::string dir;
  std::optional<SolvePoint> solve;
  int episodes = 0;
  int real_episodes = 0;
  std::int64_t real_steps = 0;
  double final_subtask_t = 0.0;
  std::string rules;
};

struct RunReport {
  std::vector<SeedRun> seeds;
  Summary episodes_to_solve;
  Summary steps_to_solve;
};

using Progress = std::function<void(const std::string&)>;
// Called after every episode with the agent in its post-episode state. With
// run.jobs > 1 it is called from several threads at once.
using EpisodeHook = std::function<void(std::uint64_t seed, const agent::Agent&, const agent::EpisodeReport&)>;

SeedRun run_seed(const config::Config& cfg, std::uint64_t seed, const std::string& dir, const Progress& progress = {},
                 const EpisodeHook& hook = {});
// Runs every seed in run.seeds (up to run.jobs at a time) under run.output
// and writes report.json there.
RunReport run_all(const config::Config& cfg, const Progress& progress = {}, const EpisodeHook& hook = {});
nlohmann::json report_json(const RunReport& r);

// Agent checkpoint plus the effective config needed to rebuild its world.
nlohmann::json read_checkpoint(const std::string& path);
config::Config checkpoint_config(const nlohmann::json& checkpoint);

struct Series {
  std::string label;
  std::vector<std::vector<CurvePoint>> runs;  // one curve per seed
};
enum class XAxis { Steps, Episodes };
// Median line and min-max band per series on a shared 100-point grid.
// The output depends only on the input values.
std::string svg_plot(const std::vector<Series>& series, XAxis x, const std::string& title, const std::string& y_label);

}  // namespace symhrl::harness
