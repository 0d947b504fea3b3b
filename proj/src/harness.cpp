#include "symhrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace symhrl::harness {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

// ------------------------------------------------------------------- metrics

std::string csv_header() { return "episode,kind,cumulative_real_steps,return,success,mean_subtask_t,clause_count\n"; }

std::string csv_row(const agent::EpisodeReport& r) {
  return std::to_string(r.episode) + "," + std::string(agent::kind_name(r.kind)) + "," +
         std::to_string(r.cumulative_real_steps) + "," + fmt("%.6f", r.ret) + "," + (r.success ? "1" : "0") + "," +
         fmt("%.6f", r.mean_subtask_t) + "," + std::to_string(r.clause_count) + "\n";
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics file " + path);
  std::string line;
  std::getline(in, line);
  if (line + "\n" != csv_header()) throw std::runtime_error(path + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[7];
    for (auto& field : f) std::getline(ls, field, ',');
    MetricsRow r;
    r.episode = std::stoi(f[0]);
    r.kind = f[1];
    r.cumulative_real_steps = std::stoll(f[2]);
    r.ret = std::stod(f[3]);
    r.success = f[4] == "1";
    r.mean_subtask_t = std::stod(f[5]);
    r.clause_count = std::stoull(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::optional<SolvePoint> solve_point(const std::vector<MetricsRow>& rows, std::size_t window, double rate) {
  std::deque<bool> recent;
  int wins = 0, real = 0;
  for (const auto& r : rows) {
    if (r.kind != "real") continue;
    ++real;
    recent.push_back(r.success);
    wins += r.success;
    if (recent.size() > window) {
      wins -= recent.front();
      recent.pop_front();
    }
    if (recent.size() == window && wins >= rate * static_cast<double>(window) - 1e-9)
      return SolvePoint{real, r.cumulative_real_steps};
  }
  return std::nullopt;
}

std::vector<CurvePoint> success_curve(const std::vector<MetricsRow>& rows, std::size_t window) {
  std::vector<CurvePoint> out;
  std::deque<bool> recent;
  int wins = 0, real = 0;
  for (const auto& r : rows) {
    if (r.kind != "real") continue;
    ++real;
    recent.push_back(r.success);
    wins += r.success;
    if (recent.size() > window) {
      wins -= recent.front();
      recent.pop_front();
    }
    out.push_back({static_cast<double>(r.cumulative_real_steps), static_cast<double>(real),
                   static_cast<double>(wins) / static_cast<double>(recent.size())});
  }
  return out;
}

std::vector<CurvePoint> subtask_curve(const std::vector<MetricsRow>& rows) {
  std::vector<CurvePoint> out;
  int real = 0;
  for (const auto& r : rows) {
    if (r.kind != "real") continue;
    ++real;
    out.push_back({static_cast<double>(r.cumulative_real_steps), static_cast<double>(real), r.mean_subtask_t});
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || values[lo] == values[hi]) return values[lo];
  if (std::isinf(values[hi])) return values[hi];
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarise(const std::vector<std::optional<double>>& values) {
  Summary s;
  s.total = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::vector<double> xs;
  for (const auto& v : values) {
    xs.push_back(v ? *v : std::numeric_limits<double>::infinity());
    s.solved += v.has_value();
  }
  s.median = quantile(xs, 0.5);
  s.q25 = quantile(xs, 0.25);
  s.q75 = quantile(xs, 0.75);
  return s;
}

std::string rules_text(const model::SymbolicModel& m, double threshold) {
  std::string out = "# preconditions\n";
  for (const auto& c : m.pre_rules(threshold)) out += logic::format_clause(c, m.vocab()) + "\n";
  out += "# effects\n";
  for (const auto& c : m.eff_rules(threshold)) out += logic::format_clause(c, m.vocab()) + "\n";
  return out;
}

// ------------------------------------------------------------------ running

SeedRun run_seed(const config::Config& cfg, std::uint64_t seed, const std::string& dir, const Progress& progress,
                 const EpisodeHook& hook) {
  fs::create_directories(dir);
  auto env = config::make_environment(cfg);
  agent::Agent agent(*env, config::agent_config(cfg, seed), config::model_config(cfg, seed),
                     config::option_config(cfg, seed));
  if (const auto& pre = cfg.get("run.pretrained_model"); !pre.empty()) agent.load_model(read_checkpoint(pre));

  write_file(fs::path(dir) / "effective.cfg", cfg.dump());
  std::ofstream csv(fs::path(dir) / "metrics.csv", std::ios::binary);
  std::ofstream events(fs::path(dir) / "events.jsonl", std::ios::binary);
  csv << csv_header();
  agent.set_event_sink([&](const nlohmann::json& ev) { events << ev.dump() << "\n"; });

  const int episodes = static_cast<int>(cfg.integer("run.episodes"));
  if (episodes < 1) throw config::ConfigError("run.episodes must be at least 1");
  const auto window = static_cast<std::size_t>(cfg.integer("run.solve_window"));
  const double rate = cfg.number("run.solve_rate");
  const double threshold = cfg.number("run.rule_threshold");
  const int rules_every = static_cast<int>(cfg.integer("run.rules_every"));
  const bool stop = cfg.flag("run.stop_when_solved");

  SeedRun out;
  out.seed = seed;
  out.dir = dir;
  std::vector<MetricsRow> rows;
  for (int e = 0; e < episodes; ++e) {
    const auto report = agent.run_episode(e);
    if (hook) hook(seed, agent, report);
    const auto line = csv_row(report);
    csv << line;
    rows.push_back({report.episode, std::string(agent::kind_name(report.kind)), report.cumulative_real_steps,
                    report.ret, report.success, report.mean_subtask_t, report.clause_count});
    out.episodes = e + 1;
    if (rules_every > 0 && (e + 1) % rules_every == 0) {
      events << nlohmann::json{{"event", "rules"}, {"episode", e}, {"text", rules_text(agent.symbolic_model(), threshold)}}.dump()
             << "\n";
      if (progress)
        progress("seed " + std::to_string(seed) + " episode " + std::to_string(e + 1) + " real steps " +
                 std::to_string(report.cumulative_real_steps) + " subtask t " + fmt("%.3f", report.mean_subtask_t));
    }
    if (!out.solve) {
      out.solve = solve_point(rows, window, rate);
      if (out.solve && stop) break;
    }
  }
  out.real_episodes = agent.real_episodes();
  out.real_steps = agent.cumulative_real_steps();
  out.final_subtask_t = agent.stats().mean_feasible_rate();
  out.rules = rules_text(agent.symbolic_model(), threshold);
  write_file(fs::path(dir) / "rules.txt", out.rules);
  auto ckpt = agent.to_json();
  ckpt["config"] = cfg.dump();
  write_file(fs::path(dir) / "checkpoint.json", ckpt.dump());
  return out;
}

RunReport run_all(const config::Config& cfg, const Progress& progress, const EpisodeHook& hook) {
  const auto seeds = cfg.int_list("run.seeds");
  if (seeds.empty()) throw config::ConfigError("run.seeds is empty");
  const auto root = fs::path(cfg.get("run.output"));
  fs::create_directories(root);
  write_file(root / "effective.cfg", cfg.dump());
  const int jobs = std::max<int>(1, static_cast<int>(cfg.integer("run.jobs")));

  RunReport report;
  report.seeds.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const Progress locked = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard lock(log_mutex);
    progress(msg);
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        const auto seed = static_cast<std::uint64_t>(seeds[i]);
        report.seeds[i] = run_seed(cfg, seed, (root / ("seed_" + std::to_string(seed))).string(), locked, hook);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(seeds.size())); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::optional<double>> eps, steps;
  for (const auto& s : report.seeds) {
    eps.push_back(s.solve ? std::optional<double>(s.solve->real_episode) : std::nullopt);
    steps.push_back(s.solve ? std::optional<double>(static_cast<double>(s.solve->real_steps)) : std::nullopt);
  }
  report.episodes_to_solve = summarise(eps);
  report.steps_to_solve = summarise(steps);
  write_file(root / "report.json", report_json(report).dump(2) + "\n");
  return report;
}

nlohmann::json report_json(const RunReport& r) {
  auto summary = [](const Summary& s) {
    auto num = [](double v) { return std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return nlohmann::json{{"median", num(s.median)}, {"q25", num(s.q25)}, {"q75", num(s.q75)}, {"solved", s.solved}, {"total", s.total}};
  };
  auto seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    nlohmann::json j{{"seed", s.seed},
                     {"dir", s.dir},
                     {"metrics", (fs::path(s.dir) / "metrics.csv").string()},
                     {"rules", (fs::path(s.dir) / "rules.txt").string()},
                     {"checkpoint", (fs::path(s.dir) / "checkpoint.json").string()},
                     {"episodes", s.episodes},
                     {"real_episodes", s.real_episodes},
                     {"real_steps", s.real_steps},
                     {"final_subtask_t", s.final_subtask_t}};
    j["solve_episode"] = s.solve ? nlohmann::json(s.solve->real_episode) : nlohmann::json(nullptr);
    j["solve_steps"] = s.solve ? nlohmann::json(s.solve->real_steps) : nlohmann::json(nullptr);
    seeds.push_back(std::move(j));
  }
  return {{"seeds", seeds}, {"episodes_to_solve", summary(r.episodes_to_solve)}, {"steps_to_solve", summary(r.steps_to_solve)}};
}

nlohmann::json read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": not a checkpoint (" + e.what() + ")");
  }
  if (!j.is_object() || !j.contains("model")) throw std::runtime_error(path + ": not a checkpoint");
  return j;
}

config::Config checkpoint_config(const nlohmann::json& checkpoint) {
  config::Config cfg;
  if (checkpoint.contains("config")) cfg.load_text(checkpoint.at("config").get<std::string>(), "<checkpoint>");
  return cfg;
}

// --------------------------------------------------------------------- plot

std::string svg_plot(const std::vector<Series>& series, XAxis x, const std::string& title, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("nothing to plot");
  constexpr double W = 720, H = 440, L = 70, R = 170, T = 40, B = 60;
  constexpr int kGrid = 100;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto xv = [&](const CurvePoint& p) { return x == XAxis::Steps ? p.steps : p.episode; };

  double x_max = 0.0;
  for (const auto& s : series)
    for (const auto& run : s.runs)
      if (!run.empty()) x_max = std::max(x_max, xv(run.back()));
  if (x_max <= 0.0) x_max = 1.0;
  const double y_max = 1.0;
  auto px = [&](double v) { return L + (W - L - R) * v / x_max; };
  auto py = [&](double v) { return H - B - (H - T - B) * v / y_max; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"440\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"720\" height=\"440\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt("%.0f", (W - R + L) / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) + "</text>\n";
  svg += "<line x1=\"" + fmt("%.2f", L) + "\" y1=\"" + fmt("%.2f", H - B) + "\" x2=\"" + fmt("%.2f", W - R) + "\" y2=\"" +
         fmt("%.2f", H - B) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt("%.2f", L) + "\" y1=\"" + fmt("%.2f", T) + "\" x2=\"" + fmt("%.2f", L) + "\" y2=\"" +
         fmt("%.2f", H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xt = x_max * i / 5.0, yt = y_max * i / 5.0;
    svg += "<text x=\"" + fmt("%.2f", px(xt)) + "\" y=\"" + fmt("%.2f", H - B + 18) + "\" text-anchor=\"middle\">" +
           fmt("%.0f", xt) + "</text>\n";
    svg += "<text x=\"" + fmt("%.2f", L - 8) + "\" y=\"" + fmt("%.2f", py(yt) + 4) + "\" text-anchor=\"end\">" +
           fmt("%.1f", yt) + "</text>\n";
    svg += "<line x1=\"" + fmt("%.2f", L) + "\" y1=\"" + fmt("%.2f", py(yt)) + "\" x2=\"" + fmt("%.2f", W - R) + "\" y2=\"" +
           fmt("%.2f", py(yt)) + "\" stroke=\"#dddddd\"/>\n";
  }
  svg += "<text x=\"" + fmt("%.0f", (W - R + L) / 2) + "\" y=\"" + fmt("%.0f", H - 16) + "\" text-anchor=\"middle\">" +
         (x == XAxis::Steps ? "real environment steps" : "real episodes") + "</text>\n";
  svg += "<text transform=\"translate(20," + fmt("%.0f", (H - B + T) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(y_label) +
         "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* colour = palette[si % 6];
    std::vector<double> gx, lo, med, hi;
    for (int g = 0; g <= kGrid; ++g) {
      const double at = x_max * g / kGrid;
      std::vector<double> vals;
      for (const auto& run : s.runs) {
        // Step interpolation: the last point at or before `at`.
        auto it = std::upper_bound(run.begin(), run.end(), at, [&](double v, const CurvePoint& p) { return v < xv(p); });
        if (it == run.begin()) continue;
        vals.push_back(std::prev(it)->value);
      }
      if (vals.empty()) continue;
      gx.push_back(at);
      lo.push_back(*std::min_element(vals.begin(), vals.end()));
      hi.push_back(*std::max_element(vals.begin(), vals.end()));
      med.push_back(quantile(vals, 0.5));
    }
    if (gx.empty()) continue;
    std::string band, line;
    for (std::size_t i = 0; i < gx.size(); ++i) band += fmt("%.2f", px(gx[i])) + "," + fmt("%.2f", py(hi[i])) + " ";
    for (std::size_t i = gx.size(); i-- > 0;) band += fmt("%.2f", px(gx[i])) + "," + fmt("%.2f", py(lo[i])) + " ";
    for (std::size_t i = 0; i < gx.size(); ++i) line += fmt("%.2f", px(gx[i])) + "," + fmt("%.2f", py(med[i])) + " ";
    svg += std::string("<polygon points=\"") + band + "\" fill=\"" + colour + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    svg += std::string("<polyline points=\"") + line + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    const double ly = T + 10 + 20.0 * static_cast<double>(si);
    svg += "<line x1=\"" + fmt("%.2f", W - R + 15) + "\" y1=\"" + fmt("%.2f", ly) + "\" x2=\"" + fmt("%.2f", W - R + 40) +
           "\" y2=\"" + fmt("%.2f", ly) + "\" stroke=\"" + colour + "\" stroke-width=\"3\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", W - R + 46) + "\" y=\"" + fmt("%.2f", ly + 4) + "\">" + xml_escape(s.label) + " (" +
           std::to_string(s.runs.size()) + ")</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace symhrl::harness
