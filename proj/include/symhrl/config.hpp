#pragma once
// Flat "dotted.key = value" run configuration. Every accepted key has a
// default; files and command-line overrides may only set known keys.

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "symhrl/agent.hpp"
#include "symhrl/environment.hpp"
#include "symhrl/options.hpp"
#include "symhrl/symbolic_model.hpp"

namespace symhrl::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  // All known keys at their defaults.
  Config();

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  // Lines of "key = value"; '#' starts a comment. All unknown keys are
  // collected into one error.
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void load_file(const std::string& path);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  // Sorted "key = value" lines; loading the dump reproduces this config.
  std::string dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::unique_ptr<env::Environment> make_environment(const Config& cfg);
agent::AgentConfig agent_config(const Config& cfg, std::uint64_t seed);
model::ModelConfig model_config(const Config& cfg, std::uint64_t seed);
options::OptionConfig option_config(const Config& cfg, std::uint64_t seed);

// Resolves a data path: as given if it exists, else under the source tree.
std::string resolve_data_path(const std::string& path);

}  // namespace symhrl::config
