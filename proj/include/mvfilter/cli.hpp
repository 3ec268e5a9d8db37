#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvfilter/averaging.hpp"
#include "mvfilter/ergodics.hpp"
#include "mvfilter/filtering.hpp"

namespace mvfilter {

/// Invalid or missing configuration; `key` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline constexpr const char* kCommands[] = {"ergodics", "averaging-rate", "filter-convergence",
                                            "simulate", "check-hypotheses"};

struct RunConfig {
  std::string command;
  std::string model;
  double sigma = 1.0;
  double x0 = 0.0;
  double T = 1.0;
  double dt_obs = -1.0;  // < 0: 1e-3 T
  double dt = 1e-3;      // frozen-equation step
  double kappa = kDefaultKappa;
  std::vector<double> eps;
  std::size_t particles = 1000;
  std::size_t law_particles = 1000;
  std::size_t reps = 200;
  std::size_t nu_samples = 65536;
  std::uint64_t seed = 0;
  double t_eval = -1.0;  // < 0: T
  std::string F = "F1";
  std::string curve = "w2";
  std::string obs = "model";  // or "zero"
  std::filesystem::path out;
  int threads = 0;

  double obs_step() const { return dt_obs > 0.0 ? dt_obs : 1e-3 * T; }
  double eval_time() const { return t_eval > 0.0 ? t_eval : T; }
};

/// "2^-4..2^-10" (optionally ":k" for every k-th power), comma lists, or a
/// single number.
std::vector<double> parse_eps_list(const std::string& text);

/// Flat "key = value" lines, '#' comments. Underscores in keys are read as
/// dashes.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Builds a validated config from settings (keys as in the CLI flags).
RunConfig config_from_settings(const std::string& command,
                               const std::map<std::string, std::string>& settings);

/// Parses argv; throws ConfigError on any problem. `--config` values are
/// overridden by flags.
RunConfig parse_config(int argc, const char* const* argv);

/// Runs the command; returns the process exit code.
int run(const RunConfig& config);

/// Full command-line entry: 0 ok, 1 numerical abort, 2 configuration error.
int main_entry(int argc, const char* const* argv);

// CSV schemas shared by the CLI and the acceptance runner.
void write_rate_csv(const std::filesystem::path& path, const RateReport& report);
void write_filter_csv(const std::filesystem::path& path, const FilterReport& report);
void write_curve_csv(const std::filesystem::path& path, const DecayCurve& curve);

}  // namespace mvfilter
