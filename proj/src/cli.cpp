#include "mvfilter/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvfilter/csv.hpp"
#include "mvfilter/dynamics.hpp"
#include "mvfilter/model.hpp"
#include "mvfilter/parallel.hpp"

namespace mvfilter {

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "model", "sigma", "x0",    "T",     "dt-obs", "dt",      "kappa",
      "eps",   "particles", "law-particles", "reps", "nu-samples", "seed",
      "t-eval", "F",    "curve", "obs",   "out",    "threads"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  // Accept "2^-k" wherever a number is expected.
  if (const auto caret = t.find('^'); caret != std::string::npos) {
    const double base = parse_real(key, t.substr(0, caret));
    const double expo = parse_real(key, t.substr(caret + 1));
    return std::pow(base, expo);
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  if (used != t.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + text + "'");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + text + "'");
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

std::vector<double> parse_eps_list(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("eps", "empty epsilon list");
  if (const auto dots = t.find(".."); dots != std::string::npos && t.find('^') != std::string::npos) {
    std::string hi_text = t.substr(dots + 2);
    std::size_t stride = 1;
    if (const auto colon = hi_text.find(':'); colon != std::string::npos) {
      stride = parse_unsigned("eps", hi_text.substr(colon + 1));
      hi_text = hi_text.substr(0, colon);
      require(stride >= 1, "eps", "stride must be >= 1");
    }
    const std::string lo_text = t.substr(0, dots);
    auto split_power = [](const std::string& s) {
      const auto caret = s.find('^');
      if (caret == std::string::npos) throw ConfigError("eps", "expected base^exponent in '" + s + "'");
      return std::pair{parse_real("eps", s.substr(0, caret)), parse_real("eps", s.substr(caret + 1))};
    };
    const auto [b1, e1] = split_power(lo_text);
    const auto [b2, e2] = split_power(hi_text);
    require(b1 == b2 && b1 > 1.0, "eps", "range endpoints need a common base > 1");
    require(e1 == std::round(e1) && e2 == std::round(e2), "eps", "exponents must be integers");
    const long a = std::lround(e1), b = std::lround(e2);
    const long dir = b >= a ? 1 : -1;
    std::vector<double> out;
    for (long e = a; dir * (b - e) >= 0; e += dir * static_cast<long>(stride)) {
      out.push_back(std::pow(b1, static_cast<double>(e)));
    }
    return out;
  }
  std::vector<double> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real("eps", item));
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config", path.string() + ":" + std::to_string(lineno) +
                                      ": expected 'key = value'");
    }
    out[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig config_from_settings(const std::string& command,
                               const std::map<std::string, std::string>& settings) {
  const auto& keys = known_keys();
  for (const auto& [key, value] : settings) {
    require(std::find(keys.begin(), keys.end(), key) != keys.end(), key, "unknown key");
  }
  require(std::find(std::begin(kCommands), std::end(kCommands), command) != std::end(kCommands),
          "command", "unknown command '" + command + "'");

  RunConfig c;
  c.command = command;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = settings.find(key);
    return it == settings.end() ? nullptr : &it->second;
  };

  const std::string* model = get("model");
  require(model && !model->empty(), "model", "is required");
  c.model = *model;
  const auto names = registered_models();
  require(std::find(names.begin(), names.end(), c.model) != names.end(), "model",
          "unknown model '" + c.model + "'");

  if (auto v = get("sigma")) c.sigma = parse_real("sigma", *v);
  if (auto v = get("x0")) c.x0 = parse_real("x0", *v);
  if (auto v = get("T")) c.T = parse_real("T", *v);
  if (auto v = get("dt-obs")) c.dt_obs = parse_real("dt-obs", *v);
  if (auto v = get("dt")) c.dt = parse_real("dt", *v);
  if (auto v = get("kappa")) c.kappa = parse_real("kappa", *v);
  if (auto v = get("eps")) c.eps = parse_eps_list(*v);
  if (auto v = get("particles")) c.particles = parse_unsigned("particles", *v);
  if (auto v = get("law-particles")) c.law_particles = parse_unsigned("law-particles", *v);
  if (auto v = get("reps")) c.reps = parse_unsigned("reps", *v);
  if (auto v = get("nu-samples")) c.nu_samples = parse_unsigned("nu-samples", *v);
  if (auto v = get("seed")) c.seed = parse_unsigned("seed", *v);
  if (auto v = get("t-eval")) c.t_eval = parse_real("t-eval", *v);
  if (auto v = get("F")) c.F = *v;
  if (auto v = get("curve")) c.curve = *v;
  if (auto v = get("obs")) c.obs = *v;
  if (auto v = get("out")) c.out = *v;
  if (auto v = get("threads")) c.threads = static_cast<int>(parse_unsigned("threads", *v));

  require(c.sigma > 0.0, "sigma", "must be positive");
  require(c.T > 0.0, "T", "must be positive");
  require(c.dt > 0.0 && c.dt <= c.T, "dt", "must lie in (0, T]");
  require(c.kappa > 0.0 && c.kappa <= kMaxKappa, "kappa",
          "must lie in (0, 0.05]");
  require(c.particles >= 2, "particles", "must be >= 2");
  require(c.law_particles >= 2, "law-particles", "must be >= 2");
  require(c.reps >= 2, "reps", "must be >= 2");
  require(c.nu_samples >= 100, "nu-samples", "must be >= 100");
  require(c.obs == "model" || c.obs == "zero", "obs", "must be 'model' or 'zero'");
  try {
    make_grid(c.T, c.obs_step());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dt-obs", e.what());
  }
  for (double e : c.eps) require(e > 0.0 && e <= 1.0, "eps", "values must lie in (0, 1]");

  const bool writes_csv = command != "check-hypotheses";
  require(!writes_csv || !c.out.empty(), "out", "is required");
  if (command == "averaging-rate") {
    require(c.eps.size() >= 4, "eps", "averaging-rate needs at least 4 values");
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
      require(c.eps[i] < 1.0, "eps", "values must lie in (0, 1)");
      require(i == 0 || c.eps[i] < c.eps[i - 1], "eps", "must be strictly decreasing");
    }
  } else if (command == "filter-convergence") {
    require(c.eps.size() >= 3, "eps", "filter-convergence needs at least 3 values");
    require(c.F == "F1" || c.F == "F2" || c.F == "F3", "F", "must be F1, F2 or F3");
    require(c.eval_time() > 0.0 && c.eval_time() <= c.T, "t-eval", "must lie in (0, T]");
    try {
      make_grid(c.eval_time(), c.obs_step());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("t-eval", e.what());
    }
  } else if (command == "simulate") {
    require(c.eps.size() == 1, "eps", "simulate takes exactly one value");
  } else if (command == "ergodics") {
    require(c.curve == "w2" || c.curve == "hbar" || c.curve == "contraction" ||
                c.curve == "moment",
            "curve", "must be one of w2, hbar, contraction, moment");
    require(c.curve != "contraction" || c.x0 != 0.0, "x0",
            "contraction couples x0 with 0 and needs x0 != 0");
  }
  try {
    make_model(c.model, {c.sigma, c.x0}).validate_structure();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
  return c;
}

RunConfig parse_config(int argc, const char* const* argv) {
  CLI::App app{"Multiscale McKean-Vlasov simulation, averaging and filtering experiments"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> opts;
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value settings file");
  static const std::map<std::string, std::string> help{
      {"model", "registered model name (example6, ou)"},
      {"sigma", "diffusion level (default 1)"},
      {"x0", "deterministic initial point (default 0)"},
      {"T", "horizon (default 1)"},
      {"dt-obs", "coarse observation step (default 1e-3 T)"},
      {"dt", "Euler step of the frozen equation (default 1e-3)"},
      {"kappa", "fast micro-step factor, dt_f <= eps*kappa, in (0, 0.05] (default 0.01)"},
      {"eps", "epsilon list: 2^-4..2^-10[:k], a,b,c or one value"},
      {"particles", "signal/filter particles, or paths for ergodics (default 1000)"},
      {"law-particles", "law-ensemble size for the filter (default 1000)"},
      {"reps", "Monte-Carlo replications (default 200)"},
      {"nu-samples", "invariant-measure sample size (default 65536)"},
      {"seed", "master seed (default 0)"},
      {"t-eval", "filter evaluation time (default T)"},
      {"F", "test function F1, F2 or F3 (default F1)"},
      {"curve", "ergodics curve: w2, hbar, contraction, moment (default w2)"},
      {"obs", "simulate: 'model' or 'zero' observation drift"},
      {"out", "output CSV path"},
      {"threads", "worker threads (default: all)"}};
  for (const auto& key : known_keys()) {
    opts[key] = app.add_option("--" + key, flags[key], help.at(key));
  }
  static const std::map<std::string, std::string> command_help{
      {"ergodics", "decay curves of the frozen equation toward its invariant law"},
      {"averaging-rate", "E sup|Y^eps - Ybar|^2 over an epsilon grid"},
      {"filter-convergence", "E|pi-hat^eps_t(F) - Fbar|^2 over an epsilon grid"},
      {"simulate", "one observation path with its noise and ensemble moments"},
      {"check-hypotheses", "sample-based checks of the model's declared constants"}};
  for (const char* name : kCommands) app.add_subcommand(name, command_help.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    throw;
  } catch (const CLI::ParseError& e) {
    throw ConfigError("arguments", e.what());
  }

  std::map<std::string, std::string> settings;
  if (!config_path.empty()) settings = read_config_file(config_path);
  for (const auto& key : known_keys()) {
    if (opts[key]->count() > 0 || !flags[key].empty()) settings[key] = flags[key];
  }
  return config_from_settings(app.get_subcommands().front()->get_name(), settings);
}

void write_rate_csv(const std::filesystem::path& path, const RateReport& report) {
  CsvWriter csv(path, {"epsilon", "mean_sq_sup_error", "stderr", "n_reps"});
  for (std::size_t e = 0; e < report.eps_grid.size(); ++e) {
    csv.row({report.eps_grid[e], report.mean_sq_sup_error[e], report.std_error[e],
             static_cast<double>(report.n_reps)});
  }
  csv.comment("fitted_slope", report.fitted_slope);
  csv.comment("slope_stderr", report.slope_stderr);
  csv.comment("floor", report.floor);
}

void write_filter_csv(const std::filesystem::path& path, const FilterReport& report) {
  CsvWriter csv(path, {"epsilon", "mean_sq_gap", "stderr", "n_reps", "Fbar"});
  for (std::size_t e = 0; e < report.eps_grid.size(); ++e) {
    csv.row({report.eps_grid[e], report.mean_sq_gap[e], report.std_error[e],
             static_cast<double>(report.n_reps), report.Fbar});
  }
  csv.comment("fitted_slope", report.fitted_slope);
  if (report.has_control) {
    csv.comment("control_epsilon", report.control_eps);
    csv.comment("control_gap", report.control_gap);
    csv.comment("control_stderr", report.control_std_error);
  }
}

void write_curve_csv(const std::filesystem::path& path, const DecayCurve& curve) {
  CsvWriter csv(path, {"t", "observed", "bound", "stderr"});
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    csv.row({curve.times[k], curve.observed[k], curve.bound[k], curve.std_error[k]});
  }
  csv.comment("fitted_exponent", curve.fitted_exponent);
}

namespace {

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& infix) {
  std::filesystem::path p = out;
  p.replace_filename(out.stem().string() + "." + infix + out.extension().string());
  return p;
}

InvariantSample invariant_for(const ModelSpec& model, const RunConfig& c, const NoisePlan& plan) {
  InvariantOptions opt;
  opt.n_samples = c.nu_samples;
  opt.dt = c.dt;
  return sample_invariant(model, plan, opt);
}

int run_check_hypotheses(const ModelSpec& model, const RunConfig& c) {
  const std::size_t pairs = 10000;
  const double radius = 10.0;
  const HypothesisReport diss = check_dissipativity(model, pairs, radius, c.seed);
  const LipschitzReport lip = check_lipschitz(model, pairs, radius, c.seed);
  const HypothesisReport bound = check_obs_bound(model, pairs, radius, c.seed);
  const GrowthReport growth = check_growth(model, pairs, radius, c.seed);

  std::cout << "model " << model.name << ": L1=" << model.lip_b_sigma << " L2=" << model.lip_h
            << " beta=" << model.dissipativity << " alpha=" << model.alpha() << "\n";
  for (const auto* r : {&diss, &lip.drift_diffusion, &lip.obs, &bound}) {
    std::cout << "  " << r->id << ": " << (r->pass ? "pass" : "FAIL")
              << "  worst_margin=" << format_number(r->worst_margin) << "  pairs=" << r->n_pairs
              << "\n";
  }
  std::cout << "  growth: alpha=" << growth.alpha << " empirical_C=" << growth.empirical_c << "\n";
  if (!c.out.empty()) {
    CsvWriter csv(c.out, {"hypothesis", "n_pairs", "worst_margin", "pass"});
    for (const auto* r : {&diss, &lip.drift_diffusion, &lip.obs, &bound}) {
      csv.text_row({r->id, std::to_string(r->n_pairs), format_number(r->worst_margin),
                    r->pass ? "1" : "0"});
    }
    csv.comment("alpha", growth.alpha);
    csv.comment("empirical_C", growth.empirical_c);
  }
  return 0;
}

int run_simulate(const ModelSpec& base, const RunConfig& c, const NoisePlan& plan) {
  const ModelSpec model = c.obs == "zero" ? with_zero_obs(base) : base;
  const TimeGrid grid = make_grid(c.T, c.obs_step());
  const Ensemble ens =
      simulate_fast_ensemble(model, c.eps[0], grid, c.particles, c.kappa, plan, 0, 0);
  const BrownianPath w = sample_brownian(grid, model.dim_obs, plan, {Role::observation, 0, 0, 0});
  const SlowPath y = simulate_observation(model, ens, w, 0);

  std::vector<std::string> header{"t"};
  for (std::size_t j = 0; j < y.dim; ++j) header.push_back("value" + std::to_string(j));
  CsvWriter ycsv(c.out, header), wcsv(sibling(c.out, "W"), header);
  std::vector<double> row(y.dim + 1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    row[0] = grid.time(k);
    std::copy_n(y.at(k).begin(), y.dim, row.begin() + 1);
    ycsv.row(row);
    std::copy_n(w.at(k).begin(), w.dim, row.begin() + 1);
    wcsv.row(row);
  }
  const EnsembleMoments mom = ensemble_moments(ens);
  CsvWriter mcsv(sibling(c.out, "moments"), {"t", "mean", "variance", "M"});
  for (std::size_t k = 0; k < mom.times.size(); ++k) {
    mcsv.row({mom.times[k], mom.mean[k], mom.variance[k], static_cast<double>(mom.particles)});
  }
  return 0;
}

int run_ergodics(const ModelSpec& model, const RunConfig& c, const NoisePlan& plan) {
  DecayOptions opt;
  opt.dt = c.dt;
  opt.record_dt = c.dt_obs > 0.0 ? c.dt_obs : c.T / 32.0;
  opt.n_reps = c.particles;
  DecayCurve curve;
  if (c.curve == "contraction") {
    const std::vector<double> x1{c.x0}, x2{0.0};
    curve = contraction_experiment(model, x1, x2, c.T, plan, opt);
  } else if (c.curve == "moment") {
    const GrowthReport g = check_growth(model, 10000, 10.0, c.seed);
    curve = moment_bound_experiment(model, g.empirical_c, c.T, plan, opt);
  } else {
    const InvariantSample nu = invariant_for(model, c, plan);
    if (c.curve == "w2") {
      curve = w2_decay_experiment(model, nu, c.T, plan, opt);
    } else {
      const VectorEstimate hbar = compute_hbar(model, nu);
      std::cout << "hbar=" << format_number(hbar.value[0])
                << " stderr=" << format_number(hbar.std_error[0]) << "\n";
      curve = hbar_decay_experiment(model, nu, hbar, c.T, plan, opt);
    }
  }
  write_curve_csv(c.out, curve);
  std::cout << c.curve << ": fitted_exponent=" << format_number(curve.fitted_exponent)
            << " over " << curve.fit_points << " points\n";
  return 0;
}

int run_averaging(const ModelSpec& model, const RunConfig& c, const NoisePlan& plan) {
  const InvariantSample nu = invariant_for(model, c, plan);
  const VectorEstimate hbar = compute_hbar(model, nu);
  RateOptions opt;
  opt.T = c.T;
  opt.dt_obs = c.obs_step();
  opt.kappa = c.kappa;
  opt.particles = c.particles;
  opt.n_reps = c.reps;
  opt.hbar_se = hbar.std_error[0];
  const RateReport report = rate_experiment(model, c.eps, hbar.value, plan, opt);
  write_rate_csv(c.out, report);
  std::cout << "hbar=" << format_number(hbar.value[0])
            << " fitted_slope=" << format_number(report.fitted_slope) << "\n";
  return 0;
}

int run_filter(const ModelSpec& model, const RunConfig& c, const NoisePlan& plan) {
  const InvariantSample nu = invariant_for(model, c, plan);
  const TestFunction F = test_function(c.F);
  const Estimate Fbar = compute_Fbar(F, nu);
  FilterExperimentOptions opt;
  opt.t_eval = c.eval_time();
  opt.dt_obs = c.obs_step();
  opt.kappa = c.kappa;
  opt.particles = c.particles;
  opt.law_particles = c.law_particles;
  opt.n_reps = c.reps;
  const FilterReport report = filter_convergence_experiment(model, c.eps, F, Fbar.value, plan, opt);
  write_filter_csv(c.out, report);
  std::cout << "Fbar=" << format_number(Fbar.value) << " control_gap="
            << format_number(report.control_gap) << "\n";
  return 0;
}

void write_metadata(const RunConfig& c, double wall_seconds) {
  if (c.out.empty()) return;
  nlohmann::json meta;
  meta["command"] = c.command;
  meta["model"] = c.model;
  meta["seed"] = c.seed;
  meta["version"] = MVFILTER_VERSION;
  meta["threads"] = thread_count();
  meta["wall_time_s"] = wall_seconds;
  meta["sigma"] = c.sigma;
  meta["x0"] = c.x0;
  meta["T"] = c.T;
  meta["eps"] = c.eps;
  std::ofstream(c.out.string() + ".meta.json") << meta.dump(2) << "\n";
}

}  // namespace

int run(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  set_thread_count(c.threads);
  const ModelSpec model = make_model(c.model, {c.sigma, c.x0});
  const NoisePlan plan(c.seed);
  int code = 0;
  if (c.command == "check-hypotheses") {
    code = run_check_hypotheses(model, c);
  } else if (c.command == "simulate") {
    code = run_simulate(model, c, plan);
  } else if (c.command == "ergodics") {
    code = run_ergodics(model, c, plan);
  } else if (c.command == "averaging-rate") {
    code = run_averaging(model, c, plan);
  } else if (c.command == "filter-convergence") {
    code = run_filter(model, c, plan);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_metadata(c, wall);
  return code;
}

int main_entry(int argc, const char* const* argv) {
  RunConfig config;
  try {
    config = parse_config(argc, argv);
  } catch (const CLI::CallForHelp&) {
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "mvfilter: configuration error: " << e.what() << "\n";
    return 2;
  }
  try {
    return run(config);
  } catch (const NumericalError& e) {
    std::cerr << "mvfilter: numerical abort: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "mvfilter: invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mvfilter: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mvfilter
