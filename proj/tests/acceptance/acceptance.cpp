// Acceptance runner: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "mvfilter/cli.hpp"
#include "mvfilter/csv.hpp"

using namespace mvfilter;
namespace fs = std::filesystem;

namespace {

constexpr double kEsinAbs = 0.60715770584139372912;  // E sin|Z|, Z ~ N(0, 2)

struct Settings {
  bool quick = false;
  fs::path out_dir = "acceptance_out";
  std::uint64_t seed = 2024;
  std::size_t rate_reps = 200;
  std::size_t filter_reps = 200;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) { return format_number(x); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Frozen-equation second moment against x0^2 e^{-t} + sigma^2 (1 - e^{-t}).
Outcome moments(const Settings& s) {
  const ModelSpec m = example_model(1.0, 1.0);
  const std::size_t R = s.quick ? 20000 : 100000;
  const double dt = 1e-3;
  ParticleCloud cloud = make_frozen_cloud(m, R, dt, NoisePlan(s.seed), {Role::frozen, 0, 0, 0});
  double worst = 0.0;
  std::ostringstream d;
  for (int k = 1; k <= 4000; ++k) {
    cloud.advance();
    if (k != 500 && k != 1000 && k != 2000 && k != 4000) continue;
    const double t = k * dt;
    RunningStats st;
    for (double x : cloud.states()) st.add(x * x);
    const double exact = std::exp(-t) + (1.0 - std::exp(-t));
    const double z = (st.mean() - exact) / st.std_error();
    worst = std::max(worst, std::abs(z));
    d << " t=" << t << ": " << num(st.mean()) << " (z " << num(z) << ")";
  }
  return {worst <= 3.0, "E|X_t|^2 vs oracle 1:" + d.str()};
}

// 2. Synchronous-coupling contraction from (1, 0).
Outcome contraction(const Settings& s) {
  const ModelSpec m = example_model(1.0, 0.0);
  DecayOptions o;
  o.n_reps = 256;
  const std::vector<double> a{1.0}, b{0.0};
  const DecayCurve c = contraction_experiment(m, a, b, 4.0, NoisePlan(s.seed), o);
  write_curve_csv(s.out_dir / "contraction.csv", c);
  bool pass = true;
  std::ostringstream d;
  for (double t : {1.0, 2.0, 4.0}) {
    const std::size_t k = static_cast<std::size_t>(std::llround(t / o.record_dt));
    const double r = c.observed[k] / std::exp(-t);
    pass = pass && r >= 1.0 - 10.0 * o.dt && r <= 1.0 + 10.0 * o.dt;
    d << " t=" << t << ": " << num(r);
  }
  return {pass, "E|D_t|^2 / e^{-t}:" + d.str()};
}

// 3. W2 and hbar decay toward nu-hat.
Outcome decay(const Settings& s) {
  const ModelSpec m = example_model(1.0, 2.0);
  InvariantOptions io;
  io.n_samples = s.quick ? 8192 : 65536;
  const InvariantSample nu = sample_invariant(m, NoisePlan(s.seed), io);
  const VectorEstimate hbar = compute_hbar(m, nu);
  DecayOptions o;
  o.n_reps = 4096;
  const DecayCurve w = w2_decay_experiment(m, nu, 8.0, NoisePlan(s.seed + 1), o);
  const DecayCurve h = hbar_decay_experiment(m, nu, hbar, 8.0, NoisePlan(s.seed + 2), o);
  write_curve_csv(s.out_dir / "w2_decay.csv", w);
  write_curve_csv(s.out_dir / "hbar_decay.csv", h);
  bool under = true;
  for (const DecayCurve* c : {&w, &h}) {
    for (std::size_t k = 0; k < c->times.size(); ++k) {
      under = under && c->observed[k] <= c->bound[k] + 5.0 * c->std_error[k];
    }
  }
  const bool rates = w.fitted_exponent <= -0.9 && h.fitted_exponent <= -0.9;
  return {under && rates, std::string("below bound+5se: ") + (under ? "yes" : "no") +
                              "; exponents w2=" + num(w.fitted_exponent) + " (" +
                              std::to_string(w.fit_points) + " pts), hbar=" +
                              num(h.fitted_exponent) + " (" + std::to_string(h.fit_points) +
                              " pts)"};
}

bool decreasing_within(const std::vector<double>& v, const std::vector<double>& se,
                       std::string& where) {
  for (std::size_t e = 1; e < v.size(); ++e) {
    if (v[e] > v[e - 1] + 2.0 * std::hypot(se[e], se[e - 1])) {
      where = "rise at index " + std::to_string(e);
      return false;
    }
  }
  return true;
}

RateReport run_rate(const Settings& s, const fs::path& csv) {
  const ModelSpec m = example_model(1.0, 0.0);
  InvariantOptions io;
  io.n_samples = s.quick ? 8192 : 65536;
  const InvariantSample nu = sample_invariant(m, NoisePlan(s.seed), io);
  const VectorEstimate hbar = compute_hbar(m, nu);
  RateOptions o;
  o.n_reps = s.rate_reps;
  o.hbar_se = hbar.std_error[0];
  const auto eps = parse_eps_list("2^-4..2^-10");
  const RateReport r = rate_experiment(m, eps, hbar.value, NoisePlan(s.seed), o);
  write_rate_csv(csv, r);
  return r;
}

// 4. Averaging rate.
Outcome averaging(const Settings& s) {
  const RateReport r = run_rate(s, s.out_dir / "averaging_rate.csv");
  std::string where;
  const bool dec = decreasing_within(r.mean_sq_sup_error, r.std_error, where);
  const bool slope = std::isfinite(r.fitted_slope) && r.fitted_slope >= 0.4;
  std::size_t used = 0;
  for (bool u : r.used_in_fit) used += u;
  return {dec && slope, "slope=" + num(r.fitted_slope) + " +- " + num(r.slope_stderr) + " over " +
                            std::to_string(used) + " pts; decreasing: " +
                            (dec ? "yes" : "no (" + where + ")")};
}

// 5. Averaged filter returns Fbar.
Outcome averaged_identity(const Settings& s) {
  const ModelSpec m = example_model(1.0, 0.0);
  InvariantOptions io;
  io.n_samples = 4096;
  const InvariantSample nu = sample_invariant(m, NoisePlan(s.seed), io);
  const VectorEstimate hbar = compute_hbar(m, nu);
  const TimeGrid g = make_grid(1.0, 1e-3);
  const SlowPath ybar = simulate_averaged(
      hbar.value, sample_brownian(g, 1, NoisePlan(s.seed), {Role::observation, 0, 0, 0}));
  double worst = 0.0;
  for (const auto& F : bundled_test_functions()) {
    const double Fbar = compute_Fbar(F, nu).value;
    const AveragedFilter af = averaged_filter(hbar.value, Fbar, ybar);
    for (double p : af.pi_bar) worst = std::max(worst, std::abs(p - Fbar));
  }
  return {worst <= 1e-14, "max |pi-bar - Fbar| = " + num(worst)};
}

FilterReport run_filter(const Settings& s, const fs::path& csv) {
  const ModelSpec m = example_model(1.0, 0.0);
  InvariantOptions io;
  io.n_samples = s.quick ? 8192 : 65536;
  const InvariantSample nu = sample_invariant(m, NoisePlan(s.seed), io);
  const TestFunction F = test_function("F1");
  const double Fbar = compute_Fbar(F, nu).value;
  FilterExperimentOptions o;
  o.n_reps = s.filter_reps;
  if (s.quick) {
    o.particles = 500;
    o.law_particles = 250;
  }
  const auto eps = parse_eps_list("2^-4..2^-10:2");
  const FilterReport r = filter_convergence_experiment(m, eps, F, Fbar, NoisePlan(s.seed), o);
  write_filter_csv(csv, r);
  return r;
}

// 6. Filter converges to the averaged filter.
Outcome filter_limit(const Settings& s) {
  const FilterReport r = run_filter(s, s.out_dir / "filter_convergence.csv");
  std::string where;
  const bool dec = decreasing_within(r.mean_sq_gap, r.std_error, where);
  const double first = r.mean_sq_gap.front(), last = r.mean_sq_gap.back();
  const bool shrank = last <= 0.25 * first;
  const bool at_floor =
      std::abs(last - r.control_gap) <= 2.0 * std::hypot(r.std_error.back(), r.control_std_error);
  std::ostringstream d;
  d << "gap " << num(first) << " -> " << num(last) << " (se " << num(r.std_error.back())
    << "), control " << num(r.control_gap) << " (se " << num(r.control_std_error)
    << "); decreasing: " << (dec ? "yes" : "no (" + where + ")")
    << "; last<=first/4: " << (shrank ? "yes" : "no")
    << "; last~control: " << (at_floor ? "yes" : "no");
  return {dec && (shrank || at_floor), d.str()};
}

// 7. Mean-one weights under the reference measure.
Outcome martingale(const Settings& s) {
  DiagnosticOptions o;
  o.particles = s.quick ? 20000 : 100000;
  const Estimate e = martingale_diagnostic(example_model(1.0, 0.0), 0.1, NoisePlan(s.seed), o);
  const double z = std::abs(e.value - 1.0) / e.std_error;
  return {z <= 4.0, "mean Lambda_T = " + num(e.value) + " +- " + num(e.std_error) +
                        ", |z| = " + num(z)};
}

// 8. Exact assignment W2 against the 1-D quantile formula.
Outcome w2_crosscheck(const Settings& s) {
  Rng rng = NoisePlan(s.seed).stream({Role::hypothesis, 0, 0, 8});
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    std::vector<double> a(64), b(64);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = 2.0 * rng.normal() + 1.0;
    const EmpiricalMeasure mu(1, a), nu(1, b);
    worst = std::max(worst, std::abs(wasserstein2_assignment(mu, nu) - wasserstein2_1d(mu, nu)));
  }
  return {worst <= 1e-10, "max difference over 100 cloud pairs: " + num(worst)};
}

// 9. hbar against the closed form.
Outcome hbar_oracle(const Settings& s) {
  const ModelSpec m = example_model(1.0, 0.0);
  InvariantOptions io;
  io.n_samples = 4096;
  const VectorEstimate h = compute_hbar(m, sample_invariant(m, NoisePlan(s.seed), io));
  const double z = std::abs(h.value[0] - kEsinAbs) / h.std_error[0];
  return {z <= 4.0, "hbar = " + num(h.value[0]) + " +- " + num(h.std_error[0]) + " vs " +
                        num(kEsinAbs) + ", |z| = " + num(z)};
}

// 10. Same seed, same bytes.
Outcome determinism(const Settings& s) {
  run_rate(s, s.out_dir / "averaging_rate.rerun.csv");
  run_filter(s, s.out_dir / "filter_convergence.rerun.csv");
  const bool rate = slurp(s.out_dir / "averaging_rate.csv") ==
                    slurp(s.out_dir / "averaging_rate.rerun.csv");
  const bool filt = slurp(s.out_dir / "filter_convergence.csv") ==
                    slurp(s.out_dir / "filter_convergence.rerun.csv");
  return {rate && filt, std::string("averaging-rate ") + (rate ? "identical" : "DIFFERS") +
                            ", filter-convergence " + (filt ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::vector<int> only;
  CLI::App app{"acceptance criteria"};
  app.add_flag("--quick", s.quick, "reduced replication counts (not the acceptance run)");
  app.add_option("--out-dir", s.out_dir, "directory for the experiment CSVs");
  app.add_option("--seed", s.seed, "master seed");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (s.quick) {
    s.rate_reps = 20;
    s.filter_reps = 10;
  }
  fs::create_directories(s.out_dir);

  const std::vector<std::pair<std::string, std::function<Outcome(const Settings&)>>> criteria{
      {"frozen second moment matches the OU oracle", moments},
      {"synchronous coupling contracts at e^{-beta t}", contraction},
      {"W2 and hbar decay below their bounds", decay},
      {"averaging error decreases with rate >= 0.4", averaging},
      {"averaged filter equals Fbar", averaged_identity},
      {"particle filter approaches the averaged filter", filter_limit},
      {"KS weights are mean-one", martingale},
      {"assignment W2 equals the 1-D formula", w2_crosscheck},
      {"hbar matches the closed form", hbar_oracle},
      {"experiments are byte-reproducible", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    if (id == 10 && !only.empty() &&
        (std::find(only.begin(), only.end(), 4) == only.end() ||
         std::find(only.begin(), only.end(), 6) == only.end())) {
      std::cout << "SKIP 10: needs criteria 4 and 6 in the same run\n";
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(s);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ": " << criteria[i].first << " -- "
              << o.detail << " [" << std::llround(secs) << " s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << (s.quick ? " (quick mode)" : "") << std::endl;
  return failed == 0 ? 0 : 1;
}
