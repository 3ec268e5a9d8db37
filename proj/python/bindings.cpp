#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvfilter/averaging.hpp"
#include "mvfilter/dynamics.hpp"
#include "mvfilter/ergodics.hpp"
#include "mvfilter/filtering.hpp"
#include "mvfilter/measures.hpp"
#include "mvfilter/model.hpp"

namespace py = pybind11;
using namespace mvfilter;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array to_array(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  Array a({rows, cols});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

// 1-D inputs are clouds of scalars; 2-D inputs are (points, dim).
EmpiricalMeasure to_measure(const Array& a) {
  const std::size_t dim = a.ndim() == 2 ? static_cast<std::size_t>(a.shape(1)) : 1;
  return EmpiricalMeasure(dim, to_vector(a));
}

InvariantSample to_sample(const ModelSpec& model, const Array& points) {
  InvariantSample s;
  s.cloud = to_measure(points);
  s.model = model.name;
  s.n_samples = s.cloud.size();
  return s;
}

py::dict curve_dict(const DecayCurve& c) {
  py::dict d;
  d["t"] = to_array(c.times);
  d["observed"] = to_array(c.observed);
  d["bound"] = to_array(c.bound);
  d["stderr"] = to_array(c.std_error);
  d["fitted_exponent"] = c.fitted_exponent;
  d["fit_points"] = c.fit_points;
  return d;
}

py::dict report_dict(const HypothesisReport& r) {
  py::dict d;
  d["id"] = r.id;
  d["pass"] = r.pass;
  d["worst_margin"] = r.worst_margin;
  d["n_pairs"] = r.n_pairs;
  return d;
}

DecayOptions decay_options(double dt, double record_dt, std::size_t n_reps, std::uint64_t tag) {
  DecayOptions o;
  o.dt = dt;
  o.record_dt = record_dt;
  o.n_reps = n_reps;
  o.tag = tag;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiscale McKean-Vlasov simulation, averaging and filtering";
  m.attr("__version__") = MVFILTER_VERSION;
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ModelSpec>(m, "Model")
      .def_readonly("name", &ModelSpec::name)
      .def_readonly("dim_signal", &ModelSpec::dim_signal)
      .def_readonly("dim_obs", &ModelSpec::dim_obs)
      .def_readonly("L1", &ModelSpec::lip_b_sigma)
      .def_readonly("L2", &ModelSpec::lip_h)
      .def_readonly("beta", &ModelSpec::dissipativity)
      .def_readonly("obs_bound", &ModelSpec::obs_bound)
      .def_readonly("parameters", &ModelSpec::parameters)
      .def_property_readonly("alpha", &ModelSpec::alpha)
      .def("h", [](const ModelSpec& s, const Array& x, const Array& law) {
        const EmpiricalMeasure mu = to_measure(law);
        const std::vector<double> xs = to_vector(x);
        std::vector<double> out(xs.size() / s.dim_signal * s.dim_obs);
        s.bind_obs(mu)(xs, out);
        return to_array(out);
      }, py::arg("x"), py::arg("law"), "h(x_i, law) for a block of points")
      .def("__repr__", [](const ModelSpec& s) { return "<mvfilter.Model '" + s.name + "'>"; });

  m.def("make_model", [](const std::string& name, double sigma, double x0) {
    return make_model(name, {sigma, x0});
  }, py::arg("name") = "example6", py::arg("sigma") = 1.0, py::arg("x0") = 0.0);
  m.def("registered_models", &registered_models);
  m.def("with_zero_obs", &with_zero_obs);
  m.def("with_constant_obs", &with_constant_obs);

  m.def("check_hypotheses", [](const ModelSpec& model, std::size_t n_pairs, double radius,
                               std::uint64_t seed) {
    py::list out;
    out.append(report_dict(check_dissipativity(model, n_pairs, radius, seed)));
    const LipschitzReport lip = check_lipschitz(model, n_pairs, radius, seed);
    out.append(report_dict(lip.drift_diffusion));
    out.append(report_dict(lip.obs));
    out.append(report_dict(check_obs_bound(model, n_pairs, radius, seed)));
    return out;
  }, py::arg("model"), py::arg("n_pairs") = 10000, py::arg("radius") = 10.0, py::arg("seed") = 0);

  m.def("micro_step", [](double coarse_dt, double eps, double kappa) {
    const MicroStep s = micro_step(coarse_dt, eps, kappa);
    return py::make_tuple(s.dt, s.substeps);
  }, py::arg("coarse_dt"), py::arg("eps"), py::arg("kappa") = kDefaultKappa);

  m.def("simulate", [](const ModelSpec& model, double eps, double T, double dt_obs,
                       std::size_t particles, std::uint64_t seed, double kappa) {
    py::gil_scoped_release nogil;
    const TimeGrid g = make_grid(T, dt_obs);
    const NoisePlan plan(seed);
    const Ensemble ens = simulate_fast_ensemble(model, eps, g, particles, kappa, plan);
    const BrownianPath w = sample_brownian(g, model.dim_obs, plan, {Role::observation, 0, 0, 0});
    const SlowPath y = simulate_observation(model, ens, w);
    std::vector<double> t(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) t[k] = g.time(k);
    py::gil_scoped_acquire gil;
    py::dict d;
    d["t"] = to_array(t);
    d["Y"] = to_array(y.values, g.size(), y.dim);
    d["W"] = to_array(w.values, g.size(), w.dim);
    d["X"] = to_array(ens.states, g.size(), particles * ens.dim);
    return d;
  }, py::arg("model"), py::arg("eps"), py::arg("T") = 1.0, py::arg("dt_obs") = 1e-3,
     py::arg("particles") = 1000, py::arg("seed") = 0, py::arg("kappa") = kDefaultKappa,
     "Fast ensemble X (grid x particles), observation Y and its noise W");

  m.def("ou_law", [](double sigma, double x0, double eps, double t) {
    const GaussianLaw g = ou_law_oracle(sigma, x0, eps, t);
    return py::make_tuple(g.mean, g.variance);
  }, py::arg("sigma"), py::arg("x0"), py::arg("eps"), py::arg("t"));

  m.def("sample_invariant", [](const ModelSpec& model, std::size_t n, std::uint64_t seed,
                               double dt) {
    InvariantOptions o;
    o.n_samples = n;
    o.dt = dt;
    InvariantSample s;
    {
      py::gil_scoped_release nogil;
      s = sample_invariant(model, NoisePlan(seed), o);
    }
    const auto p = s.cloud.points();
    return to_array(std::vector<double>(p.begin(), p.end()), s.cloud.size(), s.cloud.dim());
  }, py::arg("model"), py::arg("n") = 4096, py::arg("seed") = 0, py::arg("dt") = 1e-3,
     "Thinned states of one long frozen trajectory, shape (n, dim)");

  m.def("compute_hbar", [](const ModelSpec& model, const Array& nu) {
    const VectorEstimate e = compute_hbar(model, to_sample(model, nu));
    return py::make_tuple(to_array(e.value), to_array(e.std_error));
  }, py::arg("model"), py::arg("nu"), "(hbar, jackknife stderr)");

  m.def("compute_Fbar", [](const std::string& F, const Array& nu) {
    InvariantSample s;
    s.cloud = to_measure(nu);
    const Estimate e = compute_Fbar(test_function(F), s);
    return py::make_tuple(e.value, e.std_error);
  }, py::arg("F"), py::arg("nu"));

  m.def("wasserstein2", [](const Array& a, const Array& b) {
    return wasserstein2_1d(to_measure(a), to_measure(b));
  }, py::arg("a"), py::arg("b"), "W2 between uniform 1-D clouds");
  m.def("wasserstein2_assignment", [](const Array& a, const Array& b) {
    return wasserstein2_assignment(to_measure(a), to_measure(b));
  }, py::arg("a"), py::arg("b"));

  m.def("contraction_curve", [](const ModelSpec& model, double x1, double x2, double T,
                                std::size_t n_reps, std::uint64_t seed, double dt,
                                double record_dt) {
    const std::vector<double> a{x1}, b{x2};
    return curve_dict(contraction_experiment(model, a, b, T, NoisePlan(seed),
                                             decay_options(dt, record_dt, n_reps, 0)));
  }, py::arg("model"), py::arg("x1"), py::arg("x2"), py::arg("T") = 4.0,
     py::arg("n_reps") = 256, py::arg("seed") = 0, py::arg("dt") = 1e-3,
     py::arg("record_dt") = 0.25);

  m.def("w2_decay_curve", [](const ModelSpec& model, const Array& nu, double T, std::size_t n_reps,
                             std::uint64_t seed, double dt, double record_dt) {
    return curve_dict(w2_decay_experiment(model, to_sample(model, nu), T, NoisePlan(seed),
                                          decay_options(dt, record_dt, n_reps, 0)));
  }, py::arg("model"), py::arg("nu"), py::arg("T") = 8.0, py::arg("n_reps") = 4096,
     py::arg("seed") = 0, py::arg("dt") = 1e-3, py::arg("record_dt") = 0.25);

  m.def("hbar_decay_curve", [](const ModelSpec& model, const Array& nu, double T,
                               std::size_t n_reps, std::uint64_t seed, double dt,
                               double record_dt) {
    const InvariantSample s = to_sample(model, nu);
    const VectorEstimate hbar = compute_hbar(model, s);
    return curve_dict(hbar_decay_experiment(model, s, hbar, T, NoisePlan(seed),
                                            decay_options(dt, record_dt, n_reps, 0)));
  }, py::arg("model"), py::arg("nu"), py::arg("T") = 8.0, py::arg("n_reps") = 4096,
     py::arg("seed") = 0, py::arg("dt") = 1e-3, py::arg("record_dt") = 0.25);

  m.def("averaging_rate", [](const ModelSpec& model, const std::vector<double>& eps,
                             const std::vector<double>& hbar, double T, std::size_t particles,
                             std::size_t n_reps, std::uint64_t seed, double hbar_se) {
    RateOptions o;
    o.T = T;
    o.particles = particles;
    o.n_reps = n_reps;
    o.hbar_se = hbar_se;
    RateReport r;
    {
      py::gil_scoped_release nogil;
      r = rate_experiment(model, eps, hbar, NoisePlan(seed), o);
    }
    py::dict d;
    d["eps"] = to_array(r.eps_grid);
    d["mean_sq_sup_error"] = to_array(r.mean_sq_sup_error);
    d["stderr"] = to_array(r.std_error);
    d["fitted_slope"] = r.fitted_slope;
    d["slope_stderr"] = r.slope_stderr;
    d["floor"] = r.floor;
    d["used_in_fit"] = r.used_in_fit;
    return d;
  }, py::arg("model"), py::arg("eps"), py::arg("hbar"), py::arg("T") = 1.0,
     py::arg("particles") = 1000, py::arg("n_reps") = 200, py::arg("seed") = 0,
     py::arg("hbar_se") = 0.0);

  m.def("particle_filter", [](const ModelSpec& model, double eps, const Array& y,
                              double dt_obs, std::size_t particles, std::size_t law_particles,
                              const std::vector<std::string>& Fs, std::uint64_t seed,
                              bool resample) {
    SlowPath path;
    path.dim = model.dim_obs;
    path.values = to_vector(y);
    path.grid = make_grid(static_cast<double>(path.values.size() / path.dim - 1) * dt_obs, dt_obs);
    std::vector<TestFunction> fs;
    for (const auto& name : Fs) fs.push_back(test_function(name));
    FilterConfig cfg;
    cfg.resample = resample;
    FilterOutput out;
    {
      py::gil_scoped_release nogil;
      out = particle_filter(model, eps, path, particles, law_particles, fs, NoisePlan(seed), cfg);
    }
    py::dict d;
    py::dict est;
    for (std::size_t f = 0; f < fs.size(); ++f) est[py::str(Fs[f])] = to_array(out.estimates[f]);
    d["estimates"] = est;
    d["ess"] = to_array(out.ess_path);
    d["log_normalizer"] = to_array(out.log_normalizer_path);
    d["resample_count"] = out.resample_count;
    return d;
  }, py::arg("model"), py::arg("eps"), py::arg("y"), py::arg("dt_obs") = 1e-3,
     py::arg("particles") = 2000, py::arg("law_particles") = 1000,
     py::arg("F") = std::vector<std::string>{"F1", "F2", "F3"}, py::arg("seed") = 0,
     py::arg("resample") = false,
     "pi-hat_t(F) on Y's grid, with an independent law ensemble");

  m.def("averaged_filter", [](const std::vector<double>& hbar, double Fbar, const Array& ybar,
                              double dt_obs) {
    SlowPath path;
    path.dim = hbar.size();
    path.values = to_vector(ybar);
    path.grid = make_grid(static_cast<double>(path.values.size() / path.dim - 1) * dt_obs, dt_obs);
    const AveragedFilter af = averaged_filter(hbar, Fbar, path);
    py::dict d;
    d["t"] = to_array(af.times);
    d["lambda"] = to_array(af.lambda);
    d["pi_bar"] = to_array(af.pi_bar);
    return d;
  }, py::arg("hbar"), py::arg("Fbar"), py::arg("ybar"), py::arg("dt_obs") = 1e-3);

  m.def("filter_convergence", [](const ModelSpec& model, const std::vector<double>& eps,
                                 const std::string& F, double Fbar, double t_eval,
                                 std::size_t particles, std::size_t law_particles,
                                 std::size_t n_reps, std::uint64_t seed) {
    FilterExperimentOptions o;
    o.t_eval = t_eval;
    o.particles = particles;
    o.law_particles = law_particles;
    o.n_reps = n_reps;
    FilterReport r;
    {
      py::gil_scoped_release nogil;
      r = filter_convergence_experiment(model, eps, test_function(F), Fbar, NoisePlan(seed), o);
    }
    py::dict d;
    d["eps"] = to_array(r.eps_grid);
    d["mean_sq_gap"] = to_array(r.mean_sq_gap);
    d["stderr"] = to_array(r.std_error);
    d["control_gap"] = r.control_gap;
    d["control_stderr"] = r.control_std_error;
    d["fitted_slope"] = r.fitted_slope;
    return d;
  }, py::arg("model"), py::arg("eps"), py::arg("F") = "F1", py::arg("Fbar") = 0.0,
     py::arg("t_eval") = 1.0, py::arg("particles") = 2000, py::arg("law_particles") = 1000,
     py::arg("n_reps") = 200, py::arg("seed") = 0);

  m.def("martingale_diagnostic", [](const ModelSpec& model, double eps, std::size_t particles,
                                    double T, std::uint64_t seed) {
    DiagnosticOptions o;
    o.particles = particles;
    o.T = T;
    py::gil_scoped_release nogil;
    const Estimate e = martingale_diagnostic(model, eps, NoisePlan(seed), o);
    return std::make_pair(e.value, e.std_error);
  }, py::arg("model"), py::arg("eps"), py::arg("particles") = 100000, py::arg("T") = 1.0,
     py::arg("seed") = 0);

  m.def("inverse_moment", [](const ModelSpec& model, double eps, double r, std::size_t particles,
                             std::size_t law_particles, std::size_t n_reps, std::uint64_t seed) {
    DiagnosticOptions o;
    o.particles = particles;
    o.law_particles = law_particles;
    o.n_reps = n_reps;
    py::gil_scoped_release nogil;
    const Estimate e = inverse_moment_diagnostic(model, eps, r, NoisePlan(seed), o);
    return std::make_pair(e.value, e.std_error);
  }, py::arg("model"), py::arg("eps"), py::arg("r") = 2.0, py::arg("particles") = 100,
     py::arg("law_particles") = 100, py::arg("n_reps") = 200, py::arg("seed") = 0);
}
