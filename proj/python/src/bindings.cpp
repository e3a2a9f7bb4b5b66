#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <span>
#include <vector>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/cce.hpp"
#include "nvzeno/errors.hpp"
#include "nvzeno/experiment.hpp"
#include "nvzeno/zeno.hpp"

namespace py = pybind11;
using namespace nvzeno;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

py::dict diagnostics_dict(const CceDiagnostics& d) {
  py::dict out;
  out["clusters"] = d.clusters;
  out["divide_guard_count"] = d.guard_count;
  out["negative_product_points"] = d.negative_factor_count;
  out["cache_hits"] = d.cache_hits;
  out["max_unitarity_residual"] = d.max_unitarity_residual;
  out["denominator_residual"] = d.denominator_residual;
  return out;
}

InitialBathState parse_initial(const std::string& name) {
  if (name == "zeeman_ground") return InitialBathState::ZeemanGround;
  if (name == "zeeman_excited") return InitialBathState::ZeemanExcited;
  if (name == "infinite_temperature") return InitialBathState::InfiniteTemperature;
  throw ConfigError("unknown initial bath state '" + name + "'");
}

NvParams nv_at(double b_field_tesla) {
  NvParams nv;
  nv.b_field = b_field_tesla;
  return nv;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NV-center relaxation under a 13C bath: cluster-correlation expansion and Zeno analysis.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("__version__") = NVZENO_VERSION;

  m.def("anticrossing_field", [] { return NvParams{}.anticrossing_field(); },
        "D / |gamma_e| in tesla.");
  m.def("omega_a", [](double b) { return nv_at(b).omega_a(); }, py::arg("b_field_tesla"),
        "Electron splitting D + gamma_e B in rad/s.");

  py::class_<BathConfig>(m, "BathConfig")
      .def(py::init([](std::uint64_t seed, std::size_t n_spins, double r_min, double abundance,
                       double field_bz, std::optional<double> r_max) {
             BathConfig c;
             c.seed = seed;
             c.n_spins = n_spins;
             c.r_min = r_min;
             c.abundance = abundance;
             c.field_bz = field_bz;
             c.r_max = r_max;
             c.validate();
             return c;
           }),
           py::arg("seed") = 1, py::arg("n_spins") = 25, py::arg("r_min") = kDefaultExperimentRMin,
           py::arg("abundance") = 0.011, py::arg("field_bz") = units::gauss_to_tesla(1024.98),
           py::arg("r_max") = py::none())
      .def_readwrite("seed", &BathConfig::seed)
      .def_readwrite("n_spins", &BathConfig::n_spins)
      .def_readwrite("r_min", &BathConfig::r_min)
      .def_readwrite("abundance", &BathConfig::abundance)
      .def_readwrite("field_bz", &BathConfig::field_bz)
      .def_readwrite("r_max", &BathConfig::r_max);

  py::class_<Bath>(m, "Bath")
      .def_readonly("config", &Bath::config)
      .def("__len__", &Bath::size)
      .def("prefix", &Bath::prefix, py::arg("n"))
      .def_property_readonly("positions",
                             [](const Bath& b) {
                               Eigen::MatrixX3d p(static_cast<Eigen::Index>(b.size()), 3);
                               for (std::size_t i = 0; i < b.size(); ++i)
                                 p.row(static_cast<Eigen::Index>(i)) = b.sites[i].r.transpose();
                               return p;
                             })
      .def_property_readonly("omega",
                             [](const Bath& b) {
                               std::vector<double> w;
                               for (const auto& s : b.sites) w.push_back(s.omega);
                               return to_array(w);
                             })
      .def("hyperfine", [](const Bath& b, std::size_t i) { return Eigen::Matrix3d(b.sites.at(i).hyperfine); },
           py::arg("i"))
      .def("to_json", [](const Bath& b) { return bath_to_json(b).dump(); })
      .def_static("from_json", [](const std::string& s) { return bath_from_json(nlohmann::json::parse(s)); });

  m.def("sample_bath", [](const BathConfig& c) { return sample_bath(c); }, py::arg("config"));

  m.def("spectral_weights",
        [](const Bath& b) {
          std::vector<double> omega, weight;
          for (const auto& line : spectral_weights(b)) {
            omega.push_back(line.omega);
            weight.push_back(line.weight);
          }
          return py::make_tuple(to_array(omega), to_array(weight));
        },
        py::arg("bath"), "(omega_j, weight_j) arrays in site order.");

  m.def("uniform_grid", [](double t_max, std::size_t n) { return to_array(uniform_grid(t_max, n)); },
        py::arg("t_max"), py::arg("n"));

  m.def("cce_survival",
        [](const Bath& bath, const py::array_t<double, py::array::c_style | py::array::forcecast>& times,
           int order, int threads, std::optional<double> max_diameter, bool include_nuclear_dipole,
           const std::string& initial) {
          CceOptions o;
          o.order = order;
          o.threads = threads;
          o.policy.max_diameter = max_diameter;
          o.include_nuclear_dipole = include_nuclear_dipole;
          o.initial = parse_initial(initial);
          const auto grid = to_vector(times);
          CceResult r;
          {
            py::gil_scoped_release release;
            r = cce_survival(nv_at(bath.config.field_bz), bath, grid, o);
          }
          return py::make_tuple(to_array(r.curve.values), diagnostics_dict(r.diagnostics));
        },
        py::arg("bath"), py::arg("times"), py::arg("order") = 4, py::arg("threads") = 0,
        py::arg("max_diameter") = py::none(), py::arg("include_nuclear_dipole") = false,
        py::arg("initial") = "zeeman_ground",
        "P^(M)(t) and run diagnostics for the given bath.");

  m.def("exact_survival",
        [](const Bath& bath, const py::array_t<double, py::array::c_style | py::array::forcecast>& times,
           std::size_t max_spins, const std::string& initial) {
          const auto grid = to_vector(times);
          SurvivalCurve c;
          {
            py::gil_scoped_release release;
            c = exact_survival_full(nv_at(bath.config.field_bz), bath, grid, max_spins,
                                    parse_initial(initial));
          }
          return to_array(c.values);
        },
        py::arg("bath"), py::arg("times"), py::arg("max_spins") = kDefaultOracleMaxSpins,
        py::arg("initial") = "zeeman_ground", "Exact whole-bath survival (small N only).");

  m.def("repeated_measurement_survival",
        [](double p, long n) { return repeated_measurement_survival(p, n); }, py::arg("p_tau"),
        py::arg("n"));
  m.def("broadening", &broadening, py::arg("omega"), py::arg("tau"), py::arg("omega_a"));
  m.def("effective_rate",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& times,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& values, double tau) {
          SurvivalCurve c;
          c.times = to_vector(times);
          c.values = to_vector(values);
          return effective_rate(c, tau);
        },
        py::arg("times"), py::arg("values"), py::arg("tau"));
  m.def("overlap_rate",
        [](const Bath& b, double tau) {
          const auto spectrum = spectral_weights(b);
          return overlap_rate(spectrum, tau, nv_at(b.config.field_bz).omega_a());
        },
        py::arg("bath"), py::arg("tau"), "2 pi sum_j F(omega_j, tau) w_j for the bath spectrum.");

  m.def("config_hash",
        [](const std::filesystem::path& p) { return config_hash(load_experiment_config(p)); },
        py::arg("config_path"), "Validates a config file and returns its hash.");
  m.def("run_simulation",
        [](const std::filesystem::path& config, const std::filesystem::path& out) {
          const auto c = load_experiment_config(config);
          StudyResult r;
          {
            py::gil_scoped_release release;
            r = run_simulation(c, out);
          }
          return r.files;
        },
        py::arg("config_path"), py::arg("out_dir"), "Runs `nvzeno simulate` and returns the files written.");
}
