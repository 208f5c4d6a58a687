#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phasemix/coarse_grain.hpp"
#include "phasemix/estimators.hpp"
#include "phasemix/glauber.hpp"
#include "phasemix/graph.hpp"
#include "phasemix/harness.hpp"
#include "phasemix/oracle.hpp"
#include "phasemix/random_cluster.hpp"

namespace py = pybind11;
using namespace phasemix;

namespace {

std::vector<int> spins_list(const SpinConfig& s) { return {s.spins().begin(), s.spins().end()}; }

SpinConfig spins_from(const std::vector<int>& v) {
  std::vector<std::int8_t> out;
  out.reserve(v.size());
  for (int x : v) {
    if (x != 1 && x != -1) throw py::value_error("spins must be +1 or -1");
    out.push_back(static_cast<std::int8_t>(x));
  }
  return SpinConfig(std::move(out));
}

SpinBoundary boundary_from(const Graph& g, const std::string& name) {
  if (g.num_boundary() == 0 || name.empty() || name == "none") return {};
  return build_spin_boundary(g, name);
}

ChainMode mode_from(const std::string& name) {
  if (name == "plain") return ChainMode::plain;
  if (name == "restricted-plus") return ChainMode::restricted_plus;
  if (name == "restricted-minus") return ChainMode::restricted_minus;
  throw py::value_error("unknown chain mode: " + name);
}

ExperimentConfig config_from(const py::dict& d) {
  FlatConfig flat;
  for (const auto& [k, v] : d) {
    const auto key = py::cast<std::string>(k);
    if (py::isinstance<py::bool_>(v)) flat.set(key, py::cast<bool>(v));
    else if (py::isinstance<py::int_>(v)) flat.set(key, py::cast<std::int64_t>(v));
    else if (py::isinstance<py::float_>(v)) flat.set(key, py::cast<double>(v));
    else if (py::isinstance<py::str>(v)) flat.set(key, py::cast<std::string>(v));
    else flat.set(key, py::cast<std::vector<double>>(v));
  }
  return ExperimentConfig::from_flat(flat);
}

py::dict estimate_dict(const Estimate& e) {
  py::dict d;
  d["estimate"] = e.estimate;
  d["half_width"] = e.half_width;
  d["n_samples"] = e.n_samples;
  return d;
}

}  // namespace

PYBIND11_MODULE(_phasemix, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<OracleCapError>(m, "OracleCapError", PyExc_ValueError);
  py::register_exception<EstimatorError>(m, "EstimatorError", PyExc_ValueError);
  py::register_exception<CoarseGrainError>(m, "CoarseGrainError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def_static("torus", &Graph::torus, py::arg("d"), py::arg("n"))
      .def_static("box", &Graph::box, py::arg("d"), py::arg("m"))
      .def_static("grid_box", &Graph::grid_box, py::arg("d"), py::arg("side"))
      .def_static(
          "general",
          [](std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges, std::size_t boundary) {
            std::vector<Edge> es;
            for (auto [u, v] : edges) es.push_back({u, v});
            return Graph::general(n, std::move(es), boundary);
          },
          py::arg("num_vertices"), py::arg("edges"), py::arg("num_boundary") = 0)
      .def_static(
          "random_regular",
          [](std::size_t n, int degree, std::uint64_t seed) { return random_regular({n, degree, seed}); },
          py::arg("num_vertices"), py::arg("degree"), py::arg("seed"))
      .def_property_readonly("num_free", &Graph::num_free)
      .def_property_readonly("num_boundary", &Graph::num_boundary)
      .def_property_readonly("num_vertices", &Graph::num_vertices)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("dim", &Graph::dim)
      .def_property_readonly("side", &Graph::side)
      .def_property_readonly("edges",
                             [](const Graph& g) {
                               std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
                               for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
                               return out;
                             })
      .def("neighbors", [](const Graph& g, std::uint32_t v) {
        if (v >= g.num_vertices()) throw py::index_error("vertex out of range");
        const auto nb = g.neighbors(v);
        return std::vector<std::uint32_t>(nb.begin(), nb.end());
      });

  m.def(
      "edge_expansion",
      [](const Graph& g) {
        const auto r = edge_expansion_exact(g);
        return std::make_pair(r.num, r.den);
      },
      py::arg("graph"));
  m.def("tree_like_defect", &tree_like_defect, py::arg("graph"), py::arg("v"), py::arg("r"));

  m.def(
      "enumerate_gibbs",
      [](const Graph& g, double beta, const std::string& boundary) {
        const auto e = enumerate_gibbs(g, {beta}, boundary_from(g, boundary));
        py::dict d;
        d["pi"] = e.pi.prob;
        d["pi_plus"] = e.pi_plus.prob;
        d["pi_minus"] = e.pi_minus.prob;
        d["zero_atom"] = e.zero_atom;
        return d;
      },
      py::arg("graph"), py::arg("beta"), py::arg("boundary") = "none");

  m.def(
      "glauber",
      [](const Graph& g, double beta, double t_max, std::uint64_t seed, const std::string& init,
         const std::string& mode, const std::string& boundary, double probe_interval) {
        const auto seeds = ReplicaSeeds::from(seed);
        Rng rng(seeds.init);
        const GlauberDynamics dyn(g, {beta}, boundary_from(g, boundary));
        ChainState st{draw_initial(g, InitDistribution::parse(init), rng), 0.0, mode_from(mode), 0};
        EventStream stream(seeds.updates, g.num_free());
        const ProbeSchedule sched{0.0, probe_interval, true, {}};
        const auto sum = run(dyn, st, stream, t_max, probe_interval > 0 ? &sched : nullptr);
        py::dict d;
        d["spins"] = spins_list(st.sigma);
        d["magnetization"] = st.sigma.magnetization();
        d["events"] = sum.events;
        d["restricted_fires"] = sum.restricted_fires;
        std::vector<double> times;
        std::vector<long long> mags, cuts;
        for (const auto& p : sum.probes) {
          times.push_back(p.time);
          mags.push_back(p.magnetization);
          cuts.push_back(p.cut);
        }
        d["probe_times"] = times;
        d["probe_magnetization"] = mags;
        d["probe_cut"] = cuts;
        return d;
      },
      py::arg("graph"), py::arg("beta"), py::arg("t_max"), py::arg("seed"), py::arg("init") = "nu-pm",
      py::arg("mode") = "plain", py::arg("boundary") = "none", py::arg("probe_interval") = 0.0);

  m.def(
      "hitting_time",
      [](const Graph& g, double beta, double t_cap, std::uint64_t seed, const std::string& init) {
        const auto seeds = ReplicaSeeds::from(seed);
        Rng rng(seeds.init);
        const GlauberDynamics dyn(g, {beta});
        ChainState st{draw_initial(g, InitDistribution::parse(init), rng), 0.0, ChainMode::restricted_plus, 0};
        EventStream stream(seeds.updates, g.num_free());
        return hitting_time(dyn, st, stream, PhaseTag::plus_boundary, t_cap);
      },
      py::arg("graph"), py::arg("beta"), py::arg("t_cap"), py::arg("seed"), py::arg("init") = "all-plus");

  m.def(
      "swendsen_wang",
      [](const Graph& g, double beta, std::size_t sweeps, std::uint64_t seed, std::vector<int> start,
         const std::string& boundary) {
        SwendsenWang sw(g, {beta}, boundary_from(g, boundary));
        Rng rng(seed);
        SpinConfig sigma = start.empty() ? SpinConfig::all_plus(g) : spins_from(start);
        BondConfig omega(g.num_edges());
        for (std::size_t i = 0; i < sweeps; ++i) sw.step(sigma, rng, &omega);
        const auto bits = omega.bits();
        py::dict d;
        d["spins"] = spins_list(sigma);
        d["bonds"] = std::vector<int>(bits.begin(), bits.end());
        return d;
      },
      py::arg("graph"), py::arg("beta"), py::arg("sweeps"), py::arg("seed"), py::arg("start") = std::vector<int>{},
      py::arg("boundary") = "none");

  m.def(
      "coarse_field",
      [](const Graph& g, const std::vector<int>& bonds, int k) {
        if (bonds.size() != g.num_edges()) throw py::value_error("one bond bit per edge expected");
        BondConfig omega(g.num_edges());
        for (std::size_t e = 0; e < bonds.size(); ++e) omega.set(e, bonds[e] != 0);
        const BlockGrid grid(g, k);
        const auto field = coarse_field(grid, omega);
        const auto check = check_good_cluster_uniqueness(grid, omega, field);
        py::dict d;
        d["side"] = field.side;
        d["values"] = std::vector<int>(field.value.begin(), field.value.end());
        d["open"] = field.count_open();
        d["clusters"] = check.clusters;
        d["violations"] = check.violations;
        return d;
      },
      py::arg("graph"), py::arg("bonds"), py::arg("k"));

  m.def(
      "reveal_coupling",
      [](int m_side, int k, double p, const std::string& xi, const std::string& xi_prime, std::uint64_t seed) {
        const Graph box = Graph::box(2, m_side);
        const BlockGrid grid(box, k);
        auto part = [&](const std::string& name) {
          if (name == "wired") return BoundaryPartition::wired(box);
          if (name == "free") return BoundaryPartition::free(box);
          throw py::value_error("boundary must be wired or free");
        };
        const auto r = reveal_coupling(grid, {p, 2.0}, part(xi), part(xi_prime), seed);
        py::dict d;
        d["success"] = r.success;
        d["interior_agree"] = r.interior_agree;
        d["partitions_agree"] = r.partitions_agree;
        d["surface_matches"] = r.surface_matches;
        d["approximate"] = r.approximate;
        d["processed"] = r.processed;
        return d;
      },
      py::arg("m"), py::arg("k"), py::arg("p"), py::arg("xi") = "wired", py::arg("xi_prime") = "free",
      py::arg("seed") = 0);

  m.def(
      "tv_plugin",
      [](const std::vector<std::uint64_t>& counts, const std::vector<double>& exact) {
        if (counts.size() != exact.size()) throw py::value_error("counts and law differ in length");
        EmpiricalLaw emp(SupportKind::histogram, counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) emp.add(i, counts[i]);
        return estimate_dict(tv_plugin(emp, exact));
      },
      py::arg("counts"), py::arg("exact"));
  m.def("clopper_pearson_upper", &clopper_pearson_upper, py::arg("hits"), py::arg("n"));
  m.def("beta0_survival_exact", &beta0_survival_exact, py::arg("num_sites"), py::arg("t"));
  m.def(
      "g_of_t",
      [](const std::vector<double>& f, int n, double K, double t, int d) { return g_of_t(f, n, K, t, d); },
      py::arg("f"), py::arg("n"), py::arg("K"), py::arg("t"), py::arg("d") = 2);

  m.def(
      "binder_crossing",
      [](int d, int n_small, int n_large, double lo, double hi, double tol, std::size_t sweeps, std::uint64_t seed) {
        return binder_crossing(d, n_small, n_large, lo, hi, tol, sweeps, seed).beta_c;
      },
      py::arg("d"), py::arg("n_small"), py::arg("n_large"), py::arg("lo"), py::arg("hi"), py::arg("tol"),
      py::arg("sweeps"), py::arg("seed"));

  m.def(
      "magnetization_ldp",
      [](const Graph& g, double beta, double eps, std::size_t replicas, std::size_t production_sweeps,
         std::uint64_t seed) {
        MulticanonicalConfig cfg;
        cfg.replicas = replicas;
        cfg.production_sweeps = production_sweeps;
        cfg.seed = seed;
        const auto r = multicanonical_ldp(g, beta, eps, cfg);
        py::dict d;
        d["log_estimate"] = r.log_estimate;
        d["log_half_width"] = r.log_half_width;
        d["estimate"] = estimate_dict(r.estimate);
        return d;
      },
      py::arg("graph"), py::arg("beta"), py::arg("eps"), py::arg("replicas") = 4,
      py::arg("production_sweeps") = 20000, py::arg("seed") = 0);

  m.def(
      "wsm_scan",
      [](const Graph& g, double beta, std::uint32_t v, const std::vector<int>& radii, std::size_t samples,
         std::uint64_t seed) {
        WSMScanConfig cfg;
        cfg.radii = radii;
        cfg.samples = samples;
        cfg.seed = seed;
        py::list out;
        for (const auto& row : wsm_within_phase_scan(g, beta, v, cfg).rows) {
          py::dict d = estimate_dict(row.site);
          d["radius"] = row.radius;
          out.append(d);
        }
        return out;
      },
      py::arg("graph"), py::arg("beta"), py::arg("v"), py::arg("radii"), py::arg("samples"), py::arg("seed") = 0);

  m.def(
      "oracle_suite",
      [](const std::string& suite, const std::vector<double>& betas) {
        py::list out;
        for (const auto& r : run_oracle_suite(suite, betas)) {
          py::dict d;
          d["instance"] = r.instance;
          d["check"] = r.check;
          d["max_violation"] = r.max_violation;
          d["pass"] = r.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("suite"), py::arg("betas"));

  m.def("commands", [] {
    std::vector<std::string> names;
    for (const auto& c : command_registry()) names.push_back(c.name);
    return names;
  });

  m.def(
      "run_experiment",
      [](const std::string& command, const py::dict& config) {
        const auto out = run_experiment(command, config_from(config));
        py::list rows;
        for (const auto& r : out.rows) {
          py::dict d;
          d["param"] = r.param;
          d["value"] = r.value;
          d["estimate"] = r.estimate;
          d["half_width"] = r.half_width;
          d["n_samples"] = r.n_samples;
          rows.append(d);
        }
        py::dict d;
        d["status"] = out.status;
        d["csv_path"] = out.csv_path;
        d["manifest_path"] = out.manifest_path;
        d["rows"] = rows;
        return d;
      },
      py::arg("command"), py::arg("config"));
}
