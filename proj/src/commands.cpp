#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "phasemix/coarse_grain.hpp"
#include "phasemix/estimators.hpp"
#include "phasemix/glauber.hpp"
#include "phasemix/harness.hpp"
#include "phasemix/oracle.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/random_cluster.hpp"

namespace phasemix {

namespace {

constexpr std::size_t kExactStateSites = 16;

std::size_t count_of(std::int64_t v, const char* key) {
  if (v <= 0) throw ConfigError(std::string("config key '") + key + "': must be positive");
  return static_cast<std::size_t>(v);
}

std::size_t nonneg(std::int64_t v, const char* key) {
  if (v < 0) throw ConfigError(std::string("config key '") + key + "': must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> int_list(const std::vector<double>& v, const char* key) {
  std::vector<int> out;
  for (double x : v) {
    if (x != std::floor(x)) throw ConfigError(std::string("config key '") + key + "': entries must be integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

ChainMode parse_mode(const std::string& s) {
  if (s == "plain") return ChainMode::plain;
  if (s == "restricted-plus") return ChainMode::restricted_plus;
  if (s == "restricted-minus") return ChainMode::restricted_minus;
  throw ConfigError("config key 'mode': unknown mode '" + s + "'");
}

InitDistribution parse_init(const std::string& s, const char* key) {
  try {
    return InitDistribution::parse(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError(std::string("config key '") + key + "': unknown init '" + s + "'");
  }
}

BoundaryPartition parse_partition(const Graph& g, const std::string& s, const char* key) {
  if (s == "wired" || s == "plus" || s == "minus") return BoundaryPartition::wired(g);
  if (s == "free") return BoundaryPartition::free(g);
  throw ConfigError(std::string("config key '") + key + "': partition must be wired or free, got '" + s + "'");
}

Estimate mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return {mean, kZ95 * sd / std::sqrt(n), xs.size()};
}

void add_row(RunContext& ctx, const std::string& param, const std::string& value, const Estimate& e) {
  ctx.row({param, value, e.estimate, e.half_width, e.n_samples});
}

std::string num(double x) { return format_number(x); }

std::string tagged(const std::string& param, const std::vector<double>& betas, double beta) {
  return betas.size() > 1 ? param + "[beta=" + num(beta) + "]" : param;
}

// Inverse temperatures of the run; with beta_factor set they come from a
// Binder crossing on the configured pair of tori.
std::vector<double> resolve_betas(RunContext& ctx) {
  const auto& c = ctx.config();
  if (c.beta_factor <= 0) {
    if (c.beta.empty()) throw ConfigError("config key 'beta': empty list");
    return c.beta;
  }
  const auto bc = binder_crossing(c.d, static_cast<int>(c.binder_small), static_cast<int>(c.binder_large), c.binder_lo,
                                  c.binder_hi, c.binder_tol, count_of(c.binder_sweeps, "binder_sweeps"),
                                  ctx.seed("binder"));
  ctx.row({"beta_c_binder", "", bc.beta_c, 0.5 * c.binder_tol, bc.probes.size()});
  ctx.row({"beta", "", c.beta_factor * bc.beta_c, 0.5 * c.binder_tol * c.beta_factor, bc.probes.size()});
  return {c.beta_factor * bc.beta_c};
}

double rc_p(const ExperimentConfig& c, double beta) { return c.p > 0 ? c.p : -std::expm1(-beta); }

void cmd_simulate(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  const SpinBoundary bc = build_spin_boundary(g, c.boundary);
  const InitDistribution init = parse_init(c.init, "init");
  const ChainMode mode = parse_mode(c.mode);
  const std::size_t reps = count_of(c.replicas, "replicas");
  if (c.probe_interval_continuous_time <= 0) throw ConfigError("config key 'probe_interval_continuous_time': must be positive");
  const auto betas = resolve_betas(ctx);
  const double nn = static_cast<double>(g.num_free());
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const double beta = betas[bi];
    const GlauberDynamics dyn(g, ModelParams{beta}, bc);
    ProbeSchedule sched{0.0, c.probe_interval_continuous_time, false, {}};
    const std::uint64_t master = ctx.seed("simulate/" + std::to_string(bi));
    std::vector<RunSummary> runs(reps);
    std::vector<std::uint64_t> finals(reps);
    parallel_for(reps, static_cast<std::size_t>(c.workers), [&](std::size_t r) {
      const auto seeds = ReplicaSeeds::from(seed_derive(master, "replica/" + std::to_string(r)));
      Rng rng(seeds.init);
      ChainState st{draw_initial(g, init, rng), 0.0, mode, 0};
      EventStream stream(seeds.updates, g.num_free());
      runs[r] = run(dyn, st, stream, c.horizon_continuous_time, &sched);
      if (g.num_free() <= kExactStateSites) finals[r] = encode_spins(st.sigma);
    });
    // small graphs: final-state law against exact enumeration
    if (g.num_free() <= kExactStateSites && mode == ChainMode::plain) {
      const auto exact = enumerate_gibbs(g, ModelParams{beta}, bc).pi;
      EmpiricalLaw emp(SupportKind::histogram, exact.size());
      for (auto code : finals) emp.add(code);
      add_row(ctx, tagged("state_tv_vs_gibbs", betas, beta), num(c.horizon_continuous_time), tv_plugin(emp, exact.prob));
    }
    for (std::size_t j = 0; j < runs[0].probes.size(); ++j) {
      std::vector<double> m, am;
      for (const auto& r : runs) {
        const double x = static_cast<double>(r.probes[j].magnetization) / nn;
        m.push_back(x);
        am.push_back(std::abs(x));
      }
      add_row(ctx, tagged("m_per_site", betas, beta), num(runs[0].probes[j].time), mean_of(m));
      add_row(ctx, tagged("abs_m_per_site", betas, beta), num(runs[0].probes[j].time), mean_of(am));
    }
    std::vector<double> fires;
    for (const auto& r : runs) fires.push_back(static_cast<double>(r.restricted_fires));
    add_row(ctx, tagged("restricted_fires", betas, beta), num(c.horizon_continuous_time), mean_of(fires));
  }
}

void cmd_couple(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  const SpinBoundary bc = build_spin_boundary(g, c.boundary);
  const std::size_t reps = count_of(c.replicas, "replicas");
  const auto betas = resolve_betas(ctx);
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const GlauberDynamics dyn(g, ModelParams{betas[bi]}, bc);
    const std::uint64_t master = ctx.seed("couple/" + std::to_string(bi));
    std::vector<std::uint64_t> violations(reps), met(reps);
    parallel_for(reps, static_cast<std::size_t>(c.workers), [&](std::size_t r) {
      CouplingBundle b{EventStream(seed_derive(master, "replica/" + std::to_string(r)), g.num_free()),
                       {ChainState{SpinConfig::all_plus(g), 0.0, ChainMode::plain, 0},
                        ChainState{SpinConfig::all_minus(g), 0.0, ChainMode::plain, 0}}};
      violations[r] = grand_coupling_run(dyn, b, c.horizon_continuous_time).order_violations;
      met[r] = b.chains[0].sigma == b.chains[1].sigma;
    });
    const auto total = std::accumulate(violations.begin(), violations.end(), std::uint64_t{0});
    const auto coalesced = std::accumulate(met.begin(), met.end(), std::uint64_t{0});
    ctx.row({tagged("order_violations", betas, betas[bi]), num(c.horizon_continuous_time), static_cast<double>(total),
             0.0, reps});
    add_row(ctx, tagged("coalesced_fraction", betas, betas[bi]), num(c.horizon_continuous_time),
            proportion(coalesced, reps));
    if (total) ctx.fail("grand coupling lost the pointwise order");
  }
}

void cmd_rc(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  const auto betas = resolve_betas(ctx);
  const std::size_t samples = count_of(c.samples, "samples");
  const std::size_t burn = nonneg(c.burn_in_sweeps, "burn_in_sweeps");
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const double p = rc_p(c, betas[bi]);
    if (!(p > 0 && p < 1)) throw ConfigError("config key 'p': must lie in (0, 1)");
    const double beta = -std::log1p(-p);
    const BoundaryPartition xi = parse_partition(g, g.num_boundary() ? c.boundary : "free", "boundary");
    Rng rng(ctx.seed("rc/" + std::to_string(bi)));
    std::vector<double> density, largest, boundary;
    BondConfig omega(g.num_edges());
    auto record = [&] {
      const auto lab = label_components(g, omega, xi);
      density.push_back(static_cast<double>(omega.num_open()) / static_cast<double>(std::max<std::size_t>(1, g.num_edges())));
      largest.push_back(static_cast<double>(lab.sizes[lab.largest()]) / static_cast<double>(g.num_vertices()));
      std::size_t on_boundary = 0;
      for (std::size_t k = 0; k < lab.count(); ++k)
        if (lab.touches_boundary[k]) on_boundary += lab.sizes[k];
      boundary.push_back(static_cast<double>(on_boundary) / static_cast<double>(g.num_vertices()));
    };
    if (g.num_boundary() == 0 || xi.is_wired()) {
      // Edwards-Sokal: the bonds of an SW sweep are RC distributed
      SwendsenWang sw(g, ModelParams{beta}, g.num_boundary() ? SpinBoundary::uniform(g, 1) : SpinBoundary{});
      SpinConfig sigma = SpinConfig::all_plus(g);
      for (std::size_t s = 0; s < burn; ++s) sw.step(sigma, rng);
      for (std::size_t s = 0; s < samples; ++s) {
        sw.step(sigma, rng, &omega);
        record();
      }
    } else {
      EventStream stream(rng.next_u64(), g.num_edges());
      const RCParams params{p, ModelParams::q};
      double t = 0;
      const double unit = 1.0;  // continuous time per recorded sample
      t += static_cast<double>(burn) * unit;
      rc_glauber_run(g, omega, stream, t, params, xi);
      for (std::size_t s = 0; s < samples; ++s) {
        t += unit;
        rc_glauber_run(g, omega, stream, t, params, xi);
        record();
      }
    }
    add_row(ctx, tagged("open_edge_fraction", betas, betas[bi]), num(p), mean_of(density));
    add_row(ctx, tagged("largest_cluster_fraction", betas, betas[bi]), num(p), mean_of(largest));
    add_row(ctx, tagged("boundary_cluster_fraction", betas, betas[bi]), num(p), mean_of(boundary));
    std::ofstream out(ctx.side_file(".rc" + std::to_string(bi) + ".bonds"));
    write_bonds(out, omega);
  }
}

CoarseField analyse_field(const BlockGrid& grid, const BondConfig& omega, std::vector<double>& bad,
                          std::vector<double>& largest, std::uint64_t& violations, std::vector<double>& surface) {
  const CoarseField f = coarse_field(grid, omega);
  const double centres = static_cast<double>(grid.num_centres());
  bad.push_back(1.0 - static_cast<double>(f.count_open()) / centres);
  const auto cl = field_clusters(grid, f, Adjacency::k_adjacent);
  largest.push_back(cl.count() ? static_cast<double>(cl.sizes[static_cast<std::size_t>(cl.largest())]) / centres : 0.0);
  violations += check_good_cluster_uniqueness(grid, omega, f).violations;
  if (!grid.periodic()) {
    const auto s = outermost_surface(grid, f);
    surface.push_back(static_cast<double>(s.interior.size()) / centres);
  }
  return f;
}

void cmd_coarse(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  std::vector<BondConfig> configs;
  if (!c.bonds_file.empty()) {
    std::ifstream in(c.bonds_file);
    if (!in) throw ConfigError("config key 'bonds_file': cannot open '" + c.bonds_file + "'");
    configs.push_back(read_bonds(in));
    if (configs[0].size() != g.num_edges()) throw ConfigError("config key 'bonds_file': edge count does not match the geometry");
  }
  const auto ks = int_list(c.ks, "ks");
  std::vector<BlockGrid> grids;
  try {
    for (int k : ks) grids.emplace_back(g, k);
  } catch (const CoarseGrainError& e) {
    throw ConfigError(std::string("config key 'ks': ") + e.what());
  }
  const double p = rc_p(c, c.beta.empty() ? 0.0 : c.beta.front());
  const std::size_t samples = configs.empty() ? count_of(c.samples, "samples") : 1;
  std::vector<std::vector<double>> bad(ks.size()), largest(ks.size()), surface(ks.size());
  std::vector<std::uint64_t> violations(ks.size(), 0);
  std::vector<CoarseField> last(ks.size());
  auto analyse = [&](const BondConfig& omega) {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      last[i] = analyse_field(grids[i], omega, bad[i], largest[i], violations[i], surface[i]);
    }
  };
  if (!configs.empty()) {
    analyse(configs[0]);
  } else {
    if (!(p > 0 && p < 1)) throw ConfigError("config key 'p': must lie in (0, 1)");
    const double beta = -std::log1p(-p);
    SwendsenWang sw(g, ModelParams{beta}, g.num_boundary() ? SpinBoundary::uniform(g, 1) : SpinBoundary{});
    Rng rng(ctx.seed("coarse"));
    SpinConfig sigma = SpinConfig::all_plus(g);
    BondConfig omega(g.num_edges());
    const std::size_t burn = nonneg(c.burn_in_sweeps, "burn_in_sweeps");
    const std::size_t thin = count_of(c.thin_sweeps, "thin_sweeps");
    for (std::size_t s = 0; s < burn; ++s) sw.step(sigma, rng);
    for (std::size_t s = 0; s < samples; ++s) {
      for (std::size_t t = 1; t < thin; ++t) sw.step(sigma, rng);
      sw.step(sigma, rng, &omega);
      analyse(omega);
    }
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const std::string k = std::to_string(ks[i]);
    add_row(ctx, "bad_block_density", k, mean_of(bad[i]));
    add_row(ctx, "largest_good_cluster_fraction", k, mean_of(largest[i]));
    ctx.row({"good_cluster_violations", k, static_cast<double>(violations[i]), 0.0, samples});
    if (violations[i]) ctx.fail("good-cluster uniqueness violated at k=" + k);
    if (!surface[i].empty()) add_row(ctx, "surface_interior_fraction", k, mean_of(surface[i]));
    std::ofstream out(ctx.side_file(".k" + k + ".field"));
    write_field(out, last[i]);
  }
}

void cmd_wsm_scan(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  const auto betas = resolve_betas(ctx);
  WSMScanConfig w;
  w.radii = int_list(c.radii, "radii");
  w.samples = count_of(c.samples, "samples");
  w.burn_in = nonneg(c.burn_in_sweeps, "burn_in_sweeps");
  w.thin = count_of(c.thin_sweeps, "thin_sweeps");
  w.target_half_width = c.target_half_width;
  if (c.vertex < 0 || static_cast<std::size_t>(c.vertex) >= g.num_free()) throw ConfigError("config key 'vertex': out of range");
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    w.seed = ctx.seed("wsm/" + std::to_string(bi));
    const auto r = wsm_within_phase_scan(g, betas[bi], static_cast<std::uint32_t>(c.vertex), w);
    ctx.row({tagged("reference_plus", betas, betas[bi]), "", r.reference_plus, 0.0, w.samples});
    for (const auto& row : r.rows) {
      add_row(ctx, tagged("site_tv", betas, betas[bi]), std::to_string(row.radius), row.site);
      if (row.patch) add_row(ctx, tagged("patch_tv", betas, betas[bi]), std::to_string(row.radius), *row.patch);
      ctx.row({tagged("ball_plus", betas, betas[bi]), std::to_string(row.radius), row.ball_plus, 0.0, w.samples});
    }
  }
}

// Distribution-free 95% interval for the median from order statistics.
double median_half_width(std::vector<std::optional<double>> times) {
  std::vector<double> t;
  for (auto& x : times) t.push_back(x ? *x : INFINITY);
  std::sort(t.begin(), t.end());
  const double n = static_cast<double>(t.size());
  const double spread = kZ95 * std::sqrt(n) / 2;
  const long lo = std::max(0L, static_cast<long>(std::floor(n / 2 - spread)));
  const long hi = std::min(static_cast<long>(t.size()) - 1, static_cast<long>(std::ceil(n / 2 + spread)));
  return 0.5 * (t[static_cast<std::size_t>(hi)] - t[static_cast<std::size_t>(lo)]);
}

void cmd_mix_compare(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  if (g.num_boundary() != 0) throw ConfigError("config key 'geometry': mix-compare runs on graphs without boundary");
  const auto betas = resolve_betas(ctx);
  RelaxConfig rc;
  for (const auto& name : split_list(c.inits)) rc.inits.push_back(parse_init(name, "inits"));
  if (rc.inits.empty()) throw ConfigError("config key 'inits': empty list");
  rc.replicas = count_of(c.replicas, "replicas");
  rc.horizon = c.horizon_continuous_time;
  rc.probe_interval = c.probe_interval_continuous_time;
  rc.rule = {c.band, count_of(c.dwell, "dwell")};
  rc.reference_sweeps = count_of(c.samples, "samples");
  rc.workers = static_cast<std::size_t>(c.workers);
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    rc.seed = ctx.seed("mix/" + std::to_string(bi));
    const auto r = relaxation_compare(g, betas[bi], rc);
    ctx.row({tagged("reference_abs_m", betas, betas[bi]), "", r.reference, 0.0, rc.reference_sweeps});
    const RelaxRow* plus_minus = nullptr;
    for (const auto& row : r.rows) {
      ctx.row({tagged("median_time_to_band", betas, betas[bi]), row.init, row.median, median_half_width(row.times),
               rc.replicas});
      ctx.row({tagged("reached_fraction", betas, betas[bi]), row.init,
               static_cast<double>(row.reached) / static_cast<double>(rc.replicas), 0.0, rc.replicas});
      if (row.init == "nu-pm") plus_minus = &row;
    }
    if (plus_minus)
      for (const auto& row : r.rows)
        if (&row != plus_minus)
          ctx.row({tagged("median_ratio", betas, betas[bi]), row.init + "/nu-pm", row.median / plus_minus->median, 0.0,
                   rc.replicas});
  }
}

void cmd_ldp_probe(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto betas = resolve_betas(ctx);
  const auto sizes = int_list(c.sizes, "sizes");
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const std::string p = tagged("prob_abs_m_le_eps", betas, betas[bi]);
    if (c.method == "direct") {
      const auto rows = magnetization_ldp_probe(c.d, sizes, betas[bi], c.eps, count_of(c.samples, "samples"),
                                                nonneg(c.burn_in_sweeps, "burn_in_sweeps"),
                                                ctx.seed("ldp/" + std::to_string(bi)));
      for (const auto& r : rows) {
        add_row(ctx, p, std::to_string(r.n), r.direct);
        if (r.hits == 0) ctx.row({p + ":upper_bound", std::to_string(r.n), r.upper_bound, 0.0, r.direct.n_samples});
      }
    } else if (c.method == "multicanonical") {
      for (int n : sizes) {
        MulticanonicalConfig mc;
        mc.replicas = count_of(c.replicas, "replicas");
        mc.production_sweeps = count_of(c.samples, "samples");
        mc.seed = ctx.seed("mc/" + std::to_string(bi) + "/" + std::to_string(n));
        const Graph g = Graph::torus(c.d, n);
        const auto r = multicanonical_ldp(g, betas[bi], c.eps, mc);
        add_row(ctx, p, std::to_string(n), r.estimate);
        ctx.row({"log_" + p, std::to_string(n), r.log_estimate, r.log_half_width, mc.replicas});
      }
    } else {
      throw ConfigError("config key 'method': expected direct or multicanonical, got '" + c.method + "'");
    }
  }
}

void cmd_hit_stats(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  if (g.num_boundary() != 0) throw ConfigError("config key 'geometry': hit-stats runs on graphs without boundary");
  const auto betas = resolve_betas(ctx);
  HittingConfig h;
  h.init = parse_init(c.init, "init");
  h.mode = parse_mode(c.mode);
  h.t_cap = c.t_cap_continuous_time;
  h.replicas = count_of(c.replicas, "replicas");
  h.workers = static_cast<std::size_t>(c.workers);
  if (!(h.t_cap > 0)) throw ConfigError("config key 't_cap_continuous_time': must be positive");
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    h.seed = ctx.seed("hit/" + std::to_string(bi));
    const auto r = hitting_stats(g, betas[bi], h);
    for (int j = 0; j <= 20; ++j) {
      const double t = h.t_cap * j / 20.0;
      ctx.row({tagged("survival", betas, betas[bi]), num(t), r.curve.at(t), r.curve.half_width_at(t), h.replicas});
    }
    ctx.row({tagged("censored_fraction", betas, betas[bi]), "",
             1.0 - static_cast<double>(r.curve.events) / static_cast<double>(h.replicas), 0.0, h.replicas});
  }
}

void tail_rows(RunContext& ctx, const std::string& param, const TailCurve& t) {
  for (std::size_t l = 0; l < t.at_least.size(); ++l) {
    const auto e = proportion(t.at_least[l], t.n);
    ctx.row({param, std::to_string(l), e.estimate, e.half_width, t.n});
  }
}

void cmd_polymer_tail(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  const auto betas = resolve_betas(ctx);
  PolymerTailConfig pc;
  pc.samples = count_of(c.samples, "samples");
  pc.burn_in = nonneg(c.burn_in_sweeps, "burn_in_sweeps");
  pc.radius = c.radii.empty() ? 2 : int_list(c.radii, "radii").front();
  if (c.vertex < 0 || static_cast<std::size_t>(c.vertex) >= g.num_free())
    throw ConfigError("config key 'vertex': out of range");
  pc.roots = {static_cast<std::uint32_t>(c.vertex)};
  const auto min_count = static_cast<std::uint64_t>(count_of(c.min_count, "min_count"));
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    pc.seed = ctx.seed("polymer/" + std::to_string(bi));
    const auto r = polymer_tail(g, betas[bi], pc);
    tail_rows(ctx, tagged("boundary_tail", betas, betas[bi]), r.reference_boundary);
    tail_rows(ctx, tagged("size_tail", betas, betas[bi]), r.reference_size);
    tail_rows(ctx, tagged("tilde_boundary_tail", betas, betas[bi]), r.tilde_boundary);
    const bool dec = r.reference_boundary.strictly_decreasing(min_count);
    const auto [lo, hi] = r.reference_boundary.observed_range(min_count);
    ctx.row({tagged("boundary_tail_strictly_decreasing", betas, betas[bi]), std::to_string(lo) + "-" + std::to_string(hi),
             dec ? 1.0 : 0.0, 0.0, r.reference_boundary.n});
    ctx.row({tagged("order_violations", betas, betas[bi]), "", static_cast<double>(r.order_violations), 0.0, pc.samples});
    if (r.order_violations) ctx.fail("sigma-tilde above a parent");
  }
}

void cmd_reveal_couple(RunContext& ctx) {
  const auto& c = ctx.config();
  const Graph g = build_graph(c);
  if (g.kind() != GraphKind::box) throw ConfigError("config key 'geometry': reveal-couple needs a box");
  const auto ks = int_list(c.ks, "ks");
  if (ks.size() != 1) throw ConfigError("config key 'ks': reveal-couple takes a single k");
  BlockGrid grid = [&] {
    try {
      return BlockGrid(g, ks[0]);
    } catch (const CoarseGrainError& e) {
      throw ConfigError(std::string("config key 'ks': ") + e.what());
    }
  }();
  const auto betas = resolve_betas(ctx);
  PairSampler sampler;
  try {
    sampler.backend = parse_backend(c.backend);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config key 'backend': ") + e.what());
  }
  const BoundaryPartition xi = parse_partition(g, c.boundary, "boundary");
  const BoundaryPartition xi_prime = parse_partition(g, c.boundary_prime, "boundary_prime");
  const std::size_t runs = count_of(c.replicas, "replicas");
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const RCParams params{rc_p(c, betas[bi]), ModelParams::q};
    const std::uint64_t master = ctx.seed("reveal/" + std::to_string(bi));
    std::vector<RevealResult> res(runs);
    parallel_for(runs, static_cast<std::size_t>(c.workers), [&](std::size_t r) {
      res[r] = reveal_coupling(grid, params, xi, xi_prime, seed_derive(master, "run/" + std::to_string(r)), sampler);
    });
    std::uint64_t ok = 0, interior = 0, parts = 0, matches = 0, approx = 0;
    for (const auto& r : res) {
      matches += r.surface_matches;
      approx += r.approximate;
      if (!r.success) continue;
      ++ok;
      interior += r.interior_agree;
      parts += r.partitions_agree;
    }
    const std::string v = num(params.p);
    add_row(ctx, tagged("success_rate", betas, betas[bi]), v, proportion(ok, runs));
    ctx.row({tagged("interior_agree", betas, betas[bi]), v, static_cast<double>(interior), 0.0, ok});
    ctx.row({tagged("partitions_agree", betas, betas[bi]), v, static_cast<double>(parts), 0.0, ok});
    ctx.row({tagged("surface_matches", betas, betas[bi]), v, static_cast<double>(matches), 0.0, runs});
    ctx.row({tagged("approximate_runs", betas, betas[bi]), v, static_cast<double>(approx), 0.0, runs});
    if (interior != ok || parts != ok) ctx.fail("a successful run disagreed inside the surface");
  }
}

void cmd_oracle_check(RunContext& ctx) {
  const auto& c = ctx.config();
  std::vector<std::string> suites;
  if (c.suite == "all") suites = {"detailed-balance", "es-identity", "sw-stationarity"};
  else suites = {c.suite};
  std::vector<OracleReport> all;
  for (const auto& s : suites) {
    std::vector<OracleReport> reps;
    try {
      reps = run_oracle_suite(s, c.beta);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'suite': ") + e.what());
    }
    for (const auto& r : reps) {
      ctx.row({r.check, r.instance, r.max_violation, r.tolerance, r.pass ? 1u : 0u});
      if (!r.pass) ctx.fail(r.check + " on " + r.instance);
      all.push_back(r);
    }
  }
  std::ofstream out(ctx.side_file(".oracle.json"));
  out << to_json(all) << "\n";
}

void cmd_rrg_gen(RunContext& ctx) {
  auto c = ctx.config();
  if (c.geometry != "rrg") throw ConfigError("config key 'geometry': rrg-gen needs geometry = \"rrg\"");
  const Graph g = build_graph(c);
  {
    std::ofstream out(ctx.side_file(".edges"));
    write_edge_list(out, g);
  }
  const auto radii = int_list(c.radii, "radii");
  for (int r : radii) {
    std::vector<double> defects;
    int worst = 0;
    for (std::uint32_t v = 0; v < g.num_free(); ++v) {
      const int d = tree_like_defect(g, v, r);
      defects.push_back(d);
      worst = std::max(worst, d);
    }
    add_row(ctx, "mean_tree_like_defect", std::to_string(r), mean_of(defects));
    ctx.row({"max_tree_like_defect", std::to_string(r), static_cast<double>(worst), 0.0, g.num_free()});
  }
  if (g.num_free() <= 24) {
    const auto h = edge_expansion_exact(g);
    ctx.row({"edge_expansion", std::to_string(h.num) + "/" + std::to_string(h.den), h.value(), 0.0, 1});
  }
}

}  // namespace

const std::vector<Command>& command_registry() {
  static const std::vector<Command> reg{
      {"simulate", "Glauber runs; mean magnetization at probe times", true, cmd_simulate},
      {"couple", "grand coupling of all-plus and all-minus chains", true, cmd_couple},
      {"rc", "random-cluster samples; edge density and cluster sizes", true, cmd_rc},
      {"coarse", "k-good fields, bad-block density and cluster checks", true, cmd_coarse},
      {"wsm-scan", "TV decay between ball and plus-phase marginals", true, cmd_wsm_scan},
      {"mix-compare", "time to band of E|M|/N per initialization", true, cmd_mix_compare},
      {"ldp-probe", "pi(|M|/N <= eps) across sizes", true, cmd_ldp_probe},
      {"hit-stats", "survival of the restricted hitting time", true, cmd_hit_stats},
      {"polymer-tail", "minus-cluster tails on random regular graphs", true, cmd_polymer_tail},
      {"reveal-couple", "revealing coupling runs on a box", true, cmd_reveal_couple},
      {"oracle-check", "exact checks on tiny instances", false, cmd_oracle_check},
      {"rrg-gen", "random regular graph and its local statistics", false, cmd_rrg_gen},
  };
  return reg;
}

const Command* find_command(const std::string& name) {
  for (const auto& c : command_registry())
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace phasemix
