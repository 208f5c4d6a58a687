#include "phasemix/glauber.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace phasemix {

EventStream::EventStream(std::uint64_t seed, std::size_t num_sites)
    : seed_(seed), num_sites_(num_sites), rng_(seed) {
  if (num_sites == 0) throw std::invalid_argument("event stream needs at least one site");
  draw();
}

void EventStream::draw() {
  const double dt = rng_.exponential(static_cast<double>(num_sites_));
  const auto site = static_cast<std::uint32_t>(rng_.uniform_index(num_sites_));
  const double u = rng_.uniform();
  next_ = Event{clock_ + dt, dt, site, u};
}

Event EventStream::next() {
  Event ev = next_;
  clock_ = ev.time;
  draw();
  return ev;
}

GlauberDynamics::GlauberDynamics(const Graph& g, ModelParams params, SpinBoundary bc)
    : graph_(&g), params_(params), bc_(std::move(bc)) {
  if (bc_.empty() && g.num_boundary() > 0) throw std::invalid_argument("graph has a boundary but no spins were given");
  if (!bc_.empty()) bc_.validate(g);
  const std::size_t n = g.num_free();
  offsets_.assign(n + 1, 0);
  boundary_field_.assign(n, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    for (auto w : g.neighbors(v)) {
      if (g.is_boundary(w))
        boundary_field_[v] += bc_.at(g, w);
      else
        free_adj_.push_back(w);
    }
    offsets_[v + 1] = free_adj_.size();
  }
  table_offset_ = static_cast<int>(g.max_degree());
  table_.resize(2 * g.max_degree() + 1);
  for (int h = -table_offset_; h <= table_offset_; ++h)
    table_[static_cast<std::size_t>(h + table_offset_)] = 1.0 / (1.0 + std::exp(-params_.beta * h));
}

bool GlauberDynamics::apply(ChainState& state, const Event& ev) const {
  const std::uint32_t v = ev.site;
  std::int8_t s = plain_outcome(v, ev.uniform, state.sigma);
  bool fired = false;
  if (state.mode != ChainMode::plain) {
    const long long proposed = state.sigma.magnetization() - state.sigma[v] + s;
    if (state.mode == ChainMode::restricted_plus && proposed < 0) {
      s = 1;
      fired = true;
    } else if (state.mode == ChainMode::restricted_minus && proposed > 0) {
      s = -1;
      fired = true;
    }
  }
  state.sigma.set(v, s);
  state.time = ev.time;
  ++state.events;
  return fired;
}

namespace {

ProbeRecord take_probe(const GlauberDynamics& dyn, const ChainState& state, double t, const ProbeSchedule& sched) {
  ProbeRecord rec{t, state.sigma.magnetization(), -1, {}};
  if (sched.energy) rec.cut = cut_size(dyn.graph(), state.sigma, dyn.boundary());
  rec.site_spins.reserve(sched.sites.size());
  for (auto v : sched.sites) rec.site_spins.push_back(state.sigma[v]);
  return rec;
}

}  // namespace

RunSummary run(const GlauberDynamics& dyn, ChainState& state, EventStream& stream, double t_max,
               const ProbeSchedule* probes) {
  RunSummary out;
  if (probes && !(probes->interval > 0)) throw std::invalid_argument("probe interval must be positive");
  std::uint64_t next_probe = 0;
  auto probe_time = [&](std::uint64_t j) { return probes->start + static_cast<double>(j) * probes->interval; };
  while (probes && probe_time(next_probe) < state.time) ++next_probe;
  while (true) {
    const double t_ev = stream.peek().time;
    if (probes) {
      // A probe at time s sees every event with time <= s.
      while (probe_time(next_probe) <= t_max && probe_time(next_probe) < t_ev) {
        out.probes.push_back(take_probe(dyn, state, probe_time(next_probe), *probes));
        ++next_probe;
      }
    }
    if (t_ev > t_max) break;
    if (dyn.apply(state, stream.next())) ++out.restricted_fires;
    ++out.events;
  }
  state.time = std::max(state.time, t_max);
  return out;
}

void write_probe_csv(std::ostream& out, std::uint64_t seed, const RunSummary& summary,
                     const ProbeSchedule& schedule, bool header) {
  if (header) out << "seed,t,observable,value\n";
  for (const auto& p : summary.probes) {
    out << seed << ',' << p.time << ",magnetization," << p.magnetization << '\n';
    if (p.cut >= 0) out << seed << ',' << p.time << ",cut," << p.cut << '\n';
    for (std::size_t i = 0; i < p.site_spins.size(); ++i)
      out << seed << ',' << p.time << ",spin_" << schedule.sites[i] << ',' << int(p.site_spins[i]) << '\n';
  }
}

CouplingResult grand_coupling_run(const GlauberDynamics& dyn, CouplingBundle& bundle, double t_max) {
  auto& chains = bundle.chains;
  CouplingResult res;
  res.chains.resize(chains.size());
  for (const auto& c : chains)
    if (c.sigma.size() != dyn.num_sites()) throw std::invalid_argument("coupled chains must share one graph");

  std::vector<std::pair<std::size_t, std::size_t>> ordered;  // (upper, lower)
  for (std::size_t i = 0; i < chains.size(); ++i)
    for (std::size_t j = 0; j < chains.size(); ++j)
      if (i != j && chains[i].mode == ChainMode::plain && chains[j].mode == ChainMode::plain &&
          dominates(chains[i].sigma, chains[j].sigma) && !(i > j && chains[i].sigma == chains[j].sigma))
        ordered.emplace_back(i, j);

  while (bundle.stream.peek().time <= t_max) {
    const Event ev = bundle.stream.next();
    for (std::size_t i = 0; i < chains.size(); ++i) {
      if (dyn.apply(chains[i], ev)) {
        auto& s = res.chains[i];
        if (!s.first_fire) s.first_fire = ev.time;
        ++s.restricted_fires;
      }
    }
    for (auto [i, j] : ordered)
      if (chains[i].sigma[ev.site] < chains[j].sigma[ev.site]) ++res.order_violations;
    ++res.events;
  }
  for (std::size_t i = 0; i < chains.size(); ++i) {
    chains[i].time = std::max(chains[i].time, t_max);
    res.chains[i].events = chains[i].events;
    res.chains[i].final_magnetization = chains[i].sigma.magnetization();
  }
  return res;
}

std::optional<double> hitting_time(const GlauberDynamics& dyn, ChainState& state, EventStream& stream,
                                   PhaseTag target, double t_cap) {
  if (in_phase(state.sigma.magnetization(), target)) return state.time;
  while (stream.peek().time <= t_cap) {
    dyn.apply(state, stream.next());
    if (in_phase(state.sigma.magnetization(), target)) return state.time;
  }
  state.time = std::max(state.time, t_cap);
  return std::nullopt;
}

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::all_plus: return "all-plus";
    case InitKind::all_minus: return "all-minus";
    case InitKind::nu_pm: return "nu-pm";
    case InitKind::explicit_config: return "explicit";
    case InitKind::strip: return "strip";
    case InitKind::checkerboard: return "checkerboard";
  }
  return "?";
}

InitDistribution InitDistribution::parse(const std::string& name) {
  InitDistribution d;
  if (name == "all-plus")
    d.kind = InitKind::all_plus;
  else if (name == "all-minus")
    d.kind = InitKind::all_minus;
  else if (name == "nu-pm")
    d.kind = InitKind::nu_pm;
  else if (name == "strip")
    d.kind = InitKind::strip;
  else if (name == "checkerboard")
    d.kind = InitKind::checkerboard;
  else
    throw std::invalid_argument("unknown init '" + name + "'");
  return d;
}

SpinConfig draw_initial(const Graph& g, const InitDistribution& init, Rng& rng) {
  const std::size_t n = g.num_free();
  switch (init.kind) {
    case InitKind::all_plus: return SpinConfig(n, 1);
    case InitKind::all_minus: return SpinConfig(n, -1);
    case InitKind::nu_pm: return SpinConfig(n, static_cast<std::int8_t>(rng.fair_sign()));
    case InitKind::explicit_config:
      if (init.config.size() != n) throw std::invalid_argument("explicit initial config has the wrong size");
      return init.config;
    case InitKind::strip:
    case InitKind::checkerboard: break;
  }
  if (!g.has_coords()) throw std::invalid_argument(to_string(init.kind) + " init needs a lattice");
  std::vector<std::int8_t> s(n, 1);
  const int extent = g.free_hi() - g.free_lo() + 1;
  const int width = static_cast<int>(std::lround(init.strip_width * extent));
  for (std::uint32_t v = 0; v < n; ++v) {
    auto c = g.coords(v);
    if (init.kind == InitKind::strip) {
      if (c[0] - g.free_lo() < width) s[v] = -1;
    } else {
      int sum = 0;
      for (int x : c) sum += x;
      if (sum % 2 != 0) s[v] = -1;
    }
  }
  return SpinConfig(std::move(s));
}

}  // namespace phasemix
