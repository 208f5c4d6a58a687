#include "phasemix/ising.hpp"

#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace phasemix {

SpinConfig::SpinConfig(std::size_t n, std::int8_t value)
    : spins_(n, value), magnetization_(static_cast<long long>(n) * value) {}

SpinConfig::SpinConfig(std::vector<std::int8_t> spins) : spins_(std::move(spins)) {
  for (auto s : spins_)
    if (s != 1 && s != -1) throw std::invalid_argument("spin values must be +1 or -1");
  magnetization_ = recompute_magnetization();
}

long long SpinConfig::recompute_magnetization() const {
  return std::accumulate(spins_.begin(), spins_.end(), 0LL);
}

bool dominates(const SpinConfig& a, const SpinConfig& b) {
  for (std::size_t v = 0; v < a.size(); ++v)
    if (a[v] < b[v]) return false;
  return true;
}

SpinConfig pointwise_min(const SpinConfig& a, const SpinConfig& b) {
  std::vector<std::int8_t> out(a.size());
  for (std::size_t v = 0; v < a.size(); ++v) out[v] = std::min(a[v], b[v]);
  return SpinConfig(std::move(out));
}

void SpinBoundary::validate(const Graph& g) const {
  if (values_.size() != g.num_boundary())
    throw std::invalid_argument("spin boundary covers " + std::to_string(values_.size()) +
                                " vertices but the graph boundary has " + std::to_string(g.num_boundary()));
  for (auto s : values_)
    if (s != 1 && s != -1) throw std::invalid_argument("boundary spins must be +1 or -1");
}

SpinBoundary SpinBoundary::flipped() const {
  std::vector<std::int8_t> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<std::int8_t>(-values_[i]);
  return SpinBoundary(std::move(out));
}

PhaseMembership classify_magnetization(long long m) { return {m >= 0, m <= 0, m >= 0 && m <= 1}; }

PhaseMembership classify_phase(const SpinConfig& sigma) { return classify_magnetization(sigma.magnetization()); }

bool in_phase(long long m, PhaseTag tag) {
  const auto ph = classify_magnetization(m);
  switch (tag) {
    case PhaseTag::plus: return ph.plus;
    case PhaseTag::minus: return ph.minus;
    case PhaseTag::plus_boundary: return ph.plus_boundary;
  }
  return false;
}

long long cut_size(const Graph& g, const SpinConfig& sigma, const SpinBoundary& bc) {
  long long cut = 0;
  for (const auto& e : g.edges())
    if (spin_at(g, sigma, bc, e.u) != spin_at(g, sigma, bc, e.v)) ++cut;
  return cut;
}

double gibbs_log_weight(const Graph& g, const SpinConfig& sigma, const ModelParams& params,
                        const SpinBoundary& bc) {
  return -params.beta * static_cast<double>(cut_size(g, sigma, bc));
}

int local_field(const Graph& g, std::uint32_t v, const SpinConfig& sigma, const SpinBoundary& bc) {
  int h = 0;
  for (auto w : g.neighbors(v)) h += spin_at(g, sigma, bc, w);
  return h;
}

double heat_bath_prob_plus(const Graph& g, std::uint32_t v, const SpinConfig& sigma,
                           const ModelParams& params, const SpinBoundary& bc) {
  const int h = local_field(g, v, sigma, bc);
  return 1.0 / (1.0 + std::exp(-params.beta * h));
}

double heat_bath_prob_minus(const Graph& g, std::uint32_t v, const SpinConfig& sigma,
                            const ModelParams& params, const SpinBoundary& bc) {
  const int h = local_field(g, v, sigma, bc);
  return 1.0 / (1.0 + std::exp(params.beta * h));
}

int flip_cut_delta(const Graph& g, std::uint32_t v, const SpinConfig& sigma, const SpinBoundary& bc) {
  // Disagreeing neighbors become agreeing and vice versa.
  return sigma[v] * local_field(g, v, sigma, bc);
}

void write_spins(std::ostream& out, const SpinConfig& sigma) {
  out << sigma.size() << ' ' << sigma.magnetization() << '\n';
  for (auto s : sigma.spins()) out.put(s > 0 ? '+' : '-');
  out.put('\n');
}

SpinConfig read_spins(std::istream& in) {
  std::size_t n = 0;
  long long m = 0;
  if (!(in >> n >> m)) throw std::invalid_argument("spin config: malformed header");
  in >> std::ws;
  std::vector<std::int8_t> spins(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = in.get();
    if (c == '+')
      spins[i] = 1;
    else if (c == '-')
      spins[i] = -1;
    else
      throw std::invalid_argument("spin config: expected '+' or '-' at position " + std::to_string(i));
  }
  SpinConfig sigma(std::move(spins));
  if (sigma.magnetization() != m) throw std::invalid_argument("spin config: header magnetization mismatch");
  return sigma;
}

}  // namespace phasemix
