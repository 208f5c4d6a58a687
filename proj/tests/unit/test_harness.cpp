#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "phasemix/glauber.hpp"
#include "phasemix/harness.hpp"

using namespace phasemix;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("phasemix_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("flat config parsing") {
  std::istringstream in(R"(# comment
experiment = "wsm"   # trailing
n = 32
beta = [0.5, 1e-1, 2]
eps = 0.2
flag = true
label = "a # not a comment"
)");
  auto f = FlatConfig::parse(in);
  CHECK(std::get<std::string>(f.values().at("experiment")) == "wsm");
  CHECK(std::get<std::int64_t>(f.values().at("n")) == 32);
  CHECK(std::get<std::vector<double>>(f.values().at("beta")) == std::vector<double>{0.5, 0.1, 2});
  CHECK(std::get<double>(f.values().at("eps")) == 0.2);
  CHECK(std::get<bool>(f.values().at("flag")));
  CHECK(std::get<std::string>(f.values().at("label")) == "a # not a comment");
}

TEST_CASE("flat config errors name the key") {
  auto msg = [](const std::string& text) -> std::string {
    std::istringstream in(text);
    try {
      ExperimentConfig::from_flat(FlatConfig::parse(in));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(msg("nn = 3").find("'nn'") != std::string::npos);
  CHECK(msg("n = \"x\"").find("'n'") != std::string::npos);
  CHECK(msg("n = 1.5").find("'n'") != std::string::npos);
  CHECK(msg("eps = what").find("'eps'") != std::string::npos);
  CHECK(msg("[table]").find("tables") != std::string::npos);
  CHECK(msg("n = 1\nn = 2").find("duplicate") != std::string::npos);
  CHECK(msg("seed = -1").find("'seed'") != std::string::npos);
  CHECK_THROWS_AS(FlatConfig::load("/nonexistent/missing.toml"), ConfigError);
}

TEST_CASE("overrides accept bare words") {
  FlatConfig f;
  f.apply_override("init=strip");
  f.apply_override("radii=[1,2]");
  f.apply_override("n = 8");
  auto c = ExperimentConfig::from_flat(f);
  CHECK(c.init == "strip");
  CHECK(c.radii == std::vector<double>{1, 2});
  CHECK(c.n == 8);
  CHECK_THROWS_AS(f.apply_override("novalue"), ConfigError);
}

TEST_CASE("config round trips") {
  ExperimentConfig c;
  c.experiment = "x";
  c.beta = {0.1, 1.0 / 3.0, 2};
  c.eps = 0.2;
  c.seed = 123456789;
  c.init = "a \"quoted\" name";
  c.target_half_width = 1e-7;
  c.horizon_continuous_time = 12;

  std::stringstream ss;
  c.to_flat().write(ss);
  auto back = ExperimentConfig::from_flat(FlatConfig::parse(ss));
  CHECK(back == c);
  CHECK(ExperimentConfig::from_json(c.to_json()) == c);

  ExperimentConfig d;
  CHECK(ExperimentConfig::from_json(d.to_json()) == d);
  CHECK(!ExperimentConfig::from_json(d.to_json()).seed.has_value());
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.config.seed = 5;
  m.command = "simulate";
  m.version = "1";
  m.status = "complete";
  m.started = "a";
  m.finished = "b";
  m.seeds = {{"x", 7}, {"y", 18446744073709551615ULL}};
  m.outputs = {"x.csv"};
  auto back = RunManifest::from_json(m.to_json());
  CHECK(back.config == m.config);
  CHECK(back.seeds == m.seeds);
  CHECK(back.outputs == m.outputs);
  CHECK(back.status == "complete");
}

TEST_CASE("csv formatting") {
  std::ostringstream out;
  write_csv(out, {{"a", "x,y", 0.1, 1.0 / 0.0, 3}});
  CHECK(out.str() == "param,value,estimate,half_width,n_samples\na,\"x,y\",0.10000000000000001,inf,3\n");
}

TEST_CASE("registry lists every command") {
  for (const char* name : {"simulate", "couple", "rc", "coarse", "wsm-scan", "mix-compare", "ldp-probe", "hit-stats",
                           "polymer-tail", "reveal-couple", "oracle-check", "rrg-gen"})
    CHECK(find_command(name) != nullptr);
  CHECK(find_command("nope") == nullptr);
  CHECK(!find_command("oracle-check")->stochastic);
  CHECK(find_command("simulate")->stochastic);
}

TEST_CASE("run_experiment is deterministic and writes a manifest") {
  const auto dir = scratch("determinism");
  ExperimentConfig c;
  c.n = 4;
  c.replicas = 30;
  c.horizon_continuous_time = 4;
  c.output_dir = dir.string();
  c.seed = 77;
  c.experiment = "one";
  auto a = run_experiment("simulate", c);
  c.experiment = "two";
  c.workers = 3;
  auto b = run_experiment("simulate", c);
  CHECK(a.status == 0);
  CHECK(slurp(a.csv_path) == slurp(b.csv_path));
  auto m = RunManifest::from_json(slurp(a.manifest_path));
  CHECK(m.status == "complete");
  CHECK(m.config.experiment == "one");
  CHECK(m.seeds.count("simulate/0") == 1);

  // rerun from the manifest alone
  ExperimentConfig again = m.config;
  again.experiment = "three";
  auto r = run_experiment(m.command, again);
  CHECK(slurp(r.csv_path) == slurp(a.csv_path));

  // a single replica can be replayed from its child seed
  const auto seeds = ReplicaSeeds::from(seed_derive(m.seeds.at("simulate/0"), "replica/0"));
  const Graph g = Graph::torus(2, 4);
  Rng rng(seeds.init);
  ChainState st{draw_initial(g, InitDistribution::parse("nu-pm"), rng), 0.0, ChainMode::plain, 0};
  EventStream stream(seeds.updates, g.num_free());
  GlauberDynamics dyn(g, {0.5}, {});
  ProbeSchedule sched{0.0, 1.0, false, {}};
  auto sum = run(dyn, st, stream, 4.0, &sched);
  CHECK(sum.probes.size() == 5);
}

TEST_CASE("run_experiment errors") {
  ExperimentConfig c;
  c.output_dir = scratch("errors").string();
  CHECK_THROWS_AS(run_experiment("simulate", c), ConfigError);  // no seed
  CHECK_THROWS_AS(run_experiment("nope", c), ConfigError);
  c.seed = 1;
  c.geometry = "sphere";
  CHECK_THROWS_WITH_AS(run_experiment("simulate", c), doctest::Contains("'geometry'"), ConfigError);
  c.geometry = "torus";
  c.experiment = "../escape";
  CHECK_THROWS_AS(run_experiment("simulate", c), ConfigError);
}

TEST_CASE("output directory falls back to the environment") {
  ExperimentConfig c;
  ::setenv("PHASEMIX_OUTPUT_DIR", "/tmp/somewhere", 1);
  CHECK(resolve_output_dir(c) == "/tmp/somewhere");
  c.output_dir = "mine";
  CHECK(resolve_output_dir(c) == "mine");
  ::unsetenv("PHASEMIX_OUTPUT_DIR");
  c.output_dir.clear();
  CHECK(resolve_output_dir(c) == ".");
}

TEST_CASE("every stochastic command runs on a small instance") {
  const auto dir = scratch("commands");
  auto base = [&] {
    ExperimentConfig c;
    c.output_dir = dir.string();
    c.seed = 3;
    c.samples = 50;
    c.burn_in_sweeps = 5;
    c.replicas = 4;
    return c;
  };
  {
    auto c = base();
    c.experiment = "couple";
    c.n = 4;
    c.beta = {0.0, 1.5};
    c.horizon_continuous_time = 10;
    auto out = run_experiment("couple", c);
    CHECK(out.status == 0);
    REQUIRE(out.rows.size() == 4);
    CHECK(out.rows[0].param == "order_violations[beta=0]");
    CHECK(out.rows[0].estimate == 0.0);
  }
  {
    auto c = base();
    c.experiment = "small_tv";
    c.n = 3;
    c.replicas = 4000;
    c.horizon_continuous_time = 20;
    c.probe_interval_continuous_time = 20;
    auto out = run_experiment("simulate", c);
    const auto it = std::find_if(out.rows.begin(), out.rows.end(),
                                 [](const CsvRow& r) { return r.param == "state_tv_vs_gibbs"; });
    REQUIRE(it != out.rows.end());
    // plug-in bias over 512 states with 4000 samples stays well below 0.25
    CHECK(it->estimate < 0.25);
    CHECK(it->n_samples == 4000);
  }
  {
    auto c = base();
    c.experiment = "rc";
    c.n = 6;
    CHECK(run_experiment("rc", c).status == 0);
    c.experiment = "rc_box";
    c.geometry = "box";
    c.m = 2;
    c.boundary = "free";
    CHECK(run_experiment("rc", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "coarse";
    c.n = 12;
    c.ks = {2, 3};
    c.p = 0.9;
    auto out = run_experiment("coarse", c);
    CHECK(out.status == 0);
    c.experiment = "coarse_box";
    c.geometry = "box";
    c.m = 4;
    c.ks = {1};
    CHECK(run_experiment("coarse", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "wsm";
    c.n = 8;
    c.radii = {1, 2};
    CHECK(run_experiment("wsm-scan", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "mix";
    c.n = 4;
    c.horizon_continuous_time = 20;
    CHECK(run_experiment("mix-compare", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "ldp";
    c.sizes = {4, 6};
    CHECK(run_experiment("ldp-probe", c).status == 0);
    c.experiment = "ldp_mc";
    c.method = "multicanonical";
    c.sizes = {4};
    c.replicas = 2;
    c.samples = 200;
    CHECK(run_experiment("ldp-probe", c).status == 0);
    c.method = "magic";
    c.experiment = "ldp_bad";
    CHECK_THROWS_WITH_AS(run_experiment("ldp-probe", c), doctest::Contains("'method'"), ConfigError);
  }
  {
    auto c = base();
    c.experiment = "hit";
    c.n = 4;
    c.mode = "restricted-plus";
    c.init = "all-plus";
    c.t_cap_continuous_time = 50;
    CHECK(run_experiment("hit-stats", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "poly";
    c.geometry = "rrg";
    c.num_vertices = 32;
    c.radii = {1};
    c.beta = {1.0};
    CHECK(run_experiment("polymer-tail", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "reveal";
    c.geometry = "box";
    c.m = 4;
    c.ks = {1};
    c.boundary = "wired";
    c.boundary_prime = "free";
    c.replicas = 2;
    CHECK(run_experiment("reveal-couple", c).status == 0);
  }
  {
    auto c = base();
    c.experiment = "rrg";
    c.geometry = "rrg";
    c.num_vertices = 16;
    c.radii = {1, 2};
    CHECK(run_experiment("rrg-gen", c).status == 0);
    CHECK(std::filesystem::exists(dir / "rrg.edges"));
  }
  {
    auto c = base();
    c.experiment = "binder";
    c.beta_factor = 1.0;
    c.binder_small = 4;
    c.binder_large = 6;
    c.binder_sweeps = 2000;
    c.binder_tol = 0.1;
    c.binder_lo = 0.2;
    c.binder_hi = 1.6;
    c.sizes = {4};
    auto out = run_experiment("ldp-probe", c);
    REQUIRE(out.rows.size() >= 2);
    CHECK(out.rows[0].param == "beta_c_binder");
    CHECK(out.rows[0].estimate > 0.2);
    CHECK(out.rows[0].estimate < 1.6);
  }
}
