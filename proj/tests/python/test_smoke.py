import math

import pytest

import phasemix as pm


def test_graph_shapes():
    g = pm.Graph.torus(2, 4)
    assert (g.num_free, g.num_edges, g.num_boundary) == (16, 32, 0)
    assert sorted(g.neighbors(0)) == [1, 3, 4, 12]
    box = pm.Graph.box(2, 1)
    assert box.num_free == 9
    assert box.num_boundary == 16
    with pytest.raises(pm.GeometryError):
        pm.Graph.torus(2, 2)


def test_k4_expansion_and_defect():
    k4 = pm.Graph.general(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    num, den = pm.edge_expansion(k4)
    assert num == 2 * den
    tree = pm.Graph.general(4, [(0, 1), (1, 2), (1, 3)])
    assert pm.tree_like_defect(tree, 1, 2) == 0
    assert pm.tree_like_defect(k4, 0, 1) == 3


def test_random_regular_is_regular():
    g = pm.Graph.random_regular(32, 3, 7)
    assert all(len(g.neighbors(v)) == 3 for v in range(32))
    assert g.num_edges == 48


def test_gibbs_triangle():
    tri = pm.Graph.general(3, [(0, 1), (1, 2), (0, 2)])
    beta = 0.7
    law = pm.enumerate_gibbs(tri, beta)["pi"]
    # aligned states have cut 0, the other six have cut 2
    z = 2 + 6 * math.exp(-2 * beta)
    assert law[7] == pytest.approx(1 / z, rel=1e-12)
    assert law[1] == pytest.approx(math.exp(-2 * beta) / z, rel=1e-12)
    assert sum(law) == pytest.approx(1.0, abs=1e-12)


def test_glauber_reproducible():
    g = pm.Graph.torus(2, 4)
    a = pm.glauber(g, 0.5, 5.0, 11, probe_interval=1.0)
    b = pm.glauber(g, 0.5, 5.0, 11, probe_interval=1.0)
    assert a == b
    assert a["probe_times"] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert sum(a["spins"]) == a["magnetization"]


def test_restricted_chain_stays_in_phase():
    g = pm.Graph.torus(2, 4)
    run = pm.glauber(g, 0.2, 50.0, 3, init="all-plus", mode="restricted-plus", probe_interval=0.5)
    assert min(run["probe_magnetization"]) >= 0


def test_hitting_time_beta_zero():
    g = pm.Graph.torus(2, 4)
    tau = pm.hitting_time(g, 0.0, 1e4, 5)
    assert tau is not None and tau > 0


def test_swendsen_wang_and_coarse_field():
    g = pm.Graph.torus(2, 12)
    beta = -math.log(0.1)
    state = pm.swendsen_wang(g, beta, 10, 1)
    assert len(state["spins"]) == 144
    assert len(state["bonds"]) == g.num_edges
    field = pm.coarse_field(g, state["bonds"], 3)
    assert field["side"] == 4
    assert field["violations"] == 0


def test_reveal_coupling_summary():
    r = pm.reveal_coupling(4, 1, 0.95, seed=2)
    assert not r["approximate"]
    if r["success"]:
        assert r["interior_agree"] and r["partitions_agree"]


def test_estimators():
    tv = pm.tv_plugin([50, 50], [0.5, 0.5])
    assert tv["estimate"] == 0.0
    assert tv["n_samples"] == 100
    assert pm.clopper_pearson_upper(0, 100) == pytest.approx(1 - 0.025 ** (1 / 100), rel=1e-9)
    assert pm.beta0_survival_exact(4, 0.0) == 1.0
    assert pm.g_of_t([float(m) for m in range(1, 11)], 10, 1.0, 12.0) == 3


def test_oracle_suite_passes():
    reports = pm.oracle_suite("detailed-balance", [0.4])
    assert reports
    assert all(r["pass"] for r in reports)


def test_run_experiment(tmp_path):
    cfg = {"n": 4, "replicas": 3, "horizon_continuous_time": 2.0, "seed": 9, "output_dir": str(tmp_path),
           "experiment": "py", "beta": [0.4]}
    out = pm.run_experiment("simulate", cfg)
    assert out["status"] == 0
    assert out["rows"]
    with open(out["csv_path"]) as f:
        assert f.readline().strip() == "param,value,estimate,half_width,n_samples"
    with pytest.raises(pm.ConfigError):
        pm.run_experiment("simulate", {"nonsense_key": 1, "seed": 1})
    assert "oracle-check" in pm.commands()
