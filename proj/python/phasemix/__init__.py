from ._phasemix import (
    ConfigError,
    CoarseGrainError,
    EstimatorError,
    GeometryError,
    Graph,
    OracleCapError,
    beta0_survival_exact,
    binder_crossing,
    clopper_pearson_upper,
    coarse_field,
    commands,
    edge_expansion,
    enumerate_gibbs,
    g_of_t,
    glauber,
    hitting_time,
    magnetization_ldp,
    oracle_suite,
    reveal_coupling,
    run_experiment,
    swendsen_wang,
    tree_like_defect,
    tv_plugin,
    wsm_scan,
)

__version__ = "0.1.0"
