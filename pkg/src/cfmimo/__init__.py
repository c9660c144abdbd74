"""Uplink cell-free massive MIMO simulator with adaptive local zero forcing."""

from ._kernels import BACKEND, HAS_NUMBA
from .chanstats import ChannelStats, compute_stats
from .combining import CombinerSet, SingularGram, build_combiners, build_lzf, \
    build_mr, build_pmr, build_projection
from .costs import CostReport, combining_costs, decoding_costs, uplink_symbols
from .experiments import ExperimentSpec, load_experiment, run_experiment, validate
from .grouping import GroupingMatrix, MaxIterations, PgaConfig, PgaTrace, SCHEMES, \
    all_fzf_grouping, all_mr_grouping, grouping_for_scheme, local_sinr, \
    optimize_grouping, pga_gradient, pga_objective, pga_optimize, \
    threshold_grouping
from .montecarlo import EmpiricalTerms, McConfig, MomentCheck, MOMENT_CHECKS, \
    RejectionBudgetExceeded, empirical_moment, empirical_terms, \
    empirical_terms_multi
from .realization import ChannelRealization, draw_realization, draw_symbols, \
    received_uplink, trial_rng
from .scenario import NetworkDrop, PilotPlan, PowerConfig, ScenarioConfig, \
    assign_pilots, build_scenario, compute_lsfc, compute_powers, drop_network, \
    load_scenario, noise_power_dbm, path_loss_db, substream
from .sedecode import SinrReport, closed_form_sinr, local_weights, olsfd_weights, \
    se_from_sinr, se_prelog, uniform_weights, weights_for

__version__ = "0.1.0"
