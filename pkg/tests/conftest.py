import numpy as np
import pytest

import cfmimo as cf


@pytest.fixture(scope="session")
def desk():
    """Small multi-AP scenario shared by most tests."""
    cfg = cf.ScenarioConfig(num_aps=6, antennas_per_ap=8, num_ues=10,
                            num_pilots=5, coherence_len=200, seed=3)
    drop, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    return cfg, beta, plan, powers, stats


@pytest.fixture(scope="session")
def tiny():
    """Two APs, three UEs, two pilots; small enough to hand-check."""
    cfg = cf.ScenarioConfig(num_aps=2, antennas_per_ap=4, num_ues=3,
                            num_pilots=2, coherence_len=200, seed=1)
    drop, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    return cfg, beta, plan, powers, stats


@pytest.fixture()
def mixed_grouping(desk):
    """A grouping with strong, weak and empty rows for combiner tests."""
    cfg, beta, plan, powers, stats = desk
    delta = np.zeros((cfg.num_aps, plan.num_pilots))
    delta[0, :2] = 1.0          # two strong pilots
    delta[1, :4] = 1.0          # near the A - 1 budget
    delta[2, 1] = 1.0           # single strong pilot
    # rows 3..5 stay all weak
    return cf.GroupingMatrix.from_delta(delta, "gpfzf")
