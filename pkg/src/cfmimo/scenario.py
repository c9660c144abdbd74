"""Network geometry, large-scale fading, pilot assignment, and transmit powers.

Everything downstream (channel statistics, combining, grouping) consumes the
outputs of this module: a random drop of access points (APs) and user
equipments (UEs) on a square service area, the large-scale fading
coefficients beta, the pilot assignment, and the normalized transmit powers.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

# APs sit on 10 m masts, UEs at street level; the vertical offset enters the
# 3D distance.  A 1 m floor on the 3D distance caps the gain for co-located
# nodes.
AP_HEIGHT_M = 10.0
MIN_DIST_M = 1.0

# Sub-stream tags.  Positions, shadowing, and per-trial fading draws come
# from independent generators keyed by (seed, tag, ...), so consuming more
# of one stream never shifts another.
STREAM_POSITIONS = 1
STREAM_SHADOWING = 2
STREAM_TRIAL = 3
STREAM_DATA = 4


def substream(seed, *key):
    """Independent generator for (seed, *key). Keys are non-negative ints."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


@dataclass
class ScenarioConfig:
    """Scenario parameters.

    Defaults are the full-scale baseline; tests mostly run smaller setups.
    Powers are in mW, bandwidth in Hz, distances in m, shadow_sigma_db and
    noise_figure_db in dB.
    """

    num_aps: int = 100          # M
    antennas_per_ap: int = 8    # A
    num_ues: int = 100          # T
    num_pilots: int = 7         # L_p
    coherence_len: int = 200    # L_c, symbols per coherence block
    bandwidth_hz: float = 20e6
    max_power_mw: float = 100.0
    shadow_sigma_db: float = 8.0
    area_side_m: float = 1000.0
    noise_figure_db: float = 9.0
    seed: int = 0

    def __post_init__(self):
        if self.num_aps < 1 or self.num_ues < 1:
            raise ValueError("need at least one AP and one UE")
        if self.antennas_per_ap < 2:
            raise ValueError("antennas_per_ap must be >= 2")
        if not (1 <= self.num_pilots <= self.coherence_len):
            raise ValueError("num_pilots must lie in [1, coherence_len]")
        if self.max_power_mw <= 0:
            raise ValueError("max_power_mw must be positive")
        if self.area_side_m <= 0:
            raise ValueError("area_side_m must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass
class NetworkDrop:
    ap_xy: np.ndarray  # (M, 2)
    ue_xy: np.ndarray  # (T, 2)


@dataclass
class PilotPlan:
    """Pilot assignment: pilot_of_ue[t] is the pilot index of UE t."""

    pilot_of_ue: np.ndarray        # (T,) int
    num_pilots: int
    groups: list = field(default_factory=list)  # groups[i] = array of UEs on pilot i

    def __post_init__(self):
        if not self.groups:
            self.groups = [
                np.flatnonzero(self.pilot_of_ue == i) for i in range(self.num_pilots)
            ]

    def sharers(self, t):
        """UEs sharing UE t's pilot, including t itself."""
        return self.groups[self.pilot_of_ue[t]]


@dataclass
class PowerConfig:
    """Per-UE pilot and data powers, already normalized by the noise power."""

    p_pilot: np.ndarray  # (T,)
    p_data: np.ndarray   # (T,)


def noise_power_dbm(cfg):
    """Thermal noise power over the signal bandwidth, in dBm."""
    return -174.0 + 10.0 * np.log10(cfg.bandwidth_hz) + cfg.noise_figure_db


def drop_network(cfg, rng=None):
    """Drop APs and UEs uniformly over the square service area.

    The AP coordinates are drawn before the UE coordinates, so the layout is
    reproducible from the seed alone.
    """
    if rng is None:
        rng = substream(cfg.seed, STREAM_POSITIONS)
    ap_xy = rng.uniform(0.0, cfg.area_side_m, size=(cfg.num_aps, 2))
    ue_xy = rng.uniform(0.0, cfg.area_side_m, size=(cfg.num_ues, 2))
    return NetworkDrop(ap_xy=ap_xy, ue_xy=ue_xy)


def path_loss_db(dist_3d_m):
    """Distance-dependent part of the channel gain in dB."""
    d = np.maximum(dist_3d_m, MIN_DIST_M)
    return -30.5 - 36.7 * np.log10(d)


def compute_lsfc(cfg, drop, rng=None):
    """Large-scale fading coefficients beta, shape (M, T), linear scale.

    beta combines the path loss with i.i.d. log-normal shadowing; it is the
    absolute channel gain (the noise normalization lives in the powers, see
    compute_powers).  No wrap-around: border UEs genuinely see fewer strong
    APs.
    """
    if rng is None:
        rng = substream(cfg.seed, STREAM_SHADOWING)
    diff = drop.ap_xy[:, None, :] - drop.ue_xy[None, :, :]
    d2 = np.hypot(diff[..., 0], diff[..., 1])
    d3 = np.sqrt(d2**2 + AP_HEIGHT_M**2)
    shadow = rng.normal(0.0, cfg.shadow_sigma_db, size=d2.shape)
    beta_db = path_loss_db(d3) + shadow
    return 10.0 ** (beta_db / 10.0)


def assign_pilots(cfg, beta):
    """Greedy pilot assignment.

    UEs are visited in descending order of their best channel gain
    max_m beta[m, t].  The first min(T, L_p) UEs receive mutually orthogonal
    pilots; each later UE picks the pilot with the least pilot interference
    sum_{k in P_i} beta[m*, k] at its master AP m* = argmax_m beta[m, t],
    breaking ties toward the lowest pilot index.
    """
    M, T = beta.shape
    L_p = cfg.num_pilots
    best = beta.max(axis=0)
    order = np.argsort(-best, kind="stable")
    pilot_of_ue = np.full(T, -1, dtype=np.int64)
    # interference already scheduled on each pilot, as seen by each AP
    load = np.zeros((M, L_p))
    for rank, t in enumerate(order):
        if rank < min(T, L_p):
            i = rank
        else:
            master = int(np.argmax(beta[:, t]))
            i = int(np.argmin(load[master]))  # argmin takes the lowest index on ties
        pilot_of_ue[t] = i
        load[:, i] += beta[:, t]
    return PilotPlan(pilot_of_ue=pilot_of_ue, num_pilots=L_p)


def compute_powers(cfg):
    """Full-power transmission, normalized by the noise power.

    With beta kept in absolute scale, p * beta is the per-antenna SNR and all
    noise terms downstream are unit variance.
    """
    noise_mw = 10.0 ** (noise_power_dbm(cfg) / 10.0)
    rho = cfg.max_power_mw / noise_mw
    p = np.full(cfg.num_ues, rho)
    return PowerConfig(p_pilot=p, p_data=p.copy())


def build_scenario(cfg):
    """Convenience: drop + lsfc + pilots + powers from a config."""
    drop = drop_network(cfg)
    beta = compute_lsfc(cfg, drop)
    plan = assign_pilots(cfg, beta)
    powers = compute_powers(cfg)
    return drop, beta, plan, powers


# --- config file handling ---------------------------------------------------

_INT_FIELDS = {
    "num_aps", "antennas_per_ap", "num_ues", "num_pilots", "coherence_len", "seed",
}


def parse_kv_file(path):
    """Parse a plain-text key = value file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key] = val
    return out


def load_scenario(path):
    """Read a scenario config file.

    Returns (ScenarioConfig, extras) where extras holds dotted keys such as
    'pga.alpha' that belong to other components.
    """
    raw = parse_kv_file(path)
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs, extras = {}, {}
    for key, val in raw.items():
        if key in known:
            kwargs[key] = int(val) if key in _INT_FIELDS else float(val)
        elif "." in key:
            extras[key] = val
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    return ScenarioConfig(**kwargs), extras


def with_overrides(cfg, **kwargs):
    """Copy of cfg with fields replaced (sweeps use this)."""
    return replace(cfg, **kwargs)
