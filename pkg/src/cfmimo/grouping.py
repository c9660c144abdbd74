"""Pilot grouping: which pilots each AP zero-forces and which it treats as weak.

A grouping is an M x L_p binary matrix delta; delta[m, i] = 1 means AP m puts
pilot i in its strong set and spends zero-forcing degrees of freedom on it.
Feasibility requires sum_i delta[m, i] <= A - 1 at every AP.

Two constructions are provided: a fixed-threshold rule driven by the
large-scale coefficients, and a per-AP penalized projected gradient ascent
(PGA) on the relaxed box delta in [0, 1]^L_p that maximizes the AP's sum of
local spectral efficiencies.
"""

import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import _kernels
from ._kernels import pga_gradient_kernel, pga_objective_kernel, pga_run_kernel

SCHEMES = ("gpfzf", "gpwpfzf", "pfzf", "pwpfzf", "mr", "fzf")

# scheme id 0: per-pilot array factor, weak pilots get plain MR
# scheme id 1: shared array factor, weak pilots get projected MR
_SCHEME_ID = {"gpfzf": 0, "pfzf": 0, "mr": 0, "fzf": 0, "gpwpfzf": 1, "pwpfzf": 1}


def scheme_id(scheme):
    try:
        return _SCHEME_ID[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}") from None


def uses_projection(scheme):
    """True where weak pilots are combined after projecting out the strong ones."""
    return scheme in ("gpwpfzf", "pwpfzf")


class MaxIterations(Warning):
    """PGA budgets exhausted before the tolerances were met."""


@dataclass
class PgaConfig:
    """Optimizer knobs; every field is overridable as 'pga.<name>' in config files."""

    alpha: float = 0.05        # ascent step size
    chi_init: float = 1.0      # initial penalty weight
    delta_growth: float = 10.0 # penalty growth per outer round
    lambda1: float = 1.0       # binarity penalty weight
    lambda2: float = 1.0       # strong-set budget penalty weight
    inner_tol: float = 1e-6    # relative objective change stopping the ascent
    outer_tol: float = 1e-5    # relative change across penalty rounds
    max_inner: int = 20000
    max_outer: int = 12
    starts: tuple = (0.5, 0.05, 0.95)  # initial delta fills, best run wins

    def __post_init__(self):
        self.starts = tuple(float(s) for s in np.atleast_1d(self.starts))
        if len(self.starts) == 0 or any(not (0.0 < s < 1.0) for s in self.starts):
            raise ValueError("starts must be a nonempty tuple inside (0, 1)")
        if self.alpha <= 0 or self.chi_init <= 0 or self.delta_growth <= 1:
            raise ValueError("alpha, chi_init must be > 0 and delta_growth > 1")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration budgets must be >= 1")

    @classmethod
    def from_extras(cls, extras):
        """Build from the dotted keys of a parsed config file."""
        kwargs = {}
        known = {f.name: f.type for f in fields(cls)}
        for key, val in extras.items():
            scope, _, name = key.partition(".")
            if scope != "pga":
                continue
            if name not in known:
                raise ValueError(f"unknown PGA option {key!r}")
            if name == "starts":
                kwargs[name] = tuple(float(v) for v in str(val).split(","))
            elif name in ("max_inner", "max_outer"):
                kwargs[name] = int(val)
            else:
                kwargs[name] = float(val)
        return cls(**kwargs)


@dataclass
class PgaTrace:
    objective: np.ndarray   # penalized objective after every ascent step
    n_outer: int
    converged: bool
    delta_relaxed: np.ndarray


@dataclass
class GroupingMatrix:
    delta: np.ndarray        # (M, L_p), entries exactly 0.0 or 1.0
    strong_count: np.ndarray # (M,) int, row sums of delta
    scheme: str

    @classmethod
    def from_delta(cls, delta, scheme):
        delta = np.asarray(delta, dtype=np.float64)
        if not np.all((delta == 0.0) | (delta == 1.0)):
            raise ValueError("grouping matrix must be binary")
        return cls(delta=delta, strong_count=delta.sum(axis=1).astype(np.int64),
                   scheme=scheme)


def all_mr_grouping(num_aps, num_pilots, scheme="mr"):
    return GroupingMatrix.from_delta(np.zeros((num_aps, num_pilots)), scheme)


def all_fzf_grouping(num_aps, num_pilots, antennas, scheme="fzf"):
    if num_pilots > antennas - 1:
        raise ValueError("full zero forcing needs antennas >= num_pilots + 1")
    return GroupingMatrix.from_delta(np.ones((num_aps, num_pilots)), scheme)


def threshold_grouping(beta, plan, antennas, q=0.9, scheme="pfzf"):
    """Fixed-threshold strong/weak split.

    At each AP the UEs are sorted by beta and the smallest prefix holding at
    least a fraction q of the AP's total gain is declared strong; a pilot is
    strong iff one of its UEs is.  The strong set is clipped to A - 1 pilots
    by dropping the weakest (per max member beta) strong pilots.
    """
    M, T = beta.shape
    L_p = plan.num_pilots
    delta = np.zeros((M, L_p))
    for m in range(M):
        order = np.argsort(-beta[m], kind="stable")
        csum = np.cumsum(beta[m][order])
        n = int(np.searchsorted(csum, q * csum[-1])) + 1
        strong_ues = order[:n]
        pilots = np.unique(plan.pilot_of_ue[strong_ues])
        if len(pilots) == 0 and scheme == "pfzf":
            # cannot happen for q > 0, but the plain variant must zero-force
            # at least one pilot
            pilots = np.array([plan.pilot_of_ue[order[0]]])
        if len(pilots) > antennas - 1:
            strength = np.array([beta[m][plan.groups[i]].max() for i in pilots])
            keep = np.argsort(-strength, kind="stable")[: antennas - 1]
            pilots = pilots[np.sort(keep)]
        delta[m, pilots] = 1.0
    return GroupingMatrix.from_delta(delta, scheme)


def local_sinr(delta, gamma_m, beta_m, p_u, pilot_of_ue, antennas, scheme):
    """Relaxed per-UE local SINR at one AP for a box-relaxed delta row.

    At binary delta this equals the closed-form local SINR used for the
    decentralized decoding weights.
    """
    delta = np.asarray(delta, dtype=np.float64)
    pilot = np.asarray(pilot_of_ue, dtype=np.int64)
    pg, Gp, Btot = _kernels._prep(np.asarray(gamma_m, float), np.asarray(beta_m, float),
                                  np.asarray(p_u, float), pilot, delta.size)
    S, I, _, _, _, _ = _kernels._terms_np(delta, pg, pilot, Gp, Btot,
                                          float(antennas), scheme_id(scheme))
    return S / I


def pga_objective(delta, gamma_m, beta_m, p_u, pilot_of_ue, antennas, scheme,
                  chi=1.0, lambda1=1.0, lambda2=1.0):
    """Penalized relaxed sum log2(1 + SINR) for one AP."""
    return pga_objective_kernel(
        np.asarray(delta, float), np.asarray(gamma_m, float), np.asarray(beta_m, float),
        np.asarray(p_u, float), np.asarray(pilot_of_ue, np.int64),
        float(antennas), scheme_id(scheme), float(chi), float(lambda1), float(lambda2))


def pga_gradient(delta, gamma_m, beta_m, p_u, pilot_of_ue, antennas, scheme,
                 chi=1.0, lambda1=1.0, lambda2=1.0):
    """Exact gradient of pga_objective in the relaxed box."""
    return pga_gradient_kernel(
        np.asarray(delta, float), np.asarray(gamma_m, float), np.asarray(beta_m, float),
        np.asarray(p_u, float), np.asarray(pilot_of_ue, np.int64),
        float(antennas), scheme_id(scheme), float(chi), float(lambda1), float(lambda2))


def round_and_repair(delta_relaxed, antennas):
    """Binarize a relaxed row at 0.5 (ties round down) and enforce the budget.

    If more than A - 1 pilots survive, strong pilots are demoted in increasing
    order of their relaxed value until the row is feasible.
    """
    binary = (np.asarray(delta_relaxed) > 0.5).astype(np.float64)
    excess = int(binary.sum()) - (antennas - 1)
    if excess > 0:
        strong = np.flatnonzero(binary == 1.0)
        order = strong[np.argsort(delta_relaxed[strong], kind="stable")]
        binary[order[:excess]] = 0.0
    return binary


def pga_optimize(gamma_m, beta_m, p_u, pilot_of_ue, num_pilots, antennas, scheme,
                 pga_cfg=None):
    """Run the penalized projected gradient ascent for one AP.

    The relaxed problem is nonconvex, so the ascent is restarted from each
    fill value in pga_cfg.starts and the rounded row with the best unpenalized
    objective is kept.  Returns (binary delta row, PgaTrace).  Exhausted
    budgets on the winning run emit a MaxIterations warning.
    """
    pcfg = pga_cfg or PgaConfig()
    return _pga_optimize_row(
        np.asarray(gamma_m, float), np.asarray(beta_m, float), np.asarray(p_u, float),
        np.asarray(pilot_of_ue, np.int64), int(num_pilots), float(antennas), scheme, pcfg)


def _initial_delta(num_pilots, antennas, init):
    # keep the start strictly inside the budget region so the relaxed SINRs
    # start positive even when L_p exceeds A - 1
    if init * num_pilots > 0.5 * (antennas - 1.0):
        init = 0.5 * (antennas - 1.0) / num_pilots
    return np.full(num_pilots, init)


def _pga_optimize_row(gamma_m, beta_m, p_u, pilot, num_pilots, antennas, scheme, pcfg):
    sid = scheme_id(scheme)
    best = None
    for init in pcfg.starts:
        delta0 = _initial_delta(num_pilots, antennas, init)
        delta_rel, fvals, n_outer, converged = pga_run_kernel(
            delta0, gamma_m, beta_m, p_u, pilot, antennas, sid,
            pcfg.alpha, pcfg.chi_init, pcfg.delta_growth, pcfg.lambda1, pcfg.lambda2,
            pcfg.inner_tol, pcfg.outer_tol, pcfg.max_inner, pcfg.max_outer)
        binary = round_and_repair(delta_rel, antennas)
        score = pga_objective_kernel(binary, gamma_m, beta_m, p_u, pilot, antennas,
                                     sid, pcfg.chi_init, pcfg.lambda1, pcfg.lambda2)
        if best is None or score > best[0]:
            trace = PgaTrace(objective=fvals, n_outer=n_outer, converged=converged,
                             delta_relaxed=delta_rel)
            best = (score, binary, trace)
    score, binary, trace = best
    if not trace.converged:
        warnings.warn("PGA budgets exhausted before tolerance; keeping best iterate",
                      MaxIterations)
    return binary, trace


def optimize_grouping(stats, beta, plan, powers, antennas, scheme, pga_cfg=None):
    """PGA grouping for every AP; returns (GroupingMatrix, list of PgaTrace)."""
    if scheme not in ("gpfzf", "gpwpfzf"):
        raise ValueError("optimize_grouping applies to the adaptive schemes only")
    M = beta.shape[0]
    pcfg = pga_cfg or PgaConfig()
    delta = np.zeros((M, plan.num_pilots))
    traces = []
    for m in range(M):
        row, trace = _pga_optimize_row(
            stats.gamma[m], beta[m], powers.p_data, plan.pilot_of_ue,
            plan.num_pilots, float(antennas), scheme, pcfg)
        delta[m] = row
        traces.append(trace)
    return GroupingMatrix.from_delta(delta, scheme), traces


def grouping_for_scheme(scheme, stats, beta, plan, powers, antennas,
                        q=0.9, pga_cfg=None):
    """Build the grouping a scheme calls for (adaptive, threshold, or fixed)."""
    if scheme in ("gpfzf", "gpwpfzf"):
        grp, _ = optimize_grouping(stats, beta, plan, powers, antennas, scheme, pga_cfg)
        return grp
    if scheme in ("pfzf", "pwpfzf"):
        return threshold_grouping(beta, plan, antennas, q=q, scheme=scheme)
    if scheme == "mr":
        return all_mr_grouping(beta.shape[0], plan.num_pilots)
    if scheme == "fzf":
        return all_fzf_grouping(beta.shape[0], plan.num_pilots, antennas)
    raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
