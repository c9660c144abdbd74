"""Monte Carlo estimation of the SINR terms and of combiner moments.

This is the oracle side of the package: it samples the exact definitions of
the desired-signal, beamforming-uncertainty, pilot-contamination,
inter-user-interference, and noise terms from fading realizations, so the
closed forms can be validated against them.

Determinism: every trial draws from a generator keyed by (seed, trial index),
so estimates are bitwise reproducible, independent of chunking, and trials
may be partitioned across workers without sharing state.  All schemes and
weight choices are evaluated on the same realizations (common random
numbers).
"""

from dataclasses import dataclass, field

import numpy as np

from .combining import SingularGram, build_combiners
from .realization import crandn, draw_realization, trial_rng


class RejectionBudgetExceeded(Exception):
    """Too many realizations rejected for ill-conditioned strong-pilot Grams."""


@dataclass
class McConfig:
    num_trials: int = 1000
    seed: int = 0
    rejection_budget: int = None  # defaults to num_trials
    report_ci: bool = False

    def __post_init__(self):
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")
        if self.rejection_budget is None:
            self.rejection_budget = self.num_trials


@dataclass
class EmpiricalTerms:
    """Sampled SINR terms for every UE, with approximate standard errors."""

    ds: np.ndarray
    bu: np.ndarray
    pc: np.ndarray
    ui: np.ndarray
    gn: np.ndarray
    sinr: np.ndarray
    stderr: dict = field(default_factory=dict)
    num_trials: int = 0
    num_rejected: int = 0

    def ci95(self, term):
        val = getattr(self, term)
        se = self.stderr[term]
        return val - 1.96 * se, val + 1.96 * se


class _Acc:
    """Online accumulators for one weight matrix."""

    def __init__(self, T):
        self.n = 0
        self.sum_cross = np.zeros((T, T), dtype=np.complex128)  # sum of aggregates
        self.sum_cross2 = np.zeros((T, T))                      # sum of |aggregate|^2
        self.sum_cross4 = np.zeros((T, T))                      # sum of |aggregate|^4
        self.sum_shat = np.zeros(T, dtype=np.complex128)
        self.sum_shat2 = np.zeros(T)
        self.sum_gn2 = np.zeros(T)
        self.sum_gn4 = np.zeros(T)

    def add(self, agg, shat, gn):
        a2 = np.abs(agg) ** 2
        g2 = np.abs(gn) ** 2
        self.n += 1
        self.sum_cross += agg
        self.sum_cross2 += a2
        self.sum_cross4 += a2**2
        self.sum_shat += shat
        self.sum_shat2 += np.abs(shat) ** 2
        self.sum_gn2 += g2
        self.sum_gn4 += g2**2


def _finalize(acc, plan, powers):
    n = acc.n
    p = powers.p_data
    T = p.size
    same = plan.pilot_of_ue[:, None] == plan.pilot_of_ue[None, :]
    eye = np.eye(T, dtype=bool)

    mean_shat = acc.sum_shat / n
    ds = p * np.abs(mean_shat) ** 2
    var_shat = np.maximum(acc.sum_shat2 / n - np.abs(mean_shat) ** 2, 0.0)
    se_mean = np.sqrt(var_shat / n)
    ds_se = p * 2.0 * np.abs(mean_shat) * se_mean

    own = np.arange(T)
    mean_own = acc.sum_cross[own, own] / n
    # unbiased sample variance of the true-channel aggregate
    bu = p * (acc.sum_cross2[own, own] - n * np.abs(mean_own) ** 2) / (n - 1)
    m2 = acc.sum_cross2 / n
    m4 = acc.sum_cross4 / n
    se_m2 = np.sqrt(np.maximum(m4 - m2**2, 0.0) / n)
    bu_se = p * se_m2[own, own]

    weighted = p[None, :] * m2
    weighted_se2 = (p[None, :] * se_m2) ** 2
    pc = (weighted * (same & ~eye)).sum(axis=1)
    pc_se = np.sqrt((weighted_se2 * (same & ~eye)).sum(axis=1))
    ui = (weighted * ~same).sum(axis=1)
    ui_se = np.sqrt((weighted_se2 * ~same).sum(axis=1))

    gn = acc.sum_gn2 / n
    gn_se = np.sqrt(np.maximum(acc.sum_gn4 / n - gn**2, 0.0) / n)

    sinr = ds / (bu + pc + ui + gn)
    return EmpiricalTerms(
        ds=ds, bu=bu, pc=pc, ui=ui, gn=gn, sinr=sinr,
        stderr={"ds": ds_se, "bu": bu_se, "pc": pc_se, "ui": ui_se, "gn": gn_se},
        num_trials=n)


def empirical_terms_multi(cfg, beta, stats, plan, powers, cases, mc):
    """Sample the SINR terms for several (grouping, weights) cases at once.

    cases is a list of (grouping, {name: (M, T) weight matrix}); all cases are
    evaluated on the same realizations.  A realization on which any case's
    combiner build fails is rejected for all of them and redrawn; more than
    mc.rejection_budget rejections raise RejectionBudgetExceeded.
    """
    M, T = beta.shape
    A = cfg.antennas_per_ap
    accs = [{name: _Acc(T) for name in wdict} for _, wdict in cases]
    accepted = 0
    rejected = 0
    trial = 0
    while accepted < mc.num_trials:
        rng = trial_rng(mc.seed, trial)
        trial += 1
        real = draw_realization(cfg, beta, stats, plan, powers, rng)
        noise = crandn(rng, M, A)
        try:
            combiners = [build_combiners(real.gbar, stats.theta, grp)
                         for grp, _ in cases]
        except SingularGram:
            rejected += 1
            if rejected > mc.rejection_budget:
                raise RejectionBudgetExceeded(
                    f"{rejected} rejected realizations exceed the budget "
                    f"{mc.rejection_budget}") from None
            continue
        accepted += 1
        for (grp, wdict), cs, accd in zip(cases, combiners, accs):
            vue = cs.per_ue(plan)
            inner = np.einsum("mta,mka->mtk", vue.conj(), real.g)
            shat = np.einsum("mta,mta->mt", vue.conj(), real.ghat)
            gvec = np.einsum("mta,ma->mt", vue.conj(), noise)
            for name, a in wdict.items():
                agg = np.einsum("mt,mtk->tk", a, inner)
                accd[name].add(agg, np.einsum("mt,mt->t", a, shat),
                               np.einsum("mt,mt->t", a, gvec))
    out = []
    for accd in accs:
        res = {name: _finalize(acc, plan, powers) for name, acc in accd.items()}
        for r in res.values():
            r.num_rejected = rejected
        out.append(res)
    return out


def empirical_terms(cfg, beta, stats, plan, powers, grouping, weights, mc):
    """Sampled SINR terms for a single grouping and weight matrix."""
    res = empirical_terms_multi(cfg, beta, stats, plan, powers,
                                [(grouping, {"w": weights})], mc)
    return res[0]["w"]


# --- combiner moment catalog -------------------------------------------------

# Behavior-named checks, each returning (estimate, target).  'exact' checks
# hold per realization up to numerical round-off; the rest are expectations.
MOMENT_CHECKS = (
    "zf_gram_inverse_diag",
    "zf_own_pilot_gain",      # exact
    "zf_strong_null",         # exact
    "zf_own_pilot_sq",
    "zf_weak_pilot_sq",
    "mr_own_pilot_mean",
    "mr_other_pilot_mean",
    "mr_same_pilot_sq",
    "mr_other_pilot_sq",
    "pmr_own_pilot_mean",
    "pmr_strong_null",        # exact
    "pmr_own_pilot_sq",
    "pmr_weak_pilot_sq",
)

EXACT_CHECKS = ("zf_own_pilot_gain", "zf_strong_null", "pmr_strong_null")


@dataclass
class MomentCheck:
    check_id: str
    estimate: float
    target: float
    stderr: float
    rel_err: float
    max_dev: float = None  # exact checks: worst normalized per-draw deviation


def empirical_moment(check_id, cfg, stats, plan, grouping, m, t, k=None,
                     num_trials=10000, seed=0):
    """Sample one moment of a combining vector at AP m and compare to theory.

    t names the UE whose pilot the combiner serves; k (where applicable) the
    UE whose estimate is being projected onto it.
    """
    if check_id not in MOMENT_CHECKS:
        raise ValueError(f"unknown check {check_id!r}")
    A = cfg.antennas_per_ap
    L_p = plan.num_pilots
    theta = stats.theta[m]
    rng = np.random.default_rng(seed)
    gbar = crandn(rng, num_trials, A, L_p) * np.sqrt(theta)[None, None, :]

    i_t = plan.pilot_of_ue[t]
    strong = np.flatnonzero(grouping.delta[m] == 1.0)
    L_S = len(strong)
    gam = stats.gamma[m]

    def ghat_of(u):
        return stats.c[m, u] * gbar[:, :, plan.pilot_of_ue[u]]

    if check_id.startswith("zf"):
        if i_t not in strong:
            raise ValueError("zf checks need UE t on a strong pilot")
        Gs = gbar[:, :, strong]
        gram = np.einsum("nak,nal->nkl", Gs.conj(), Gs)
        inv = np.linalg.inv(gram)
        j = int(np.searchsorted(strong, i_t))
        if check_id == "zf_gram_inverse_diag":
            draws = inv[:, j, j].real
            target = 1.0 / ((A - L_S) * theta[i_t])
            return _statistical(check_id, draws, target)
        v = np.einsum("nal,nl->na", Gs, inv[:, :, j]) * np.sqrt((A - L_S) * theta[i_t])
        if check_id == "zf_own_pilot_gain":
            draws = np.einsum("na,na->n", v.conj(), ghat_of(t))
            target = np.sqrt((A - L_S) * gam[t])
            return _exact(check_id, draws, target)
        if check_id == "zf_strong_null":
            _require_strong_other(plan, grouping, m, t, k)
            draws = np.einsum("na,na->n", v.conj(), ghat_of(k))
            return _exact(check_id, draws, 0.0,
                          scale=np.sqrt((A - L_S) * gam[t]))
        if check_id == "zf_own_pilot_sq":
            draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(t))) ** 2
            return _statistical(check_id, draws, (A - L_S) * gam[t])
        if check_id == "zf_weak_pilot_sq":
            _require_weak(plan, grouping, m, k)
            draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(k))) ** 2
            return _statistical(check_id, draws, gam[k])

    if check_id.startswith("mr"):
        v = gbar[:, :, i_t] / np.sqrt(A * theta[i_t])
        if check_id == "mr_own_pilot_mean":
            draws = np.einsum("na,na->n", v.conj(), ghat_of(t)).real
            return _statistical(check_id, draws, np.sqrt(A * gam[t]))
        if check_id == "mr_other_pilot_mean":
            _require_other_pilot(plan, t, k)
            draws = np.einsum("na,na->n", v.conj(), ghat_of(k)).real
            return _statistical(check_id, draws, 0.0)
        if check_id == "mr_same_pilot_sq":
            if plan.pilot_of_ue[k] != i_t:
                raise ValueError("mr_same_pilot_sq needs a UE on the same pilot")
            draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(k))) ** 2
            return _statistical(check_id, draws, (A + 1) * gam[k])
        if check_id == "mr_other_pilot_sq":
            _require_other_pilot(plan, t, k)
            draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(k))) ** 2
            return _statistical(check_id, draws, gam[k])

    # projected MR family
    if i_t in strong:
        raise ValueError("pmr checks need UE t on a weak pilot")
    Gs = gbar[:, :, strong]
    gram = np.einsum("nak,nal->nkl", Gs.conj(), Gs)
    eye = np.eye(A, dtype=np.complex128)
    proj = eye[None] - np.einsum("nal,nlk,nbk->nab", Gs, np.linalg.inv(gram), Gs.conj())
    v = np.einsum("nab,nb->na", proj, gbar[:, :, i_t]) / np.sqrt((A - L_S) * theta[i_t])
    if check_id == "pmr_own_pilot_mean":
        draws = np.einsum("na,na->n", v.conj(), ghat_of(t)).real
        return _statistical(check_id, draws, np.sqrt((A - L_S) * gam[t]))
    if check_id == "pmr_strong_null":
        _require_strong_other(plan, grouping, m, t, k)
        draws = np.einsum("na,na->n", v.conj(), ghat_of(k))
        return _exact(check_id, draws, 0.0, scale=np.sqrt((A - L_S) * gam[t]))
    if check_id == "pmr_own_pilot_sq":
        draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(t))) ** 2
        return _statistical(check_id, draws, (A - L_S + 1) * gam[t])
    if check_id == "pmr_weak_pilot_sq":
        _require_weak(plan, grouping, m, k)
        _require_other_pilot(plan, t, k)
        draws = np.abs(np.einsum("na,na->n", v.conj(), ghat_of(k))) ** 2
        return _statistical(check_id, draws, gam[k])
    raise AssertionError("unreachable")


def _require_strong_other(plan, grouping, m, t, k):
    if k is None or plan.pilot_of_ue[k] == plan.pilot_of_ue[t]:
        raise ValueError("need a UE k on a different pilot")
    if grouping.delta[m, plan.pilot_of_ue[k]] != 1.0:
        raise ValueError("need a UE k on a strong pilot")


def _require_weak(plan, grouping, m, k):
    if k is None or grouping.delta[m, plan.pilot_of_ue[k]] != 0.0:
        raise ValueError("need a UE k on a weak pilot")


def _require_other_pilot(plan, t, k):
    if k is None or plan.pilot_of_ue[k] == plan.pilot_of_ue[t]:
        raise ValueError("need a UE k on a different pilot")


def _statistical(check_id, draws, target):
    est = float(draws.mean())
    se = float(draws.std(ddof=1) / np.sqrt(len(draws)))
    rel = abs(est - target) / abs(target) if target != 0.0 else abs(est)
    return MomentCheck(check_id, est, float(target), se, rel)


def _exact(check_id, draws, target, scale=None):
    scale = abs(target) if scale is None else scale
    dev = float(np.max(np.abs(draws - target)) / scale)
    est = float(np.mean(draws).real)
    return MomentCheck(check_id, est, float(target), 0.0, dev, max_dev=dev)
