"""Closed-form SINR/SE and the decoding weights that aggregate AP statistics.

All quantities here are functions of the large-scale statistics and the
grouping only; no fading realizations enter.  The effective per-AP channel
quality for UE k, seen through the combiner of UE t's pilot, is

    b[m, k] = sqrt(array_factor(m, t) * gamma[m, k])

where the array factor is A - delta[m, i_t] * L_S(m) when weak pilots use
plain MR, and A - L_S(m) when weak pilots are projected.  The residual
(non-coherent) interference keeps beta[m, k] minus the part the estimate
explains, gated by the appropriate delta product.

Three weight choices are supported: decentralized local weights (each AP
scales by its own local SINR, no statistics travel to the CPU), optimal
large-scale fading decoding (a Rayleigh-quotient solve per UE), and uniform.
"""

from dataclasses import dataclass

import numpy as np

from .grouping import scheme_id


@dataclass
class SinrReport:
    """Per-UE closed-form SINR decomposition and spectral efficiency."""

    scheme: str
    sinr: np.ndarray  # (T,)
    se: np.ndarray    # (T,)
    ds: np.ndarray
    bu: np.ndarray
    pc: np.ndarray
    ui: np.ndarray
    gn: np.ndarray
    prelog: float

    @property
    def sum_se(self):
        return float(self.se.sum())


def se_prelog(num_pilots, coherence_len):
    """Fraction of the coherence block carrying uplink data."""
    return (1.0 - num_pilots / coherence_len) / 2.0


def se_from_sinr(sinr, num_pilots, coherence_len):
    return se_prelog(num_pilots, coherence_len) * np.log2(1.0 + sinr)


def _array_factor(grouping, plan, antennas):
    """(M, T) effective array gain for each UE's serving combiner."""
    d_ue = grouping.delta[:, plan.pilot_of_ue]  # (M, T)
    L_S = grouping.strong_count[:, None].astype(np.float64)
    if scheme_id(grouping.scheme) == 0:
        return antennas - d_ue * L_S
    return np.broadcast_to(antennas - L_S, d_ue.shape).copy()


def _gain_matrix(stats, plan, grouping, antennas):
    """b[m, t] = sqrt(array_factor * gamma); real and non-negative."""
    return np.sqrt(_array_factor(grouping, plan, antennas) * stats.gamma)


def _residual_diag(beta, stats, plan, powers, grouping):
    """w[m, t] = sum_k p_k (beta[m,k] - dprod * gamma[m,k]) + 1.

    The delta product collapses to delta[m, i_t] * delta[m, i_k] or
    delta[m, i_k] depending on the scheme family.
    """
    gamma = stats.gamma
    d_ue = grouping.delta[:, plan.pilot_of_ue]  # (M, T)
    btot = beta @ powers.p_data                    # (M,)
    gdel = (d_ue * gamma) @ powers.p_data          # (M,)
    if scheme_id(grouping.scheme) == 0:
        return btot[:, None] - d_ue * gdel[:, None] + 1.0
    return np.broadcast_to((btot - gdel)[:, None] + 1.0, d_ue.shape).copy()


def _coherent_load(stats, plan, powers):
    """(M, T): sum of p_k gamma[m, k] over the other UEs on t's pilot."""
    M = stats.gamma.shape[0]
    gsum = np.zeros((M, plan.num_pilots))
    for i, group in enumerate(plan.groups):
        if len(group):
            gsum[:, i] = stats.gamma[:, group] @ powers.p_data[group]
    return gsum[:, plan.pilot_of_ue] - powers.p_data[None, :] * stats.gamma


def local_weights(beta, stats, plan, powers, grouping, antennas):
    """Decentralized weights: a[m, t] is AP m's own closed-form SINR for UE t."""
    gain = _array_factor(grouping, plan, antennas)
    num = powers.p_data[None, :] * gain * stats.gamma
    coh = gain * _coherent_load(stats, plan, powers)
    w = _residual_diag(beta, stats, plan, powers, grouping)
    return num / (coh + w)


def uniform_weights(num_aps, num_ues):
    return np.ones((num_aps, num_ues))


def olsfd_weights(beta, stats, plan, powers, grouping, antennas, cond_limit=1e12):
    """Optimal large-scale fading decoding weights, one solve per UE.

    Maximizes p_t (a^T b_t)^2 / (a^T C_t a) with C_t the coherent-interference
    plus residual covariance; the maximizer is a = C_t^{-1} b_t.  A numerically
    singular C_t gets diagonal loading and a warning (the covariance has a
    unit diagonal floor, so this should never trigger in practice).
    """
    import warnings

    M, T = stats.gamma.shape
    b = _gain_matrix(stats, plan, grouping, antennas)
    w = _residual_diag(beta, stats, plan, powers, grouping)
    a = np.zeros((M, T))
    for t in range(T):
        sharers = plan.sharers(t)
        others = sharers[sharers != t]
        C = np.diag(w[:, t].copy())
        for k in others:
            C += powers.p_data[k] * np.outer(b[:, k], b[:, k])
        if np.linalg.cond(C) > cond_limit:
            warnings.warn("aggregation covariance ill-conditioned; loading diagonal")
            C = C + 1e-12 * np.trace(C) / M * np.eye(M)
        a[:, t] = np.linalg.solve(C, b[:, t])
    return a


def closed_form_sinr(weights, beta, stats, plan, powers, grouping, antennas,
                     num_pilots=None, coherence_len=None):
    """Closed-form SINR decomposition for every UE under the given weights.

    The report's terms satisfy sinr = ds / (bu + pc + ui + gn) exactly as
    assembled, and the SINR is invariant to rescaling any UE's weight column.
    """
    a = np.asarray(weights, dtype=np.float64)
    p = powers.p_data
    b = _gain_matrix(stats, plan, grouping, antennas)
    gamma, d_ue = stats.gamma, grouping.delta[:, plan.pilot_of_ue]
    a2 = a**2

    cross = a.T @ b                       # cross[t, k] = sum_m a[m,t] b[m,k]
    if scheme_id(grouping.scheme) == 0:
        resid = a2.T @ beta - (a2 * d_ue).T @ (d_ue * gamma)
    else:
        resid = a2.T @ beta - a2.T @ (d_ue * gamma)

    T = gamma.shape[1]
    same_pilot = plan.pilot_of_ue[:, None] == plan.pilot_of_ue[None, :]
    eye = np.eye(T, dtype=bool)

    ds = p * np.diag(cross) ** 2
    bu = p * np.diag(resid)
    pc_mask = same_pilot & ~eye
    pc = ((cross**2 + resid) * p[None, :] * pc_mask).sum(axis=1)
    ui = (resid * p[None, :] * (~same_pilot)).sum(axis=1)
    gn = a2.sum(axis=0)

    sinr = ds / (bu + pc + ui + gn)
    L_p = plan.num_pilots if num_pilots is None else num_pilots
    if coherence_len is None:
        raise ValueError("coherence_len is required to convert SINR to SE")
    prelog = se_prelog(L_p, coherence_len)
    se = prelog * np.log2(1.0 + sinr)
    return SinrReport(scheme=grouping.scheme, sinr=sinr, se=se, ds=ds, bu=bu,
                      pc=pc, ui=ui, gn=gn, prelog=prelog)


def weights_for(architecture, beta, stats, plan, powers, grouping, antennas):
    """Dispatch: 'local', 'olsfd', or 'uniform' weight matrices (M, T)."""
    if architecture == "local":
        return local_weights(beta, stats, plan, powers, grouping, antennas)
    if architecture == "olsfd":
        return olsfd_weights(beta, stats, plan, powers, grouping, antennas)
    if architecture == "uniform":
        return uniform_weights(*stats.gamma.shape)
    raise ValueError(f"unknown architecture {architecture!r}")
