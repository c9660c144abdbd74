"""Small-scale fading realizations and the uplink data signal.

The despread pilot block gbar[m] is the only pilot-phase object kept: its
column i is sum_{k on pilot i} sqrt(p_pilot_k * L_p) g[m, k] plus unit
variance noise, and every UE estimate is a scalar multiple of its pilot's
column.  The full despreading matrix is never materialized.
"""

from dataclasses import dataclass

import numpy as np

from .scenario import STREAM_TRIAL, substream


@dataclass
class ChannelRealization:
    g: np.ndarray      # (M, T, A) true channels
    gbar: np.ndarray   # (M, A, L_p) despread pilot observations
    ghat: np.ndarray   # (M, T, A) MMSE estimates
    pilot_noise: bool  # False only in oracle modes


def crandn(rng, *shape):
    """Standard circularly-symmetric complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def trial_rng(seed, trial_index):
    """Generator for one Monte Carlo trial, independent of all others."""
    return substream(seed, STREAM_TRIAL, trial_index)


def draw_realization(cfg, beta, stats, plan, powers, rng, pilot_noise=True):
    """One i.i.d. Rayleigh fading realization plus its pilot observations.

    Draw order is fixed (channels, then pilot noise) so that trials keyed by
    (seed, trial_index) are bitwise reproducible.
    """
    M, T = beta.shape
    A, L_p = cfg.antennas_per_ap, plan.num_pilots
    g = np.sqrt(beta)[:, :, None] * crandn(rng, M, T, A)
    scale = np.sqrt(powers.p_pilot * L_p)  # (T,)
    gbar = np.zeros((M, A, L_p), dtype=np.complex128)
    for i, group in enumerate(plan.groups):
        if len(group):
            gbar[:, :, i] = np.einsum("mta,t->ma", g[:, group, :], scale[group])
    if pilot_noise:
        gbar += crandn(rng, M, A, L_p)
    ghat = stats.c[:, :, None] * np.transpose(gbar[:, :, plan.pilot_of_ue], (0, 2, 1))
    return ChannelRealization(g=g, gbar=gbar, ghat=ghat, pilot_noise=pilot_noise)


def draw_symbols(num_ues, rng, kind="phase"):
    """Unit-power data symbols: uniform phase by default, or Gaussian."""
    if kind == "phase":
        return np.exp(2j * np.pi * rng.uniform(size=num_ues))
    if kind == "gaussian":
        return crandn(rng, num_ues)
    raise ValueError(f"unknown symbol kind {kind!r}")


def received_uplink(real, powers, symbols, rng, noiseless=False):
    """Received uplink data signal y[m] at every AP, shape (M, A).

    The noiseless override exists for moment tests that isolate the signal
    part; normal operation adds unit-variance noise per antenna.
    """
    amp = np.sqrt(powers.p_data) * symbols
    y = np.einsum("mta,t->ma", real.g, amp)
    if not noiseless:
        M, _, A = real.g.shape
        y = y + crandn(rng, M, A)
    return y
