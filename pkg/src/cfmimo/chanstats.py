"""Second-order channel-estimation statistics.

For MMSE estimation from despread pilots, three quantities describe
everything the closed forms need:

  theta[m, i]  power per antenna of the despread pilot-i observation at AP m
  c[m, t]      scaling that turns that observation into UE t's estimate
  gamma[m, t]  per-antenna power of the estimate, gamma = c^2 * theta

UEs sharing a pilot have parallel estimates at every AP (same despread
column, different scaling); that is the root of pilot contamination and the
reason combiners are per-pilot objects.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ChannelStats:
    gamma: np.ndarray  # (M, T)
    c: np.ndarray      # (M, T)
    theta: np.ndarray  # (M, L_p)


def compute_stats(beta, plan, powers, num_pilots=None):
    """Estimation statistics from large-scale coefficients.

    beta is (M, T) absolute gain, powers are noise-normalized, and the pilot
    energy is p_pilot * L_p (L_p symbols at power p_pilot).
    """
    L_p = plan.num_pilots if num_pilots is None else num_pilots
    M, T = beta.shape
    energy = powers.p_pilot * L_p  # (T,)
    theta = np.ones((M, L_p))
    for i, group in enumerate(plan.groups):
        if len(group):
            theta[:, i] += beta[:, group] @ energy[group]
    denom = theta[:, plan.pilot_of_ue]  # (M, T)
    c = np.sqrt(energy)[None, :] * beta / denom
    gamma = energy[None, :] * beta**2 / denom
    return ChannelStats(gamma=gamma, c=c, theta=theta)
