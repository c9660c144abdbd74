"""Fronthaul and computation cost models.

Counts follow the usual complex-multiplication bookkeeping: a Hermitian
L x L Gram product from an A x L block costs (L^2 + L)/2 * A, an L x L
inverse via Cholesky costs (L^3 - L)/3 + L^2 (the L^2 is folded into the
per-pilot/per-UE products below), and real scalars shipped over fronthaul
count in units of complex scalars (two reals = one complex).

'l_u' is the number of uplink data symbols per coherence block.  Both
readings of that quantity are exposed: uplink_symbols() gives the symbol
count (L_c - L_p) / 2 used here, se_prelog() in sedecode gives the SE
prefactor (1 - L_p / L_c) / 2.
"""

from dataclasses import dataclass

ARCHITECTURES = ("olsfd", "local")


def uplink_symbols(coherence_len, num_pilots):
    """Uplink data symbols per coherence block (half the non-pilot symbols)."""
    return (coherence_len - num_pilots) / 2.0


@dataclass
class CostReport:
    architecture: str
    fronthaul: float       # complex scalars per coherence block
    weight_compute: float  # complex multiplications per coherence block


def decoding_costs(num_aps, num_ues, l_u, architecture):
    """Fronthaul load and CPU weight computation for one decoding architecture.

    'olsfd' ships per-AP data estimates plus the statistics needed to build
    the aggregation weights centrally and solves one M x M system per UE;
    'local' ships locally weighted estimates only, and the CPU just sums.
    """
    M, T = num_aps, num_ues
    if architecture == "olsfd":
        fronthaul = l_u * M + (3 * M * T + M) / 2.0
        compute = (M**2 + M) / 2.0 * T + (M**3 - M) / 3.0 + M**2
    elif architecture == "local":
        fronthaul = l_u * M
        compute = (M**2 + M) / 2.0 * T + M + M**2
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    return CostReport(architecture=architecture, fronthaul=float(fronthaul),
                      weight_compute=float(compute))


def combining_costs(antennas, num_pilots, num_strong, num_ues, scheme):
    """Per-AP complex multiplications to form the combining vectors.

    The threshold variants scale their MR stage with the UE count; the
    adaptive variants work per pilot.  The projected variants add the cost of
    projecting each weak pilot's observation.
    """
    A, L_p, L_S, T = antennas, num_pilots, num_strong, num_ues
    base = 1.5 * L_S**2 * A + 0.5 * L_S * A + (L_S**3 - L_S) / 3.0
    if scheme == "pfzf":
        total = base + A * T
    elif scheme == "gpfzf":
        total = base + A * L_p
    elif scheme == "pwpfzf":
        total = base + A * T + 2.0 * (L_p - L_S) * L_S * A
    elif scheme == "gpwpfzf":
        total = base + A * L_p + 2.0 * (L_p - L_S) * L_S * A
    else:
        raise ValueError(f"unknown scheme {scheme!r} for combining costs")
    return float(total)
