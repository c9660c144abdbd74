"""Per-AP receive combining vectors.

Combiners are per pilot, not per UE: every UE on a pilot is received through
the same vector because their estimates are parallel.  Strong pilots get a
local zero-forcing vector built on the despread pilot block; weak pilots get
maximum ratio, either plain or projected onto the orthogonal complement of
the strong pilots' subspace.

The normalizations are chosen so that v^H ghat for the served pilot equals
sqrt(array_factor * gamma) exactly per realization (zero forcing) or in
expectation (MR variants), which is what the closed forms assume.
"""

from dataclasses import dataclass

import numpy as np

from .grouping import uses_projection

COND_LIMIT = 1e12

KIND_MR = 0
KIND_LZF = 1
KIND_PMR = 2


class SingularGram(Exception):
    """Strong-pilot Gram matrix numerically singular; redraw the realization."""


@dataclass
class CombinerSet:
    vectors: np.ndarray  # (M, L_p, A) complex; vectors[m, i] serves pilot i at AP m
    kind: np.ndarray     # (M, L_p) int8, KIND_* per vector
    scheme: str

    def per_ue(self, plan):
        """(M, T, A) view: the vector each UE is actually decoded with."""
        return self.vectors[:, plan.pilot_of_ue, :]


def build_mr(gbar_m, theta_m, i):
    """Maximum-ratio vector for pilot i at one AP."""
    A = gbar_m.shape[0]
    return gbar_m[:, i] / np.sqrt(A * theta_m[i])


def _gram(gbar_m, strong):
    Gs = gbar_m[:, strong]
    gram = Gs.conj().T @ Gs
    if np.linalg.cond(gram) > COND_LIMIT:
        raise SingularGram(f"condition number above {COND_LIMIT:g}")
    return Gs, gram


def build_lzf(gbar_m, strong, theta_m, i):
    """Local zero-forcing vector for strong pilot i.

    strong must be sorted pilot indices containing i, with
    len(strong) <= A - 1 so a degree of freedom is left for the array gain.
    """
    A = gbar_m.shape[0]
    strong = np.asarray(strong, dtype=np.int64)
    L_S = len(strong)
    if A - 1 < L_S:
        raise ValueError("zero forcing needs len(strong) <= antennas - 1")
    j = int(np.searchsorted(strong, i))
    if j >= L_S or strong[j] != i:
        raise ValueError("pilot is not in the strong set")
    Gs, gram = _gram(gbar_m, strong)
    e = np.zeros(L_S, dtype=np.complex128)
    e[j] = 1.0
    return Gs @ np.linalg.solve(gram, e) * np.sqrt((A - L_S) * theta_m[i])


def build_projection(gbar_m, strong):
    """Projector onto the orthogonal complement of the strong pilots' span.

    Hermitian and idempotent; the identity when the strong set is empty.
    """
    A = gbar_m.shape[0]
    strong = np.asarray(strong, dtype=np.int64)
    if len(strong) == 0:
        return np.eye(A, dtype=np.complex128)
    Gs, gram = _gram(gbar_m, strong)
    return np.eye(A, dtype=np.complex128) - Gs @ np.linalg.solve(gram, Gs.conj().T)


def build_pmr(gbar_m, proj_m, num_strong, theta_m, i):
    """Projected maximum-ratio vector for weak pilot i.

    With an empty strong set this reduces to plain MR.
    """
    A = gbar_m.shape[0]
    return proj_m @ gbar_m[:, i] / np.sqrt((A - num_strong) * theta_m[i])


def build_combiners(gbar, theta, grouping):
    """Combining vectors for every AP and pilot under a given grouping.

    Raises SingularGram if any AP's strong-pilot Gram matrix is
    ill-conditioned; Monte Carlo callers count that trial and redraw.
    """
    M, A, L_p = gbar.shape
    project_weak = uses_projection(grouping.scheme)
    vectors = np.zeros((M, L_p, A), dtype=np.complex128)
    kind = np.zeros((M, L_p), dtype=np.int8)
    for m in range(M):
        strong = np.flatnonzero(grouping.delta[m] == 1.0)
        L_S = len(strong)
        proj = build_projection(gbar[m], strong) if (project_weak and L_S) else None
        for i in range(L_p):
            if grouping.delta[m, i] == 1.0:
                vectors[m, i] = build_lzf(gbar[m], strong, theta[m], i)
                kind[m, i] = KIND_LZF
            elif proj is not None:
                vectors[m, i] = build_pmr(gbar[m], proj, L_S, theta[m], i)
                kind[m, i] = KIND_PMR
            else:
                vectors[m, i] = build_mr(gbar[m], theta[m], i)
                kind[m, i] = KIND_MR
    return CombinerSet(vectors=vectors, kind=kind, scheme=grouping.scheme)
