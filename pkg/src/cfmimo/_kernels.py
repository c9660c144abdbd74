"""Numerical kernels for the pilot-grouping optimizer.

Two interchangeable backends implement the same math: a numba one whose
ascent loop is fully compiled, and a pure-numpy one.  Selection is by the
CFMIMO_BACKEND environment variable ('auto' default, 'numba', 'numpy');
'auto' prefers numba when it imports.  Results agree to floating-point
noise; benchmarks/bench_pga.py measures the gap.

Scheme ids: 0 = per-pilot partial zero forcing (weak pilots combined with
plain MR), 1 = weighted variant (weak pilots projected first, so the array
factor is shared by every UE).
"""

import os

import numpy as np

_LN2 = float(np.log(2.0))
_TINY = 1e-30

_env = os.environ.get("CFMIMO_BACKEND", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError(f"CFMIMO_BACKEND must be auto|numba|numpy, got {_env!r}")

HAS_NUMBA = False
if _env in ("auto", "numba"):
    try:
        import numba as nb

        HAS_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise


def _prep(gamma, beta, pu, pilot, num_pilots):
    """Per-pilot aggregate pilot gains and the total received power."""
    pg = pu * gamma
    Gp = np.bincount(pilot, weights=pg, minlength=num_pilots).astype(np.float64)
    Btot = float(np.dot(pu, beta))
    return pg, Gp, Btot


# --- pure-numpy backend ------------------------------------------------------


def _terms_np(delta, pg, pilot, Gp, Btot, A, scheme_id):
    """Relaxed per-UE signal and interference powers, shape (T,) each."""
    D = float(delta.sum())
    GD = float(delta @ Gp)
    d = delta[pilot]
    rho = Gp[pilot] - pg
    if scheme_id == 0:
        phi = A - d * (1.0 + D - d)
        S = pg * phi
        I = rho * phi + Btot + 1.0 - d * (Gp[pilot] + GD - d * Gp[pilot])
    else:
        phi = A - D
        S = pg * phi
        I = rho * phi + Btot + 1.0 - GD
    return S, I, d, rho, D, GD


def _penalty_np(delta, A, lam1, lam2):
    x = np.maximum(0.0, delta - delta**2)
    y = max(0.0, float(delta.sum()) - (A - 1.0))
    return lam1 * float(np.sum(x**2)) + lam2 * y * y


def _obj_np(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2):
    S, I, _, _, _, _ = _terms_np(delta, pg, pilot, Gp, Btot, A, scheme_id)
    I = np.maximum(I, _TINY)
    r = np.maximum(1.0 + S / I, 1e-12)
    return float(np.sum(np.log2(r))) - chi * _penalty_np(delta, A, lam1, lam2)


def _grad_np(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2):
    Lp = delta.size
    S, I, d, rho, D, GD = _terms_np(delta, pg, pilot, Gp, Btot, A, scheme_id)
    ok = (I > _TINY) & (I + S > _TINY)
    C = np.where(ok, 1.0 / (_LN2 * np.maximum(I, _TINY) * np.maximum(I + S, _TINY)), 0.0)
    if scheme_id == 0:
        # cross-pilot part first, own-pilot entries corrected afterwards
        t1 = C * d * (S * rho - I * pg)
        t2 = C * d * S
        grad = np.full(Lp, t1.sum()) + Gp * t2.sum()
        Sp_own = -pg * (1.0 + D - d)
        Ip_own = -rho * (1.0 + D - d) - Gp[pilot] - (GD - d * Gp[pilot])
        corr = C * (I * Sp_own - S * Ip_own) - (t1 + t2 * Gp[pilot])
        np.add.at(grad, pilot, corr)
    else:
        t1 = C * (S * rho - I * pg)
        t2 = C * S
        grad = np.full(Lp, t1.sum()) + Gp * t2.sum()
    x = np.maximum(0.0, delta - delta**2)
    grad = grad - chi * lam1 * 2.0 * x * (1.0 - 2.0 * delta)
    y = float(delta.sum()) - (A - 1.0)
    if y > 0.0:
        grad = grad - chi * lam2 * 2.0 * y
    return grad


def _run_np(delta0, pg, pilot, Gp, Btot, A, scheme_id, alpha, chi0, growth,
            lam1, lam2, inner_tol, outer_tol, max_inner, max_outer):
    delta = delta0.copy()
    chi = chi0
    fvals = np.empty(max_outer * max_inner, dtype=np.float64)
    nf = 0
    converged = False
    s_prev = 0.0
    n_outer = 0
    best = delta.copy()
    for outer in range(max_outer):
        n_outer = outer + 1
        f_prev = _obj_np(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
        f_best = f_prev
        best = delta.copy()
        for _ in range(max_inner):
            g = _grad_np(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
            delta = np.clip(delta + alpha * g, 0.0, 1.0)
            f = _obj_np(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
            fvals[nf] = f
            nf += 1
            if f > f_best:
                f_best = f
                best = delta.copy()
            done = abs(f - f_prev) <= inner_tol * max(abs(f_prev), 1e-12)
            f_prev = f
            if done:
                break
        if outer > 0 and abs(f_prev - s_prev) <= outer_tol * max(abs(s_prev), 1e-12):
            converged = True
            break
        s_prev = f_prev
        chi *= growth
    if not converged:
        delta = best
    return delta, fvals[:nf].copy(), n_outer, converged


# --- numba backend -----------------------------------------------------------

if HAS_NUMBA:

    @nb.njit(cache=True)
    def _obj_nb(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2):
        T = pg.size
        Lp = delta.size
        D = 0.0
        GD = 0.0
        for i in range(Lp):
            D += delta[i]
            GD += delta[i] * Gp[i]
        util = 0.0
        for t in range(T):
            i = pilot[t]
            d = delta[i]
            rho = Gp[i] - pg[t]
            if scheme_id == 0:
                phi = A - d * (1.0 + D - d)
                S = pg[t] * phi
                I = rho * phi + Btot + 1.0 - d * (Gp[i] + GD - d * Gp[i])
            else:
                phi = A - D
                S = pg[t] * phi
                I = rho * phi + Btot + 1.0 - GD
            if I < _TINY:
                I = _TINY
            r = 1.0 + S / I
            if r < 1e-12:
                r = 1e-12
            util += np.log2(r)
        pen = 0.0
        for i in range(Lp):
            x = delta[i] - delta[i] * delta[i]
            if x > 0.0:
                pen += lam1 * x * x
        y = D - (A - 1.0)
        if y > 0.0:
            pen += lam2 * y * y
        return util - chi * pen

    @nb.njit(cache=True)
    def _grad_nb(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2):
        T = pg.size
        Lp = delta.size
        D = 0.0
        GD = 0.0
        for i in range(Lp):
            D += delta[i]
            GD += delta[i] * Gp[i]
        grad = np.zeros(Lp)
        for t in range(T):
            it = pilot[t]
            d = delta[it]
            rho = Gp[it] - pg[t]
            if scheme_id == 0:
                phi = A - d * (1.0 + D - d)
                S = pg[t] * phi
                I = rho * phi + Btot + 1.0 - d * (Gp[it] + GD - d * Gp[it])
            else:
                phi = A - D
                S = pg[t] * phi
                I = rho * phi + Btot + 1.0 - GD
            if I <= _TINY or I + S <= _TINY:
                continue
            C = 1.0 / (_LN2 * I * (I + S))
            if scheme_id == 0:
                for i in range(Lp):
                    if i == it:
                        Sp = -pg[t] * (1.0 + D - d)
                        Ip = -rho * (1.0 + D - d) - Gp[it] - (GD - d * Gp[it])
                        grad[i] += C * (I * Sp - S * Ip)
                    else:
                        grad[i] += C * (d * (S * rho - I * pg[t]) + d * S * Gp[i])
            else:
                for i in range(Lp):
                    grad[i] += C * ((S * rho - I * pg[t]) + S * Gp[i])
        for i in range(Lp):
            x = delta[i] - delta[i] * delta[i]
            if x > 0.0:
                grad[i] -= chi * lam1 * 2.0 * x * (1.0 - 2.0 * delta[i])
        y = D - (A - 1.0)
        if y > 0.0:
            for i in range(Lp):
                grad[i] -= chi * lam2 * 2.0 * y
        return grad

    @nb.njit(cache=True)
    def _run_nb(delta0, pg, pilot, Gp, Btot, A, scheme_id, alpha, chi0, growth,
                lam1, lam2, inner_tol, outer_tol, max_inner, max_outer):
        Lp = delta0.size
        delta = delta0.copy()
        chi = chi0
        fvals = np.empty(max_outer * max_inner, dtype=np.float64)
        nf = 0
        converged = False
        s_prev = 0.0
        n_outer = 0
        best = delta.copy()
        for outer in range(max_outer):
            n_outer = outer + 1
            f_prev = _obj_nb(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
            f_best = f_prev
            for i in range(Lp):
                best[i] = delta[i]
            for _ in range(max_inner):
                g = _grad_nb(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
                for i in range(Lp):
                    v = delta[i] + alpha * g[i]
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                    delta[i] = v
                f = _obj_nb(delta, pg, pilot, Gp, Btot, A, scheme_id, chi, lam1, lam2)
                fvals[nf] = f
                nf += 1
                if f > f_best:
                    f_best = f
                    for i in range(Lp):
                        best[i] = delta[i]
                stop = abs(f - f_prev) <= inner_tol * max(abs(f_prev), 1e-12)
                f_prev = f
                if stop:
                    break
            if outer > 0 and abs(f_prev - s_prev) <= outer_tol * max(abs(s_prev), 1e-12):
                converged = True
                break
            s_prev = f_prev
            chi *= growth
        if not converged:
            for i in range(Lp):
                delta[i] = best[i]
        return delta, fvals[:nf].copy(), n_outer, converged


def _select_backend():
    if _env == "numpy":
        return "numpy"
    if _env == "numba":
        return "numba"
    return "numba" if HAS_NUMBA else "numpy"


BACKEND = _select_backend()


def implementations():
    """Backend name -> (objective, gradient, run) core triples."""
    impls = {"numpy": (_obj_np, _grad_np, _run_np)}
    if HAS_NUMBA:
        impls["numba"] = (_obj_nb, _grad_nb, _run_nb)
    return impls


_OBJ, _GRAD, _RUN = implementations()[BACKEND]


def pga_objective_kernel(delta, gamma, beta, pu, pilot, A, scheme_id, chi, lam1, lam2):
    pg, Gp, Btot = _prep(gamma, beta, pu, pilot, delta.size)
    return _OBJ(np.asarray(delta, dtype=np.float64), pg, pilot, Gp, Btot,
                float(A), scheme_id, chi, lam1, lam2)


def pga_gradient_kernel(delta, gamma, beta, pu, pilot, A, scheme_id, chi, lam1, lam2):
    pg, Gp, Btot = _prep(gamma, beta, pu, pilot, delta.size)
    return _GRAD(np.asarray(delta, dtype=np.float64), pg, pilot, Gp, Btot,
                 float(A), scheme_id, chi, lam1, lam2)


def pga_run_kernel(delta0, gamma, beta, pu, pilot, A, scheme_id, alpha, chi0,
                   growth, lam1, lam2, inner_tol, outer_tol, max_inner, max_outer):
    pg, Gp, Btot = _prep(gamma, beta, pu, pilot, delta0.size)
    return _RUN(np.asarray(delta0, dtype=np.float64), pg, pilot, Gp, Btot,
                float(A), scheme_id, alpha, chi0, growth, lam1, lam2,
                inner_tol, outer_tol, max_inner, max_outer)
