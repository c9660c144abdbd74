"""Benchmark the pilot-grouping kernels: numba backend vs pure numpy.

Runs the full ascent (all APs, both adaptive schemes) plus objective and
gradient micro-calls on identical inputs and reports per-call times and the
worst cross-backend deviation.  The package itself picks its backend at
import via CFMIMO_BACKEND (auto|numba|numpy); this script times both
implementations side by side regardless of that choice.
"""

import argparse
import time

import numpy as np

import cfmimo as cf
from cfmimo import _kernels
from cfmimo.grouping import PgaConfig, scheme_id


def _per_ap_inputs(cfg):
    _, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    rows = []
    for m in range(cfg.num_aps):
        pg, Gp, Btot = _kernels._prep(stats.gamma[m], beta[m], powers.p_data,
                                      plan.pilot_of_ue, plan.num_pilots)
        rows.append((pg, Gp, Btot))
    return rows, plan.pilot_of_ue, plan.num_pilots


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--num-aps", type=int, default=20)
    ap.add_argument("--antennas", type=int, default=8)
    ap.add_argument("--num-ues", type=int, default=30)
    ap.add_argument("--num-pilots", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    cfg = cf.ScenarioConfig(num_aps=args.num_aps, antennas_per_ap=args.antennas,
                            num_ues=args.num_ues, num_pilots=args.num_pilots,
                            coherence_len=200, seed=args.seed)
    rows, pilot, L_p = _per_ap_inputs(cfg)
    pcfg = PgaConfig()
    A = float(args.antennas)
    delta0 = np.full(L_p, 0.5)
    impls = _kernels.implementations()
    print(f"backends: {', '.join(impls)} (package default: {_kernels.BACKEND})")
    print(f"scenario: M={args.num_aps} A={args.antennas} T={args.num_ues} "
          f"L_p={L_p}, {len(rows)} APs x 2 schemes per ascent pass")

    results = {}
    for name, (obj, grad, run) in impls.items():
        def full_pass():
            out = []
            for sid in (0, 1):
                for pg, Gp, Btot in rows:
                    d, fv, _, _ = run(delta0.copy(), pg, pilot, Gp, Btot, A,
                                      sid, pcfg.alpha, pcfg.chi_init,
                                      pcfg.delta_growth, pcfg.lambda1,
                                      pcfg.lambda2, pcfg.inner_tol,
                                      pcfg.outer_tol, pcfg.max_inner,
                                      pcfg.max_outer)
                    out.append(d)
            return np.concatenate(out)

        full_pass()  # warm-up: triggers JIT compilation on the numba path
        t_run, deltas = _time(full_pass, args.repeats)
        pg, Gp, Btot = rows[0]
        t_obj, _ = _time(lambda: [obj(delta0, pg, pilot, Gp, Btot, A, 0,
                                      1.0, 1.0, 1.0) for _ in range(1000)],
                         args.repeats)
        t_grad, _ = _time(lambda: [grad(delta0, pg, pilot, Gp, Btot, A, 0,
                                        1.0, 1.0, 1.0) for _ in range(1000)],
                          args.repeats)
        results[name] = (t_run, t_obj, t_grad, deltas)
        print(f"{name:>6}: ascent pass {t_run * 1e3:8.1f} ms   "
              f"objective {t_obj * 1e3:7.2f} us/call   "
              f"gradient {t_grad * 1e3:7.2f} us/call")

    if len(results) == 2:
        r_np, r_nb = results["numpy"], results["numba"]
        dev = float(np.max(np.abs(r_np[3] - r_nb[3])))
        print(f"speedup (numpy/numba): ascent {r_np[0] / r_nb[0]:.1f}x, "
              f"objective {r_np[1] / r_nb[1]:.1f}x, "
              f"gradient {r_np[2] / r_nb[2]:.1f}x; "
              f"max |delta difference| = {dev:.2e}")


if __name__ == "__main__":
    main()
