"""End-to-end acceptance battery.

Each test prints one PASS/FAIL line (run with -s to see them on success)
and asserts the stated tolerance.  The expensive multi-drop sweep is shared
between the scheme-comparison, weight-gap and histogram tests.
"""

import itertools
import time
import warnings

import numpy as np
import pytest

import cfmimo as cf
from cfmimo.cli import main
from cfmimo.grouping import (MaxIterations, all_fzf_grouping, all_mr_grouping,
                             grouping_for_scheme, pga_gradient, pga_objective,
                             pga_optimize)
from cfmimo.montecarlo import (EXACT_CHECKS, MOMENT_CHECKS, McConfig,
                               empirical_moment, empirical_terms_multi)
from cfmimo.sedecode import closed_form_sinr, weights_for

DESK = dict(num_aps=20, antennas_per_ap=8, num_pilots=5, coherence_len=200)


def _report(num, name, passed, detail):
    print(f"{'PASS' if passed else 'FAIL'} criterion {num} ({name}): {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


def _grouping(scheme, cfg, beta, plan, powers, stats):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterations)
        return grouping_for_scheme(scheme, stats, beta, plan, powers,
                                   cfg.antennas_per_ap, q=0.9)


@pytest.fixture(scope="module")
def sweep100():
    """100 drops x T in {10, 20, 30}: groupings and SE for all four schemes."""
    mean_sum = {}
    t10 = {"ratio": [], "dominance": True, "zero_ls": {}}
    for ti, T in enumerate((10, 20, 30)):
        sums = {s: [] for s in ("gpfzf", "pfzf", "gpwpfzf", "pwpfzf")}
        for d in range(100):
            cfg = cf.ScenarioConfig(num_ues=T, seed=1000 * ti + d, **DESK)
            _, beta, plan, powers = cf.build_scenario(cfg)
            stats = cf.compute_stats(beta, plan, powers)
            for s in sums:
                grp = _grouping(s, cfg, beta, plan, powers, stats)
                w = weights_for("local", beta, stats, plan, powers, grp, 8)
                rep = closed_form_sinr(w, beta, stats, plan, powers, grp, 8,
                                       coherence_len=cfg.coherence_len)
                sums[s].append(rep.sum_se)
                if T == 10 and s in ("gpfzf", "gpwpfzf"):
                    t10["zero_ls"].setdefault(s, []).append(
                        bool((grp.strong_count == 0).any()))
                    wo = weights_for("olsfd", beta, stats, plan, powers, grp, 8)
                    wu = weights_for("uniform", beta, stats, plan, powers, grp, 8)
                    ro = closed_form_sinr(wo, beta, stats, plan, powers, grp, 8,
                                          coherence_len=cfg.coherence_len)
                    ru = closed_form_sinr(wu, beta, stats, plan, powers, grp, 8,
                                          coherence_len=cfg.coherence_len)
                    t10["ratio"].append(rep.sum_se / ro.sum_se)
                    dom = (np.all(ro.sinr >= rep.sinr * (1 - 1e-9))
                           and np.all(ro.sinr >= ru.sinr * (1 - 1e-9)))
                    t10["dominance"] &= bool(dom)
        for s, vals in sums.items():
            mean_sum[(T, s)] = float(np.mean(vals))
    return mean_sum, t10


def test_criterion_01_closed_form_fidelity():
    cfg = cf.ScenarioConfig(num_ues=10, seed=0, **DESK)
    _, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    t0 = time.time()
    cases, closed = [], []
    for s in ("gpfzf", "gpwpfzf"):
        grp = _grouping(s, cfg, beta, plan, powers, stats)
        wdict = {a: weights_for(a, beta, stats, plan, powers, grp, 8)
                 for a in ("local", "olsfd", "uniform")}
        cases.append((grp, wdict))
        closed.append({a: closed_form_sinr(w, beta, stats, plan, powers, grp,
                                           8, coherence_len=200).sinr
                       for a, w in wdict.items()})
    results = empirical_terms_multi(cfg, beta, stats, plan, powers, cases,
                                    McConfig(num_trials=2000, seed=0))
    worst = 0.0
    for res, cl in zip(results, closed):
        for arch in cl:
            worst = max(worst, float(np.max(np.abs(res[arch].sinr - cl[arch])
                                            / cl[arch])))
    dt = time.time() - t0
    _report(1, "closed-form fidelity", worst <= 0.05,
            f"worst SINR rel err {worst:.4f} <= 0.05 over 2 schemes x 3 "
            f"weightings x 10 UEs, 2000 trials, {dt:.0f}s")


def _moment_config(A, L_S):
    L_p = L_S + 3
    T = L_p + 1
    cfg = cf.ScenarioConfig(num_aps=1, antennas_per_ap=A, num_ues=T,
                            num_pilots=L_p, coherence_len=200, seed=0)
    _, beta, _, powers = cf.build_scenario(cfg)
    pilots = np.concatenate([[0], np.arange(L_p)])  # UE 0 and 1 share pilot 0
    plan = cf.PilotPlan(pilot_of_ue=pilots, num_pilots=L_p)
    stats = cf.compute_stats(beta, plan, powers)
    delta = np.zeros((1, L_p))
    delta[0, :L_S] = 1.0
    grp = cf.GroupingMatrix.from_delta(delta, "gpwpfzf")
    return cfg, plan, stats, grp


def _moment_picks(L_S):
    # UE u >= 1 sits alone on pilot u - 1
    strong_t, weak_t = 1, L_S + 1
    picks = {
        "zf_gram_inverse_diag": (strong_t, None),
        "zf_own_pilot_gain": (strong_t, None),
        "zf_strong_null": (strong_t if L_S >= 2 else None, 2),
        "zf_own_pilot_sq": (strong_t, None),
        "zf_weak_pilot_sq": (strong_t, weak_t),
        "mr_own_pilot_mean": (weak_t, None),
        "mr_other_pilot_mean": (weak_t, weak_t + 1),
        "mr_same_pilot_sq": (0, 1),
        "mr_other_pilot_sq": (weak_t, weak_t + 1),
        "pmr_own_pilot_mean": (weak_t, None),
        "pmr_strong_null": (weak_t, strong_t),
        "pmr_own_pilot_sq": (weak_t, None),
        "pmr_weak_pilot_sq": (weak_t, weak_t + 1),
    }
    if L_S == 0:
        for check in list(picks):
            if check.startswith("zf") or check == "pmr_strong_null":
                picks[check] = (None, None)
    return picks


def test_criterion_02_moment_catalog():
    # At L_S = A - 1 the inverse-gram diagonal is inverse-gamma with shape 2:
    # its mean exists but its variance does not, so the sample mean cannot hit
    # a fixed 3% band at 1e4 draws.  Those cells (and the weak-pilot square,
    # which scales with the same diagonal) get a 4-standard-error gate instead.
    heavy_tail = ("zf_gram_inverse_diag", "zf_weak_pilot_sq")
    worst_stat, worst_exact, ran, relaxed = 0.0, 0.0, 0, 0
    for A in (4, 8):
        for L_S in range(A):
            cfg, plan, stats, grp = _moment_config(A, L_S)
            for check, (t, k) in _moment_picks(L_S).items():
                if t is None:
                    continue
                res = empirical_moment(check, cfg, stats, plan, grp, 0, t, k,
                                       num_trials=10000, seed=A * 100 + L_S)
                ran += 1
                if check in EXACT_CHECKS:
                    worst_exact = max(worst_exact, res.max_dev)
                    assert res.max_dev <= 1e-9, (check, A, L_S, res.max_dev)
                elif res.target == 0.0:
                    assert abs(res.estimate) <= 4 * res.stderr, (check, A, L_S)
                elif A - L_S == 1 and check in heavy_tail:
                    relaxed += 1
                    dev = abs(res.estimate - res.target)
                    assert dev <= 4 * res.stderr, (check, A, L_S, dev, res.stderr)
                else:
                    worst_stat = max(worst_stat, res.rel_err)
                    assert res.rel_err <= 0.03, (check, A, L_S, res.rel_err)
    _report(2, "moment catalog", True,
            f"{ran} checks over A in {{4,8}}, L_S in 0..A-1; worst mean err "
            f"{worst_stat:.4f} <= 0.03, worst exact dev {worst_exact:.1e} <= "
            f"1e-9; {relaxed} infinite-variance cells (L_S = A-1) gated at "
            f"4*stderr instead")


def test_criterion_03_gradient_finite_difference():
    cfg = cf.ScenarioConfig(num_ues=10, seed=0, **DESK)
    _, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    rng = np.random.default_rng(0)
    h = 1e-6
    worst = 0.0
    for scheme in ("gpfzf", "gpwpfzf"):
        for _ in range(25):
            delta = rng.uniform(0.05, 0.95, size=plan.num_pilots)
            m = int(rng.integers(cfg.num_aps))
            args = (stats.gamma[m], beta[m], powers.p_data, plan.pilot_of_ue,
                    8, scheme)
            g = pga_gradient(delta, *args, chi=1.0)
            for i in range(delta.size):
                dp, dm = delta.copy(), delta.copy()
                dp[i] += h
                dm[i] -= h
                fd = (pga_objective(dp, *args, chi=1.0)
                      - pga_objective(dm, *args, chi=1.0)) / (2 * h)
                worst = max(worst, abs(g[i] - fd) / max(abs(fd), 1e-8))
    _report(3, "gradient correctness", worst <= 1e-5,
            f"worst rel err {worst:.2e} <= 1e-5 at 25 interior points/scheme")


def test_criterion_04_pga_near_optimality():
    hits = {s: 0 for s in ("gpfzf", "gpwpfzf")}
    for seed in range(100):
        cfg = cf.ScenarioConfig(num_aps=1, antennas_per_ap=8, num_ues=10,
                                num_pilots=4, coherence_len=200, seed=seed)
        _, beta, plan, powers = cf.build_scenario(cfg)
        stats = cf.compute_stats(beta, plan, powers)
        for s in hits:
            args = (stats.gamma[0], beta[0], powers.p_data, plan.pilot_of_ue,
                    8, s)
            best = max(pga_objective(np.array(b, dtype=float), *args, chi=1.0)
                       for b in itertools.product([0, 1], repeat=4))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MaxIterations)
                row, _ = pga_optimize(stats.gamma[0], beta[0], powers.p_data,
                                      plan.pilot_of_ue, 4, 8, s)
            if pga_objective(row, *args, chi=1.0) >= 0.98 * best:
                hits[s] += 1
    exact = 0
    for seed in range(100):
        cfg = cf.ScenarioConfig(num_aps=1, antennas_per_ap=8, num_ues=6,
                                num_pilots=1, coherence_len=200, seed=seed)
        _, beta, plan, powers = cf.build_scenario(cfg)
        stats = cf.compute_stats(beta, plan, powers)
        for s in ("gpfzf", "gpwpfzf"):
            args = (stats.gamma[0], beta[0], powers.p_data, plan.pilot_of_ue,
                    8, s)
            vals = [pga_objective(np.array([b]), *args, chi=1.0)
                    for b in (0.0, 1.0)]
            row, _ = pga_optimize(stats.gamma[0], beta[0], powers.p_data,
                                  plan.pilot_of_ue, 1, 8, s)
            exact += row[0] == float(np.argmax(vals))
    ok = all(h >= 90 for h in hits.values()) and exact == 200
    _report(4, "near-optimal grouping",
            ok, f"L_p=4: >=98% of exhaustive optimum in "
                f"{hits['gpfzf']}/100 (gpfzf) and {hits['gpwpfzf']}/100 "
                f"(gpwpfzf) drops (gate 90); L_p=1 exact {exact}/200")


def test_criterion_05_adaptive_beats_threshold(sweep100):
    mean_sum, _ = sweep100
    lines, ok = [], True
    for T in (10, 20, 30):
        g1 = 100 * (mean_sum[(T, "gpfzf")] / mean_sum[(T, "pfzf")] - 1)
        g2 = 100 * (mean_sum[(T, "gpwpfzf")] / mean_sum[(T, "pwpfzf")] - 1)
        ok &= g1 >= 0 and g2 >= 0
        lines.append(f"T={T}: +{g1:.1f}%/+{g2:.1f}%")
    _report(5, "adaptive grouping gain", ok,
            "mean sum SE gain over the q=0.9 threshold rule "
            "(gpfzf/gpwpfzf): " + ", ".join(lines))


def test_criterion_06_local_weight_gap(sweep100):
    _, t10 = sweep100
    worst = min(t10["ratio"])
    ok = worst >= 0.90 and t10["dominance"]
    _report(6, "decentralized weight gap", ok,
            f"local/olsfd sum SE ratio >= {worst:.3f} (gate 0.90) over 200 "
            f"drop-scheme pairs; per-UE olsfd dominance {t10['dominance']}")


def test_criterion_07_mr_fallback_frequency(sweep100):
    _, t10 = sweep100
    fr = {s: np.mean(v) for s, v in t10["zero_ls"].items()}
    ok = all(f >= 0.5 for f in fr.values())
    _report(7, "adaptive MR fallback", ok,
            f"drops with an all-weak AP at T=10: "
            f"{100 * fr['gpfzf']:.0f}% (gpfzf), "
            f"{100 * fr['gpwpfzf']:.0f}% (gpwpfzf); gate 50%")


def test_criterion_08_cost_spot_values():
    from cfmimo.costs import combining_costs, decoding_costs
    o = decoding_costs(2, 3, 96.5, "olsfd").fronthaul
    l = decoding_costs(2, 3, 96.5, "local").fronthaul
    c_thr = combining_costs(8, 7, 2, 10, "pfzf")
    c_ada = combining_costs(8, 7, 2, 10, "gpfzf")
    ok = (o, l, c_thr, c_ada) == (203.0, 193.0, 138.0, 114.0)
    _report(8, "cost model spot values", ok,
            f"fronthaul 203/193, combining 138/114 -> got "
            f"{o:g}/{l:g}, {c_thr:g}/{c_ada:g}")


def test_criterion_09_reduction_identities():
    cfg = cf.ScenarioConfig(num_ues=10, seed=0, **DESK)
    _, beta, plan, powers = cf.build_scenario(cfg)
    stats = cf.compute_stats(beta, plan, powers)
    ones = all_fzf_grouping(cfg.num_aps, plan.num_pilots, 8).delta
    g1 = cf.GroupingMatrix.from_delta(ones, "gpfzf")
    g2 = cf.GroupingMatrix.from_delta(ones, "gpwpfzf")
    w = weights_for("local", beta, stats, plan, powers, g1, 8)
    r1 = closed_form_sinr(w, beta, stats, plan, powers, g1, 8, coherence_len=200)
    r2 = closed_form_sinr(w, beta, stats, plan, powers, g2, 8, coherence_len=200)
    dev_strong = float(np.max(np.abs(r1.sinr - r2.sinr) / r1.sinr))

    from cfmimo.experiments import _classic_mr_sinr
    zeros = all_mr_grouping(cfg.num_aps, plan.num_pilots).delta
    gmr = cf.GroupingMatrix.from_delta(zeros, "gpfzf")
    a = weights_for("local", beta, stats, plan, powers, gmr, 8)
    rep = closed_form_sinr(a, beta, stats, plan, powers, gmr, 8,
                           coherence_len=200)
    ref = _classic_mr_sinr(a, beta, stats, plan, powers, 8)
    dev_weak = float(np.max(np.abs(rep.sinr - ref) / ref))
    ok = dev_strong <= 1e-12 and dev_weak <= 1e-12
    _report(9, "degenerate grouping identities", ok,
            f"all-strong scheme deviation {dev_strong:.1e}, all-weak vs "
            f"classical MR {dev_weak:.1e} (gate 1e-12)")


def test_criterion_10_deterministic_outputs(tmp_path):
    scen = tmp_path / "scen.txt"
    scen.write_text("num_aps = 4\nantennas_per_ap = 8\nnum_ues = 8\n"
                    "num_pilots = 4\nseed = 5\n")
    exp = tmp_path / "exp.txt"
    exp.write_text("sweep = num_ues\nsweep_values = 6, 8\n"
                   "schemes = gpfzf, pfzf, mr\narchitectures = local\n"
                   "drops = 2\noutputs = sum_se, per_user_cdf, "
                   "strong_pilot_histogram, costs\n")
    texts = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", "--scenario", str(scen), "--experiment", str(exp),
                     "--out", str(out)]) == 0
        texts.append({k: (out / f"{k}.csv").read_text()
                      for k in ("sum_se", "per_user_cdf",
                                "strong_pilot_histogram", "costs")})
    ok = texts[0] == texts[1]
    _report(10, "deterministic outputs", ok,
            "repeated run with the same seed produced byte-identical CSVs")
