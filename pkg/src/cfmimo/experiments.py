"""Experiment sweeps, output files, and the validation battery.

run_experiment drives drops x sweep values x schemes x architectures and
writes one CSV per requested output kind (plus a JSON mirror of the same
rows).  Files are byte-identical across reruns with the same spec and seed.

validate runs the self-check battery: combiner moment catalog, closed-form
SINR vs Monte Carlo, optimizer gradients vs finite differences, scheme
reduction identities, and cost spot values.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import costs as costs_mod
from .chanstats import compute_stats
from .grouping import GroupingMatrix, PgaConfig, all_fzf_grouping, \
    all_mr_grouping, grouping_for_scheme, pga_gradient, pga_objective, scheme_id
from .montecarlo import EXACT_CHECKS, McConfig, MOMENT_CHECKS, \
    empirical_moment, empirical_terms_multi
from .scenario import STREAM_POSITIONS, STREAM_SHADOWING, ScenarioConfig, \
    assign_pilots, compute_lsfc, compute_powers, drop_network, parse_kv_file, \
    substream, with_overrides
from .sedecode import closed_form_sinr, weights_for

SWEEPS = ("num_ues", "num_pilots", "antennas", "none")
_SWEEP_FIELD = {"num_ues": "num_ues", "num_pilots": "num_pilots",
                "antennas": "antennas_per_ap"}
OUTPUT_KINDS = ("sum_se", "per_user_cdf", "strong_pilot_histogram", "costs",
                "mc_validation")

# What each figure family needs from an experiment run.
FIGURE_FAMILIES = {
    "decoding_cost_curves": "costs",
    "combining_cost_curves": "costs",
    "se_vs_load_curves": "sum_se",
    "per_user_se_distribution": "per_user_cdf",
    "strong_set_size_distribution": "strong_pilot_histogram",
    "closed_form_agreement": "mc_validation",
}

CSV_VERSION = "cfmimo csv v1"


@dataclass
class ExperimentSpec:
    sweep: str = "none"
    sweep_values: list = field(default_factory=list)
    schemes: list = field(default_factory=lambda: ["gpfzf"])
    architectures: list = field(default_factory=lambda: ["local"])
    drops: int = 100
    outputs: list = field(default_factory=lambda: ["sum_se"])
    q_threshold: float = 0.9
    mc_trials: int = 500

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.sweep != "none" and not self.sweep_values:
            raise ValueError("sweep_values required when sweeping")
        for s in self.schemes:
            scheme_id(s)  # validates
        for arch in self.architectures:
            if arch not in ("local", "olsfd", "uniform"):
                raise ValueError(f"unknown architecture {arch!r}")
        for out in self.outputs:
            if out not in OUTPUT_KINDS:
                raise ValueError(f"unknown output kind {out!r}")
        if self.drops < 1:
            raise ValueError("drops must be >= 1")


def load_experiment(path):
    """Experiment file: same key = value format as scenarios; lists use commas."""
    raw = parse_kv_file(path)
    kwargs = {}
    for key, val in raw.items():
        if key in ("sweep",):
            kwargs[key] = val
        elif key in ("sweep_values",):
            kwargs[key] = [int(v) for v in val.split(",") if v.strip()]
        elif key in ("schemes", "architectures", "outputs"):
            kwargs[key] = [v.strip() for v in val.split(",") if v.strip()]
        elif key in ("drops", "mc_trials"):
            kwargs[key] = int(val)
        elif key in ("q_threshold",):
            kwargs[key] = float(val)
        else:
            raise ValueError(f"unknown experiment key {key!r}")
    return ExperimentSpec(**kwargs)


# --- output files ------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % float(x)
    return str(x)


def write_csv(path, kind, columns, rows):
    lines = [f"# {CSV_VERSION} kind={kind}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, kind, rows):
    doc = {"format": CSV_VERSION.replace("csv", "json"), "kind": kind, "rows": rows}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _emit(out_dir, kind, columns, rows):
    write_csv(os.path.join(out_dir, f"{kind}.csv"), kind, columns, rows)
    write_json(os.path.join(out_dir, f"{kind}.json"), kind, rows)


# --- the sweep driver --------------------------------------------------------


def _scenario_for(cfg, vi, drop_idx):
    """Deterministic scenario draw for one (sweep value, drop) cell."""
    rng_pos = substream(cfg.seed, STREAM_POSITIONS, vi, drop_idx)
    rng_sh = substream(cfg.seed, STREAM_SHADOWING, vi, drop_idx)
    drop = drop_network(cfg, rng_pos)
    beta = compute_lsfc(cfg, drop, rng_sh)
    plan = assign_pilots(cfg, beta)
    powers = compute_powers(cfg)
    stats = compute_stats(beta, plan, powers)
    return beta, plan, powers, stats


def run_experiment(cfg, spec, out_dir, pga_cfg=None, mc_cfg=None):
    """Run the sweep and write every requested output into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    pga_cfg = pga_cfg or PgaConfig()
    values = spec.sweep_values if spec.sweep != "none" else [None]

    sum_rows, cdf_rows, hist_rows, cost_rows = [], [], [], []
    for vi, value in enumerate(values):
        cfg_v = cfg if value is None else with_overrides(
            cfg, **{_SWEEP_FIELD[spec.sweep]: int(value)})
        label = value if value is not None else ""
        A = cfg_v.antennas_per_ap
        sums = {(s, a): [] for s in spec.schemes for a in spec.architectures}
        pooled = {(s, a): [] for s in spec.schemes for a in spec.architectures}
        hist = {s: np.zeros(cfg_v.num_pilots + 1, dtype=np.int64) for s in spec.schemes}
        comb_cost = {s: [] for s in spec.schemes}
        for d in range(spec.drops):
            beta, plan, powers, stats = _scenario_for(cfg_v, vi, d)
            for s in spec.schemes:
                grp = grouping_for_scheme(s, stats, beta, plan, powers, A,
                                          q=spec.q_threshold, pga_cfg=pga_cfg)
                hist[s] += np.bincount(grp.strong_count,
                                       minlength=cfg_v.num_pilots + 1)
                if s != "mr":
                    comb_cost[s].extend(
                        costs_mod.combining_costs(A, cfg_v.num_pilots, ls,
                                                  cfg_v.num_ues, _cost_scheme(s))
                        for ls in grp.strong_count)
                for arch in spec.architectures:
                    w = weights_for(arch, beta, stats, plan, powers, grp, A)
                    rep = closed_form_sinr(w, beta, stats, plan, powers, grp, A,
                                           coherence_len=cfg_v.coherence_len)
                    sums[(s, arch)].append(rep.sum_se)
                    pooled[(s, arch)].append(rep.se)
        for s in spec.schemes:
            for arch in spec.architectures:
                vals = np.array(sums[(s, arch)])
                sum_rows.append({
                    "sweep": spec.sweep, "value": label, "scheme": s,
                    "architecture": arch, "drops": spec.drops,
                    "mean_sum_se": vals.mean(),
                    "std_sum_se": vals.std(ddof=1) if len(vals) > 1 else 0.0})
                se = np.concatenate(pooled[(s, arch)])
                qs = np.percentile(se, [5, 10, 25, 50, 75, 90, 95])
                cdf_rows.append({
                    "sweep": spec.sweep, "value": label, "scheme": s,
                    "architecture": arch, "num_samples": se.size,
                    "se_p05": qs[0], "se_p10": qs[1], "se_p25": qs[2],
                    "se_p50": qs[3], "se_p75": qs[4], "se_p90": qs[5],
                    "se_p95": qs[6], "ninety_pct_likely": qs[1]})
            for ls, count in enumerate(hist[s]):
                if count:
                    hist_rows.append({
                        "sweep": spec.sweep, "value": label, "scheme": s,
                        "num_strong": ls, "ap_count": int(count)})
        l_u = costs_mod.uplink_symbols(cfg_v.coherence_len, cfg_v.num_pilots)
        for arch in ("olsfd", "local"):
            rep = costs_mod.decoding_costs(cfg_v.num_aps, cfg_v.num_ues, l_u, arch)
            cost_rows.append({
                "kind": "decoding", "sweep": spec.sweep, "value": label,
                "name": arch, "mean_num_strong": "",
                "fronthaul": rep.fronthaul, "compute": rep.weight_compute})
        for s in spec.schemes:
            if s == "mr" or not comb_cost[s]:
                continue
            strong_counts = np.repeat(np.arange(hist[s].size), hist[s])
            cost_rows.append({
                "kind": "combining", "sweep": spec.sweep, "value": label,
                "name": s, "mean_num_strong": float(strong_counts.mean()),
                "fronthaul": "", "compute": float(np.mean(comb_cost[s]))})

    if "sum_se" in spec.outputs:
        _emit(out_dir, "sum_se",
              ["sweep", "value", "scheme", "architecture", "drops",
               "mean_sum_se", "std_sum_se"], sum_rows)
    if "per_user_cdf" in spec.outputs:
        _emit(out_dir, "per_user_cdf",
              ["sweep", "value", "scheme", "architecture", "num_samples",
               "se_p05", "se_p10", "se_p25", "se_p50", "se_p75", "se_p90",
               "se_p95", "ninety_pct_likely"], cdf_rows)
    if "strong_pilot_histogram" in spec.outputs:
        _emit(out_dir, "strong_pilot_histogram",
              ["sweep", "value", "scheme", "num_strong", "ap_count"], hist_rows)
    if "costs" in spec.outputs:
        _emit(out_dir, "costs",
              ["kind", "sweep", "value", "name", "mean_num_strong", "fronthaul",
               "compute"], cost_rows)
    if "mc_validation" in spec.outputs:
        rows = _mc_validation_rows(cfg, spec, pga_cfg, mc_cfg)
        _emit(out_dir, "mc_validation",
              ["scheme", "architecture", "ue", "sinr_closed", "sinr_mc",
               "rel_err", "passed"], rows)
    return out_dir


def _cost_scheme(scheme):
    return {"fzf": "gpfzf"}.get(scheme, scheme)


def _mc_validation_rows(cfg, spec, pga_cfg, mc_cfg, tol=0.05):
    mc = mc_cfg or McConfig(num_trials=spec.mc_trials, seed=cfg.seed)
    beta, plan, powers, stats = _scenario_for(cfg, 0, 0)
    A = cfg.antennas_per_ap
    cases, reports = [], []
    for s in spec.schemes:
        grp = grouping_for_scheme(s, stats, beta, plan, powers, A,
                                  q=spec.q_threshold, pga_cfg=pga_cfg)
        wdict = {arch: weights_for(arch, beta, stats, plan, powers, grp, A)
                 for arch in spec.architectures}
        cases.append((grp, wdict))
        reports.append({arch: closed_form_sinr(w, beta, stats, plan, powers, grp,
                                               A, coherence_len=cfg.coherence_len)
                        for arch, w in wdict.items()})
    results = empirical_terms_multi(cfg, beta, stats, plan, powers, cases, mc)
    rows = []
    for s, res, reps in zip(spec.schemes, results, reports):
        for arch in spec.architectures:
            closed = reps[arch].sinr
            emp = res[arch].sinr
            rel = np.abs(emp - closed) / closed
            for t in range(cfg.num_ues):
                rows.append({"scheme": s, "architecture": arch, "ue": t,
                             "sinr_closed": closed[t], "sinr_mc": emp[t],
                             "rel_err": rel[t], "passed": bool(rel[t] <= tol)})
    return rows


# --- validation battery ------------------------------------------------------


def _check_grouping(cfg, plan):
    """A grouping with strong, weak-with-UE, and spare pilots for the catalog."""
    L_p, A = plan.num_pilots, cfg.antennas_per_ap
    L_S = max(1, min(L_p - 1, A - 2))
    delta = np.zeros((cfg.num_aps, L_p))
    delta[:, :L_S] = 1.0
    return GroupingMatrix.from_delta(delta, "gpwpfzf"), L_S


def validate(cfg, mc_trials=2000, moment_trials=10000, seed=0, pga_cfg=None):
    """Run the self-check battery; returns (list of row dicts, all_passed)."""
    rows = []

    def record(name, passed, detail):
        rows.append({"check": name, "passed": bool(passed), "detail": detail})

    beta, plan, powers, stats = _scenario_for(cfg, 0, 0)
    A = cfg.antennas_per_ap
    grp, L_S = _check_grouping(cfg, plan)

    # pick UEs for the catalog: t on a strong pilot, k_strong on another
    # strong pilot, k_weak on a weak pilot, k_same sharing t's pilot
    pilot = plan.pilot_of_ue
    t = int(np.flatnonzero(pilot == 0)[0])
    k_strong = None
    if L_S >= 2:
        cand = np.flatnonzero(pilot == 1)
        k_strong = int(cand[0]) if len(cand) else None
    weak_cand = np.flatnonzero(pilot >= L_S)
    k_weak = int(weak_cand[0]) if len(weak_cand) else None
    same_cand = np.flatnonzero(pilot == 0)
    k_same = int(same_cand[1]) if len(same_cand) > 1 else None
    weak_t = k_weak

    picks = {
        "zf_gram_inverse_diag": (t, None),
        "zf_own_pilot_gain": (t, None),
        "zf_strong_null": (t, k_strong),
        "zf_own_pilot_sq": (t, None),
        "zf_weak_pilot_sq": (t, k_weak),
        "mr_own_pilot_mean": (t, None),
        "mr_other_pilot_mean": (t, k_weak),
        "mr_same_pilot_sq": (t, k_same),
        "mr_other_pilot_sq": (t, k_weak),
        "pmr_own_pilot_mean": (weak_t, None),
        "pmr_strong_null": (weak_t, t),
        "pmr_own_pilot_sq": (weak_t, None),
        "pmr_weak_pilot_sq": (weak_t, None),
    }
    if k_weak is not None:
        others = np.flatnonzero((pilot >= L_S) & (pilot != pilot[k_weak]))
        picks["pmr_weak_pilot_sq"] = (weak_t, int(others[0]) if len(others) else None)

    for check in MOMENT_CHECKS:
        tt, kk = picks[check]
        if tt is None or (_needs_k(check) and kk is None):
            record(f"moment/{check}", True, "skipped: no suitable UE pair")
            continue
        res = empirical_moment(check, cfg, stats, plan, grp, 0, tt, kk,
                               num_trials=moment_trials, seed=seed)
        if check in EXACT_CHECKS:
            ok = res.max_dev <= 1e-9
            record(f"moment/{check}", ok, f"max_dev={res.max_dev:.3e}")
        else:
            ok = res.rel_err <= 0.03 or (res.target == 0.0 and
                                         abs(res.estimate) <= 4 * res.stderr)
            record(f"moment/{check}", ok,
                   f"est={res.estimate:.6g} target={res.target:.6g} "
                   f"rel={res.rel_err:.4f}")

    # closed form vs Monte Carlo for every scheme/architecture pair
    spec = ExperimentSpec(schemes=["gpfzf", "gpwpfzf"],
                          architectures=["local", "olsfd", "uniform"],
                          drops=1, outputs=["sum_se"], mc_trials=mc_trials)
    rows_mc = _mc_validation_rows(cfg, spec, pga_cfg, None)
    worst = max(r["rel_err"] for r in rows_mc)
    record("closed_form_vs_mc", all(r["passed"] for r in rows_mc),
           f"worst rel err {worst:.4f} over {len(rows_mc)} cases")

    # gradients against central finite differences
    worst = _gradient_fd_worst(stats, beta, plan, powers, A, seed=seed)
    record("pga_gradient_fd", worst <= 1e-5, f"worst rel err {worst:.3e}")

    # reduction identities
    dev_fzf, dev_mr = _reduction_deviations(cfg, beta, plan, powers, stats)
    record("reduction_all_strong", dev_fzf <= 1e-12, f"max dev {dev_fzf:.3e}")
    record("reduction_all_weak", dev_mr <= 1e-12, f"max dev {dev_mr:.3e}")

    # cost spot values, verified by hand
    d_o = costs_mod.decoding_costs(2, 3, 96.5, "olsfd")
    d_l = costs_mod.decoding_costs(2, 3, 96.5, "local")
    ok_dec = d_o.fronthaul == 203.0 and d_l.fronthaul == 193.0
    c_p = costs_mod.combining_costs(8, 7, 2, 10, "pfzf")
    c_g = costs_mod.combining_costs(8, 7, 2, 10, "gpfzf")
    ok_comb = c_p == 138.0 and c_g == 114.0
    record("cost_spot_values", ok_dec and ok_comb,
           f"olsfd_fh={d_o.fronthaul} local_fh={d_l.fronthaul} "
           f"pfzf={c_p} gpfzf={c_g}")

    return rows, all(r["passed"] for r in rows)


def _needs_k(check):
    return check in ("zf_strong_null", "zf_weak_pilot_sq", "mr_other_pilot_mean",
                     "mr_same_pilot_sq", "mr_other_pilot_sq", "pmr_strong_null",
                     "pmr_weak_pilot_sq")


def _gradient_fd_worst(stats, beta, plan, powers, antennas, seed=0, points=20,
                       h=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for scheme in ("gpfzf", "gpwpfzf"):
        for _ in range(points):
            delta = rng.uniform(0.05, 0.95, size=plan.num_pilots)
            m = int(rng.integers(beta.shape[0]))
            args = (stats.gamma[m], beta[m], powers.p_data, plan.pilot_of_ue,
                    antennas, scheme)
            g = pga_gradient(delta, *args, chi=1.0)
            fd = np.empty_like(g)
            for i in range(delta.size):
                dp, dm = delta.copy(), delta.copy()
                dp[i] += h
                dm[i] -= h
                fd[i] = (pga_objective(dp, *args, chi=1.0)
                         - pga_objective(dm, *args, chi=1.0)) / (2 * h)
            scale = np.maximum(np.abs(fd), 1e-8 * np.max(np.abs(fd)))
            worst = max(worst, float(np.max(np.abs(g - fd) / scale)))
    return worst


def _reduction_deviations(cfg, beta, plan, powers, stats):
    """Deviations for the all-strong and all-weak degenerate groupings."""
    A = cfg.antennas_per_ap
    M, T = beta.shape
    L_p = plan.num_pilots
    dev_fzf = np.inf
    if L_p <= A - 1:
        ones = all_fzf_grouping(M, L_p, A)
        g_pf = GroupingMatrix.from_delta(ones.delta, "gpfzf")
        g_pw = GroupingMatrix.from_delta(ones.delta, "gpwpfzf")
        w = weights_for("local", beta, stats, plan, powers, g_pf, A)
        r1 = closed_form_sinr(w, beta, stats, plan, powers, g_pf, A,
                              coherence_len=cfg.coherence_len)
        r2 = closed_form_sinr(w, beta, stats, plan, powers, g_pw, A,
                              coherence_len=cfg.coherence_len)
        dev_fzf = float(np.max(np.abs(r1.sinr - r2.sinr) / r1.sinr))
    zeros = all_mr_grouping(M, L_p)
    g_mr = GroupingMatrix.from_delta(zeros.delta, "gpfzf")
    w = weights_for("local", beta, stats, plan, powers, g_mr, A)
    rep = closed_form_sinr(w, beta, stats, plan, powers, g_mr, A,
                           coherence_len=cfg.coherence_len)
    ref = _classic_mr_sinr(w, beta, stats, plan, powers, A)
    dev_mr = float(np.max(np.abs(rep.sinr - ref) / ref))
    return dev_fzf, dev_mr


def _classic_mr_sinr(a, beta, stats, plan, powers, antennas):
    """Independent MR closed form: full array gain, no estimate subtraction."""
    p = powers.p_data
    b = np.sqrt(antennas * stats.gamma)
    cross = a.T @ b
    resid = (a**2).T @ beta
    T = beta.shape[1]
    same = plan.pilot_of_ue[:, None] == plan.pilot_of_ue[None, :]
    eye = np.eye(T, dtype=bool)
    ds = p * np.diag(cross) ** 2
    den = (p * np.diag(resid)
           + ((cross**2 + resid) * p[None, :] * (same & ~eye)).sum(axis=1)
           + (resid * p[None, :] * ~same).sum(axis=1)
           + (a**2).sum(axis=0))
    return ds / den


def default_desk_config(seed=0):
    """Small scenario for quick validation runs."""
    return ScenarioConfig(num_aps=20, antennas_per_ap=8, num_ues=10,
                          num_pilots=5, coherence_len=200, seed=seed)
