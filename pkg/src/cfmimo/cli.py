"""Command line interface: run experiment sweeps, validate, tabulate costs."""

import argparse
import os
import sys

import numpy as np

from . import costs as costs_mod
from .experiments import ExperimentSpec, OUTPUT_KINDS, default_desk_config, \
    load_experiment, run_experiment, validate, write_csv, write_json
from .grouping import SCHEMES, PgaConfig
from .montecarlo import McConfig
from .scenario import ScenarioConfig, load_scenario, with_overrides


def _load_cfg(path, seed=None):
    if path is None:
        cfg, extras = default_desk_config(), {}
    else:
        cfg, extras = load_scenario(path)
    if seed is not None:
        cfg = with_overrides(cfg, seed=seed)
    return cfg, PgaConfig.from_extras(extras)


def _cmd_run(args):
    cfg, pga_cfg = _load_cfg(args.scenario, args.seed)
    spec = load_experiment(args.experiment) if args.experiment else ExperimentSpec()
    if args.drops is not None:
        spec.drops = args.drops
    if args.grouping is not None:
        spec.schemes = [args.grouping]
    if args.mc_trials is not None:
        spec.mc_trials = args.mc_trials
    mc_cfg = None
    if "mc_validation" in spec.outputs:
        mc_cfg = McConfig(num_trials=spec.mc_trials, seed=cfg.seed,
                          report_ci=args.mc_report == "ci")
    run_experiment(cfg, spec, args.out, pga_cfg=pga_cfg, mc_cfg=mc_cfg)
    if args.dump_stats:
        _dump_stats(cfg, args.out)
    print(f"wrote outputs to {args.out}")
    return 0


def _dump_stats(cfg, out_dir):
    from .experiments import _scenario_for

    beta, plan, powers, stats = _scenario_for(cfg, 0, 0)
    rows = [{"ap": m, "ue": t, "beta": beta[m, t], "gamma": stats.gamma[m, t],
             "pilot": int(plan.pilot_of_ue[t])}
            for m in range(beta.shape[0]) for t in range(beta.shape[1])]
    write_csv(os.path.join(out_dir, "gamma.csv"), "gamma",
              ["ap", "ue", "beta", "gamma", "pilot"], rows)
    rows = [{"ap": m, "pilot": i, "theta": stats.theta[m, i]}
            for m in range(stats.theta.shape[0])
            for i in range(stats.theta.shape[1])]
    write_csv(os.path.join(out_dir, "theta.csv"), "theta",
              ["ap", "pilot", "theta"], rows)


def _cmd_validate(args):
    cfg, pga_cfg = _load_cfg(args.scenario, args.seed)
    rows, ok = validate(cfg, mc_trials=args.mc_trials,
                        moment_trials=args.moment_trials, seed=cfg.seed,
                        pga_cfg=pga_cfg)
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']:32s} {r['detail']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(os.path.join(args.out, "validation.csv"), "validation",
                  ["check", "passed", "detail"], rows)
        write_json(os.path.join(args.out, "validation.json"), "validation", rows)
    print(f"{'all checks passed' if ok else 'SOME CHECKS FAILED'}")
    return 0 if ok else 1


def _cmd_costs(args):
    cfg, _ = _load_cfg(args.scenario, None)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    field = {"num_ues": "num_ues", "num_pilots": "num_pilots",
             "antennas": "antennas_per_ap"}[args.sweep]
    rows = []
    for value in values:
        cfg_v = with_overrides(cfg, **{field: value})
        l_u = costs_mod.uplink_symbols(cfg_v.coherence_len, cfg_v.num_pilots)
        for arch in costs_mod.ARCHITECTURES:
            rep = costs_mod.decoding_costs(cfg_v.num_aps, cfg_v.num_ues, l_u, arch)
            rows.append({"kind": "decoding", "sweep": args.sweep, "value": value,
                         "name": arch, "num_strong": "",
                         "fronthaul": rep.fronthaul, "compute": rep.weight_compute})
        max_ls = min(cfg_v.num_pilots, cfg_v.antennas_per_ap - 1)
        for scheme in ("pfzf", "gpfzf", "pwpfzf", "gpwpfzf"):
            for ls in range(max_ls + 1):
                rows.append({
                    "kind": "combining", "sweep": args.sweep, "value": value,
                    "name": scheme, "num_strong": ls, "fronthaul": "",
                    "compute": costs_mod.combining_costs(
                        cfg_v.antennas_per_ap, cfg_v.num_pilots, ls,
                        cfg_v.num_ues, scheme)})
    os.makedirs(args.out, exist_ok=True)
    columns = ["kind", "sweep", "value", "name", "num_strong", "fronthaul",
               "compute"]
    write_csv(os.path.join(args.out, "costs.csv"), "costs", columns, rows)
    write_json(os.path.join(args.out, "costs.json"), "costs", rows)
    print(f"wrote {os.path.join(args.out, 'costs.csv')}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cfmimo",
                                description="cell-free massive MIMO uplink sims")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run an experiment sweep")
    pr.add_argument("--scenario", help="scenario config file (key = value)")
    pr.add_argument("--experiment", help="experiment spec file (key = value)")
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--drops", type=int, default=None)
    pr.add_argument("--grouping", choices=SCHEMES,
                    help="restrict the run to one scheme")
    pr.add_argument("--mc-trials", type=int, default=None)
    pr.add_argument("--mc-report", choices=["mean", "ci"], default="mean")
    pr.add_argument("--dump-stats", action="store_true",
                    help="also write per-link gamma/theta tables")
    pr.set_defaults(func=_cmd_run)

    pv = sub.add_parser("validate", help="run the self-check battery")
    pv.add_argument("--scenario", help="scenario config file")
    pv.add_argument("--seed", type=int, default=None)
    pv.add_argument("--mc-trials", type=int, default=2000)
    pv.add_argument("--moment-trials", type=int, default=10000)
    pv.add_argument("--out", help="also write validation.csv/json here")
    pv.set_defaults(func=_cmd_validate)

    pc = sub.add_parser("costs", help="tabulate fronthaul/compute costs")
    pc.add_argument("--sweep", required=True,
                    choices=["num_ues", "num_pilots", "antennas"])
    pc.add_argument("--values", required=True, help="comma-separated ints")
    pc.add_argument("--scenario", help="scenario config file for fixed params")
    pc.add_argument("--out", default=".", help="output directory")
    pc.set_defaults(func=_cmd_costs)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
