"""Command-line entry point ``cnspe``.

Exit status is 0 iff every requested verdict passes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .checks import run_suite
from .harness import (doping_from_config, load_config, params_from_config, plan_from_config,
                      scenario_data, solver_config_from, sweep)
from .model import make_grid
from .solver import run


def _write_snapshots(path: Path, rec) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "rho", "u", "phir", "phi"])
        for k in range(rec.n_snapshots):
            s = rec.state(k)
            f = rec.fields[k]
            for row in zip(rec.grid.r, s.rho, s.u, f.phir, f.phi):
                w.writerow([repr(float(s.t))] + [repr(float(x)) for x in row])


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    grid = make_grid(params, int(cfg.get("n_cells", 512)))
    init, dop = scenario_data(cfg.get("scenario", "gaussian-bump"), params, grid)
    override = doping_from_config(cfg, params)
    if override is not None:
        dop = override
    rec = run(init, dop, solver_config_from(cfg), params, grid)
    run_id = args.id or cfg.get("run_id") or Path(args.config).stem
    out = Path(args.out) / "runs" / run_id
    out.mkdir(parents=True, exist_ok=True)
    _write_snapshots(out / "snapshots.csv", rec)
    d = diag.collect(rec, params)
    d.to_csv(out / "diagnostics.csv")
    d.verdicts_json(out / "verdicts.json")
    (out / "report.json").write_text(json.dumps(
        {"summary": rec.summary(), "initial_data": {"E0": init.E0, "E1": init.E1,
                                                    "E2": init.E2, "E3": init.E3}},
        indent=2, sort_keys=True, default=diag._jsonable))
    ok = d.all_pass
    print(f"run {run_id}: {'PASS' if ok else 'FAIL'} -> {out}")
    for k, v in d.verdicts.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    plan = plan_from_config(cfg, args.axis)
    if args.workers:
        plan.max_workers = args.workers
    rep = sweep(plan)
    run_id = args.id or f"{Path(args.config).stem}-{args.axis}"
    path = rep.write(Path(args.out) / "runs" / run_id / "report.json")
    ok = all(rep.verdicts.values())
    print(f"sweep {run_id} along {args.axis}: {'PASS' if ok else 'FAIL'} -> {path}")
    for k, v in rep.verdicts.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}")
    return 0 if ok else 1


def cmd_check(args) -> int:
    res = run_suite(args.suite, quick=args.quick)
    ok = True
    for name, (passed, detail) in res.items():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return 0 if ok else 1


def cmd_plot(args) -> int:
    base = Path(args.out) / "runs" / args.run
    if args.what in ("energy", "bd"):
        src = base / "diagnostics.csv"
        data = np.genfromtxt(src, delimiter=",", names=True)
        col = "energy" if args.what == "energy" else "bd_entropy"
        x, y = data["t"], data[col]
    else:
        data = np.genfromtxt(base / "snapshots.csv", delimiter=",", names=True)
        last = data["t"] == data["t"].max()
        x, y = data["r"][last], data["rho"][last]
        col = "rho"
    dest = base / f"plot_{args.what}.dat"
    np.savetxt(dest, np.column_stack([x, y]), header=f"{'t' if args.what != 'profile' else 'r'} {col}")
    print(dest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cnspe", description=__doc__)
    ap.add_argument("--out", default=".", help="output root (default: current directory)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one scenario from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--id")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="parameter ladder along one axis")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=["b", "delta", "eps"])
    s.add_argument("--id")
    s.add_argument("--workers", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="built-in verification suites")
    c.add_argument("--suite", default="all", choices=["energy", "bd", "entropy", "limits", "all"])
    c.add_argument("--quick", action="store_true", help="coarser grids")
    c.set_defaults(func=cmd_check)

    p = sub.add_parser("plot", help="two-column data for plotting")
    p.add_argument("--run", required=True)
    p.add_argument("--what", required=True, choices=["energy", "bd", "profile"])
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
