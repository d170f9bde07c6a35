"""Command line entry point: ``toricnqs {train,ed,sweep,analyze,check}``.

Exit status is 0 on success, 1 for invalid input (bad flags, malformed config,
failed checks) and 2 when training aborts numerically.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import InvalidArgument, NumericalAbort, ToricNQSError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    p = _Parser(prog="toricnqs", description="Neural quantum states for the mixed-field toric code.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(name, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("config_path", nargs="?", metavar="config")
        sp.add_argument("--config", dest="config_flag", metavar="PATH")
        sp.add_argument("--seed", type=_u64)
        sp.add_argument("--out", metavar="DIR")
        return sp

    t = with_config("train", "train a network")
    t.add_argument("--resume", metavar="CHECKPOINT")
    t.add_argument("--max-iters", type=_positive)
    t.add_argument("--quiet", action="store_true")
    with_config("ed", "exact diagonalization for the configured lattice and field")
    s = with_config("sweep", "field sweep emitting a CSV table")
    s.add_argument("--max-iters", type=_positive)

    a = sub.add_parser("analyze", help="derivative peaks and finite-size extrapolation")
    a.add_argument("csv", nargs="+")
    a.add_argument("--mode", choices=("max", "min", "abs"), default="abs")
    a.add_argument("--exponent", type=float, default=None,
                   help="fixed exponent for the extrapolation (used automatically with two sizes)")
    a.add_argument("--out", metavar="PATH", help="write the results as JSON")

    c = sub.add_parser("check", help="run the built-in property checks")
    c.add_argument("--seed", type=_u64, default=0)
    return p


def _config(args):
    from .harness import load_config

    path = args.config_flag or args.config_path
    if path is None:
        raise InvalidArgument("a config file is required (positional or --config)")
    return load_config(path, seed=args.seed, out_dir=args.out)


def cmd_train(args):
    from .harness import run_training

    cfg = _config(args)

    def progress(e):
        if not args.quiet and e["iteration"] % 50 == 0:
            rel = f"  rel_err {e['relative_error']:.3e}" if "relative_error" in e else ""
            print(f"[{e['phase']}] iter {e['iteration']:5d}  E {e['energy']:.10f} +- {e['stderr']:.2e}{rel}", flush=True)

    rec = run_training(cfg, resume=args.resume, max_iters=args.max_iters, progress=progress)
    f = rec.final
    if "energy" in f:
        print(f"final energy {f['energy']:.12f} +- {f['stderr']:.2e}  density {f['density']:.12f}")
    if "relative_error" in f:
        print(f"relative error vs ED {f['relative_error']:.3e}")
    if cfg.out_dir:
        print(f"run log: {os.path.join(cfg.out_dir, 'run.jsonl')}")
    return EXIT_OK


def cmd_ed(args):
    from .harness import exact_observables

    cfg = _config(args)
    res = exact_observables(cfg)
    text = json.dumps(res, indent=2)
    print(text)
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, "ed.json"), "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def sweep_values(sweep):
    if "values" in sweep:
        vals = [float(v) for v in sweep["values"]]
    else:
        try:
            start, stop, step = float(sweep["start"]), float(sweep["stop"]), float(sweep["step"])
        except KeyError as exc:
            raise InvalidArgument("[sweep] needs either 'values' or 'start', 'stop' and 'step'") from exc
        if step <= 0 or stop < start:
            raise InvalidArgument("[sweep] needs step > 0 and stop >= start")
        vals = np.round(np.arange(start, stop + 0.5 * step, step), 12).tolist()
    if len(vals) < 3:
        raise InvalidArgument("[sweep] needs at least 3 values")
    return vals


def run_sweep(cfg, sweep, max_iters=None, log=print):
    """Run the sweep described by the ``[sweep]`` table; returns SweepTables."""
    from .analysis import SweepTable
    from .harness import exact_observables, run_training

    param = sweep.get("parameter", "hz")
    if param not in ("hx", "hy", "hz"):
        raise InvalidArgument(f"[sweep] parameter must be hx, hy or hz, got {param!r}")
    driver = sweep.get("driver", "ed")
    if driver not in ("ed", "train"):
        raise InvalidArgument(f"[sweep] driver must be 'ed' or 'train', got {driver!r}")
    sizes = [int(L) for L in sweep.get("sizes", [cfg.L])]
    values = sweep_values(sweep)
    rows = {}
    for L in sizes:
        for v in values:
            h = replace(cfg.fields, **{param: v})
            sub_out = os.path.join(cfg.out_dir, f"L{L}_{param}{v:g}") if cfg.out_dir else None
            point = replace(cfg, L=L, fields=h, out_dir=sub_out).validate()
            if driver == "ed":
                res = exact_observables(point)
                obs = {k: (val, 0.0, 0.0) for k, val in res.items() if k.startswith(("bffm", "renyi2"))}
                obs["energy_density"] = (res["density"], 0.0, 0.0)
            else:
                final = run_training(point, max_iters=max_iters).final
                obs = {"energy_density": (final["density"], final["stderr"] / point.L**2, final.get("tau", 0.0))}
                for k, r in final.get("observables", {}).items():
                    if k.startswith(("bffm", "renyi2")) and "value" in r:
                        obs[k] = (r["value"], r["stderr"], 0.0)
            log(f"L={L} {param}={v:g} " + " ".join(f"{k}={m:.8g}" for k, (m, _, _) in obs.items()))
            for k, triple in obs.items():
                rows.setdefault((L, k), []).append((v, *triple))
    tables = []
    for (L, k), r in rows.items():
        x, m, e, tau = map(np.array, zip(*r))
        tables.append(SweepTable(x, m, e, L, k, tau, {"parameter": param}))
    return tables


def cmd_sweep(args):
    from .analysis import write_sweep_csv
    from .harness import tomllib

    cfg = _config(args)
    path = args.config_flag or args.config_path
    with open(path, "rb") as fh:
        sweep = tomllib.load(fh).get("sweep")
    if not sweep:
        raise InvalidArgument(f"{path}: no [sweep] table")
    tables = run_sweep(cfg, sweep, args.max_iters)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "sweep.csv")
    write_sweep_csv(csv_path, tables)
    print(f"sweep table: {csv_path}")
    return EXIT_OK


def analyze(tables, mode="abs", exponent=None):
    """Peaks per table and one extrapolation per observable."""
    from .analysis import peak_from_sweep, power_law_extrapolate
    from .errors import BoundaryPeakError

    peaks, fits = [], []
    by_obs = {}
    for t in tables:
        if t.observable == "energy_density":
            continue
        try:
            hp, err = peak_from_sweep(t, mode)
        except BoundaryPeakError as exc:
            peaks.append({"L": t.L, "observable": t.observable, "error": str(exc)})
            continue
        peaks.append({"L": t.L, "observable": t.observable, "h_peak": hp, "h_peak_err": err})
        by_obs.setdefault(t.observable, []).append((t.L, hp, err))
    for obs, pts in by_obs.items():
        n_sizes = len({L for L, _, _ in pts})
        if n_sizes < 2:
            continue
        fixed = exponent if exponent is not None or n_sizes >= 3 else 1.0
        # exact data carry no statistical error; give every point unit weight
        pts_w = [(L, h, e if e > 0 else 1.0) for L, h, e in pts]
        fit = power_law_extrapolate(pts_w, fixed_exponent=fixed)
        err = fit.h_crit_err if any(e > 0 for _, _, e in pts) else 0.0
        fits.append({"observable": obs, "h_crit": fit.h_crit, "h_crit_err": err, "b": fit.b,
                     "x": fit.x, "fixed_exponent": fit.fixed_exponent, "chi2": fit.chi2,
                     "converged": fit.converged, "sizes": sorted({L for L, _, _ in pts})})
    return peaks, fits


def cmd_analyze(args):
    from .analysis import read_sweep_csv

    tables = []
    for path in args.csv:
        if not os.path.exists(path):
            raise InvalidArgument(f"no such file: {path}")
        tables.extend(read_sweep_csv(path))
    peaks, fits = analyze(tables, args.mode, args.exponent)
    print(f"{'L':>3} {'observable':<24} {'h_peak':>12} {'err':>10}")
    for p in peaks:
        if "error" in p:
            print(f"{p['L']:>3} {p['observable']:<24} boundary peak: widen the sweep")
        else:
            print(f"{p['L']:>3} {p['observable']:<24} {p['h_peak']:12.6f} {p['h_peak_err']:10.2e}")
    for f in fits:
        tag = f"x fixed at {f['x']:g}" if f["fixed_exponent"] is not None else f"x = {f['x']:.4f}"
        print(f"{f['observable']}: h_crit = {f['h_crit']:.6f} +- {f['h_crit_err']:.2e} ({tag}, L = {f['sizes']})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"peaks": peaks, "extrapolations": fits}, fh, indent=2)
    return EXIT_OK


def cmd_check(args):
    from .checks import run_all

    results = run_all(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVALID


COMMANDS = {"train": cmd_train, "ed": cmd_ed, "sweep": cmd_sweep, "analyze": cmd_analyze, "check": cmd_check}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ToricNQSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
