"""Command line entry point.

Subcommands:

``run CONFIG``        run the checks of a campaign over its seeds, write one JSON report per
                      (seed, check) plus a summary; exit status 0 iff every verdict passes
``describe NAME``     print a preset, its declared constants and its guaranteed contraction rate
``presets``           list the preset catalog
``dump-path``         sample a two-sided Wiener path and store it (binary, optionally CSV)
``selfconv NAME``     strong self-convergence study of an integrator on a preset

Environment: ``RANDEQ_OUTPUT_DIR`` overrides the report directory and
``RANDEQ_WORKERS`` the number of worker processes.  Command line flags win
over both.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, parse_config, schedule_of
from .integrators import ORDER_BANDS, fit_order, self_convergence
from .noise import dump_path, refine, sample_path
from .pullback import (BlowUpError, birkhoff_average, bound_check, contraction_rates, equilibrium,
                       estimate_equilibrium, lyapunov_check, top_lyapunov, verify_h1, verify_h2,
                       verify_invariance, verify_uniqueness)
from .reports import canonical_json, make_report, write_csv, write_report
from .stationary import ou_u
from .systems import PRESETS, describe_drift, preset, remark5_norm, validate_spec

__all__ = ["main", "run_campaign", "run_checks_for_seed", "describe"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

EQUATIONS = {
    "additive-lipschitz": "dx = (A x + f(x)) dt + Sigma dB",
    "additive-dissipative": "dx = g(x) dt + Sigma dB",
    "multiplicative-lipschitz": "dx = (A x + h(x)) dt + sum_k sigma_k x dB_k   (Ito)",
    "stratonovich-dissipative": "dx = g(x) dt + sum_k c_k x o dB_k   (Stratonovich)",
}

RESULTS = {
    "additive-lipschitz": "additive noise with globally Lipschitz drift: Gronwall estimate on the "
                          "difference of two solutions, contraction rate lambda - L*C",
    "additive-dissipative": "additive noise with one-sided dissipative drift: the noise cancels in the "
                            "difference of two solutions, contraction rate L",
    "multiplicative-lipschitz": "linear multiplicative Ito noise with Lipschitz perturbation: contraction "
                                "along the fundamental matrix, positive rate eps0 < (lambda - L*|Rbar|)/2",
    "stratonovich-dissipative": "scalar-type Stratonovich noise: conjugation to a random ODE by exp(u^c), "
                                "contraction rate L - eps2",
}


def _default_initial(spec, raw):
    if raw["initial"] is not None:
        return np.asarray(raw["initial"], dtype=float)
    return np.ones(spec.n)


def _op_and_band(spec, op):
    if op is None:
        op = "heun" if spec.stratonovich else "em"
    if op == "em":
        band = "em-multiplicative" if spec.kind == "multiplicative-lipschitz" else "em-additive"
    else:
        band = op
    if band not in ORDER_BANDS:
        raise ConfigError(f"selfconv.op: unknown integrator {op!r}")
    return op, band


def _check(name, spec, raw, path, seed):
    """Run one check on one seed; returns (verdict, result, csv tables)."""
    tol = raw["tolerances"]
    method = raw["method"]
    x = _default_initial(spec, raw)
    tables = {}
    if name == "equilibrium":
        run = estimate_equilibrium(spec, path, x, _schedule(spec, raw), tol["equilibrium"], method)
        res = run.to_dict()
        res["bound_check"] = bound_check(run, tol["equilibrium"])
        tables["residuals"] = (["t", "residual"], list(zip(run.schedule[1:], run.cauchy_residuals)))
        return ("pass" if run.converged else "fail"), res, tables
    if name == "h1":
        h1 = raw["h1"]
        y = np.asarray(h1["other"], dtype=float) if h1["other"] is not None else (-x if np.any(x) else x + 1)
        fit = verify_h1(spec, path, x, y, _schedule(spec, raw), h1["transient"], method, h1["eps0"], h1["eps2"])
        tables["separations"] = (["t", "separation"], list(zip(fit.schedule, fit.separations)))
        return ("pass" if fit.passed(tol["h1_slack"]) else "fail"), fit.to_dict(), tables
    if name == "h2":
        rep = verify_h2(spec, path, x, _schedule(spec, raw), raw["h2"]["gamma_grid"], raw["h2"]["lambda0"], method)
        tables["R_x"] = (["t", "R_x"], list(zip(rep.schedule, rep.values)))
        return ("pass" if rep.passed else "fail"), rep.to_dict(), tables
    if name == "invariance":
        inv = raw["invariance"]
        est = equilibrium(spec, path, x, float(inv["depth"]), method)
        verify_invariance(spec, path, est, [float(s) for s in inv["s"]], method)
        worst = max((r for _, r in est.invariance_residuals), default=0.0)
        res = est.to_dict()
        res["max_residual"] = worst
        return ("pass" if worst <= tol["invariance"] else "fail"), res, tables
    if name == "uniqueness":
        u = raw["uniqueness"]
        pts = u["points"]
        if pts is None:
            r = float(u["radius"])
            pts = [s * r * e for e in np.eye(spec.n) for s in (1.0, -1.0)]
        est, ok = verify_uniqueness(spec, path, pts, float(u["depth"]), tol["uniqueness"], method,
                                    relative=bool(u["relative"]))
        return ("pass" if ok else "fail"), est.to_dict(), tables
    if name == "birkhoff":
        Ts = [float(t) for t in raw["birkhoff"]["T"]]
        bundle = ou_u(path, spec.c, -max(Ts), 0.0, method="recursive")
        scale = math.sqrt(sum(c * c for c in spec.c) / 2)
        rows, ok = [], True
        for T in Ts:
            avg = birkhoff_average(bundle, T)
            band = tol["birkhoff_sigmas"] * scale / math.sqrt(T)
            ok &= abs(avg) <= band
            rows.append({"T": T, "average": avg, "band": band, "within": abs(avg) <= band})
        tables["averages"] = (["T", "average", "band"], [(r["T"], r["average"], r["band"]) for r in rows])
        return ("pass" if ok else "fail"), {"averages": rows, "truncation_bound": bundle.truncation_bound}, tables
    if name == "lyapunov":
        ly = raw["lyapunov"]
        est = top_lyapunov(spec, path, float(ly["T"]), float(ly["renorm"]))
        chk = lyapunov_check(spec, est, tol["lyapunov_band"])
        return ("pass" if chk["holds"] else "fail"), chk, tables
    raise ConfigError(f"unknown check {name!r}")


def _schedule(spec, raw):
    from .config import RunConfig

    return schedule_of(RunConfig(raw, spec, (), ()))


def run_checks_for_seed(raw: dict, seed: int) -> list:
    """All per-seed checks of a campaign for one seed, in configured order."""
    cfg = parse_config(raw)
    spec = cfg.spec
    p = cfg.raw["path"]
    path = sample_path(seed, p["past"], p["future"], p["step"], dim=spec.m)
    out = []
    for name in cfg.checks:
        if name == "selfconv":
            continue
        try:
            verdict, result, tables = _check(name, spec, cfg.raw, path, seed)
        except (BlowUpError, FloatingPointError) as exc:
            verdict, result, tables = "fail", {"error": type(exc).__name__, "message": str(exc)}, {}
        out.append((name, verdict, result, tables))
    return out


def _selfconv(cfg):
    sc = cfg.raw["selfconv"]
    spec = cfg.spec
    op, band = _op_and_band(spec, sc["op"])
    paths = [sample_path(s, sc["burn_in"], sc["t1"], sc["step"], dim=spec.m) for s in cfg.seeds]
    x0 = _default_initial(spec, cfg.raw)
    results = self_convergence(op, spec, paths, x0, int(sc["levels"]), 0.0, float(sc["t1"]), int(sc["extra"]),
                               float(sc["burn_in"]))
    order = fit_order(results)
    lo, hi = ORDER_BANDS[band]
    res = {"op": op, "band_name": band, "band": [lo, hi], "order": order,
           "levels": [{"h": h, "error": e} for h, e in results], "seeds": list(cfg.seeds)}
    return ("pass" if lo <= order <= hi else "fail"), res, {"errors": (["h", "error"], results)}


def run_campaign(cfg, out_dir, workers: int = 1, stream=None) -> int:
    """Execute every check of ``cfg``; returns the exit status."""
    stream = stream or sys.stdout
    out_dir = Path(out_dir)
    raw = cfg.raw
    seeds = list(cfg.seeds)
    per_seed = [c for c in cfg.checks if c != "selfconv"]
    results = {}
    if per_seed:
        if workers > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                batches = list(pool.map(run_checks_for_seed, [raw] * len(seeds), seeds))
        else:
            batches = [run_checks_for_seed(raw, s) for s in seeds]
        for seed, batch in zip(seeds, batches):
            for name, verdict, result, tables in batch:
                results[(name, seed)] = (verdict, result, tables)
    if "selfconv" in cfg.checks:
        try:
            results[("selfconv", "all")] = _selfconv(cfg)
        except FloatingPointError as exc:
            results[("selfconv", "all")] = ("fail", {"error": type(exc).__name__, "message": str(exc)}, {})
    table, failures = {}, []
    for name in cfg.checks:
        keys = ["all"] if name == "selfconv" else seeds
        for seed in keys:
            verdict, result, tables = results[(name, seed)]
            rep = make_report(name, seed, cfg.spec.name, verdict, result, raw, __version__)
            write_report(rep, out_dir)
            tag = f"seed{seed}" if isinstance(seed, int) else seed
            if raw["output"]["csv"]:
                for label, (head, rows) in tables.items():
                    write_csv(out_dir / f"{name}-{tag}-{label}.csv", head, rows)
            table.setdefault(name, {})[str(seed)] = verdict
            if verdict != "pass":
                failures.append({"check": name, "seed": seed})
    all_ok = not failures
    summary = make_report("summary", "all", cfg.spec.name, "pass" if all_ok else "fail",
                          {"table": table, "failures": failures, "seeds": seeds, "checks": list(cfg.checks)},
                          raw, __version__)
    (out_dir / "summary.json").write_text(canonical_json(summary))
    write_csv(out_dir / "summary.csv", ["check", "seed", "verdict"],
              [(c, s, v) for c, row in table.items() for s, v in row.items()])
    width = max(len(c) for c in cfg.checks)
    for c, row in table.items():
        passed = sum(v == "pass" for v in row.values())
        print(f"{c:<{width}}  {passed}/{len(row)} pass", file=stream)
    for f in failures:
        print(f"FAIL {f['check']} seed {f['seed']}", file=stream)
    print(f"{'all checks passed' if all_ok else f'{len(failures)} failing verdict(s)'}; reports in {out_dir}",
          file=stream)
    return EXIT_OK if all_ok else EXIT_FAIL


def describe(name: str) -> str:
    spec = preset(name)
    _, blurb = PRESETS[name]
    rates = contraction_rates(spec)
    lines = [
        f"{name}: {blurb}",
        f"class      {spec.kind}",
        f"equation   {EQUATIONS[spec.kind]}",
        f"dimension  n = {spec.n}, noise m = {spec.m}",
        f"nonlinear  {describe_drift(spec)}",
    ]
    for k in ("A", "Sigma"):
        if hasattr(spec, k):
            lines.append(f"{k:<10} {np.array2string(np.asarray(getattr(spec, k)), precision=6)}")
    if hasattr(spec, "sigma"):
        lines.append(f"{'sigma_k':<10} {[np.asarray(s).tolist() for s in spec.sigma]}")
    if hasattr(spec, "c"):
        lines.append(f"{'c':<10} {list(spec.c)}")
    lines.append("constants  " + ", ".join(f"{k} = {v}" for k, v in spec.constants().items()))
    lines.append(f"result     {RESULTS[spec.kind]}")
    lines.append(f"rate       {rates['predicted']:.6g}  ({rates['provenance']})")
    if rates["nominal"] != rates["predicted"]:
        lines.append(f"nominal    {rates['nominal']:.6g}  (before the margin)")
    lines.append("hypotheses (sampled, 'pass' means not falsified):")
    for rep in validate_spec(spec, samples=2000):
        lines.append(f"  {rep.constraint:<10} {rep.verdict:<12} {rep.note}")
    if name == "remark5":
        lines.append("closed form |Phi(t)|_F = exp(-t/2) sqrt(2 + (8/23) sin^2(sqrt(23) t / 2))"
                     " <= 3 sqrt(6/23) exp(-t/2)")
        for t in (0.0, 1.0, 2.0, 5.0):
            lines.append(f"  t = {t:<4g} |Phi(t)|_F = {remark5_norm(t):.12g}")
    return "\n".join(lines)


def _cmd_run(args) -> int:
    overrides = list(args.set or [])
    cfg = load_config(args.config, overrides)
    out = args.output_dir or os.environ.get("RANDEQ_OUTPUT_DIR") or cfg.raw["output"]["dir"]
    workers = args.workers or int(os.environ.get("RANDEQ_WORKERS", 0) or 0) or cfg.raw["workers"]
    if workers < 1:
        raise ConfigError(f"workers: expected a positive int, got {workers}")
    return run_campaign(cfg, out, workers)


def _cmd_describe(args) -> int:
    try:
        print(describe(args.name))
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _cmd_presets(args) -> int:
    width = max(map(len, PRESETS))
    for name in sorted(PRESETS):
        spec = preset(name)
        print(f"{name:<{width}}  {spec.kind:<25} {PRESETS[name][1]}")
    return EXIT_OK


def _cmd_dump_path(args) -> int:
    path = sample_path(args.seed, args.past, args.future, args.step, dim=args.dim)
    for _ in range(args.refine):
        path = refine(path)
    dump_path(path, args.output)
    if args.csv:
        header = ["t"] + [f"w{k}" for k in range(path.dim)]
        write_csv(args.csv, header, ([t, *w] for t, w in zip(path.times, path.values)))
    print(f"wrote {len(path)} points, step {path.step:g}, [-{path.past_horizon:g}, {path.future_horizon:g}] "
          f"to {args.output}")
    return EXIT_OK


def _cmd_selfconv(args) -> int:
    tree = {"system": args.name, "seeds": {"start": args.seed0, "count": args.paths}, "checks": ["selfconv"],
            "selfconv": {"op": args.op, "levels": args.levels, "t1": args.t1, "step": args.step}}
    cfg = parse_config(tree)
    verdict, res, _ = _selfconv(cfg)
    print(f"{cfg.spec.name}: {res['op']} over {args.paths} paths, t1 = {args.t1:g}")
    print(f"{'h':>12}  {'rms error':>12}")
    for lev in res["levels"]:
        print(f"{lev['h']:>12.6g}  {lev['error']:>12.4e}")
    lo, hi = res["band"]
    print(f"fitted order {res['order']:.3f}, band [{lo}, {hi}] ({res['band_name']}): {verdict}")
    return EXIT_OK if verdict == "pass" else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randeq", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a check campaign from a YAML config",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("config", help="YAML config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key by dotted path, e.g. --set tolerances.invariance=1e-3")
    p.add_argument("--output-dir", default=None, help="report directory (env RANDEQ_OUTPUT_DIR, else output.dir)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (env RANDEQ_WORKERS, else workers)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("describe", help="describe a preset")
    p.add_argument("name")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("presets", help="list presets")
    p.set_defaults(func=_cmd_presets)

    p = sub.add_parser("dump-path", help="sample a two-sided Wiener path and store it",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("output", help="binary output file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--past", type=float, default=10.0, help="past horizon T-")
    p.add_argument("--future", type=float, default=0.0, help="future horizon T+")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--refine", type=int, default=0, help="Brownian bridge refinements applied after sampling")
    p.add_argument("--csv", default=None, help="also write t, w0, ... rows to this CSV file")
    p.set_defaults(func=_cmd_dump_path)

    p = sub.add_parser("selfconv", help="strong self-convergence study on a preset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("name", help="preset name")
    p.add_argument("--op", default=None, choices=["em", "exponential", "heun", "rk4"],
                   help="integrator (default: em, or heun for Stratonovich systems)")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--paths", type=int, default=20, help="number of paths (seeds) in the RMS error")
    p.add_argument("--seed0", type=int, default=0, help="first seed")
    p.add_argument("--t1", type=float, default=1.0, help="end time")
    p.add_argument("--step", type=float, default=0.015625, help="coarsest step")
    p.set_defaults(func=_cmd_selfconv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
