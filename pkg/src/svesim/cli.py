"""Command-line entry point: ``svesim run <config>`` and ``svesim validate <config>``.

Exit status: 0 on success, 2 when the configuration is unreadable or
invalid, 3 when a ``check`` run reports a failed clause, 1 when the
numerics raise an error at run time.
"""
import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import export, plotting
from .analysis import comparison_report, counterexample_report, strong_error
from .errors import SveError
from .mittag_leffler import ml, ml_sign_scan
from .model import check_assumption, comparable_check
from .schemes import BrownianDriver, simulate_coupled, simulate_euler, simulate_splitting

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID, EXIT_CHECK_FAILED = 0, 1, 2, 3
_RUNNERS = {"splitting": simulate_splitting, "euler": simulate_euler}


def _mean_se(values):
    n = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(values.shape[1], np.nan)
    return mean, se


def _c_fn(p):
    parts = [c.time_lipschitz_l2 for c in (p.b, p.sigma) if c.time_lipschitz_l2 is not None]
    if not parts:
        return None
    return lambda s: sum(np.asarray(f(s), dtype=float) for f in parts)


def cmd_simulate(exp, out):
    p = exp.problems[0]
    e = _RUNNERS[exp.scheme](p, exp.sim, BrownianDriver(exp.sim.seed))
    mean, se = _mean_se(e.values)
    files = {}
    if "csv" in exp.formats:
        files["ensemble"] = export.write_ensemble(out / "ensemble.csv", e)
        files["metadata"] = export.write_summary(out / "ensemble.meta.txt", e.meta)
        files["report"] = export.write_columns(out / "report.csv", {"t": e.grid, "mean": mean, "se": se})
    if "svg" in exp.formats:
        files["plot"] = plotting.line_chart(out / "plot.svg", e.grid, {"mean": mean}, ylabel="E[X_t]",
                                            bands={"mean": 1.96 * se})
    summary = {"command": "simulate", "scheme": exp.scheme, "n_paths": e.n_paths, "N": exp.sim.N,
               "M": exp.sim.M, "seed": exp.sim.seed, "mean_T": mean[-1], "se_T": se[-1]}
    return summary, files, EXIT_OK


def cmd_compare(exp, out):
    p1, p2 = exp.problems
    delta = float(exp.options.get("delta", 0.0))
    e1, e2 = simulate_coupled(p1, p2, exp.sim, BrownianDriver(exp.sim.seed), exp.scheme)
    rep = comparison_report(e1, e2, delta)
    per_time_viol = np.mean(e1.values - e2.values > delta, axis=0)
    files = {}
    if "csv" in exp.formats:
        files["report"] = export.write_columns(out / "report.csv", {
            "t": rep.grid, "mean_diff": rep.per_time_means, "se_diff": rep.per_time_se,
            "violation_fraction": per_time_viol})
    if "svg" in exp.formats:
        files["plot"] = plotting.line_chart(out / "plot.svg", rep.grid, {"E[X2 - X1]": rep.per_time_means},
                                            bands={"E[X2 - X1]": 1.96 * rep.per_time_se})
    summary = {"command": "compare", "scheme": exp.scheme, "n_paths": rep.n_paths, "delta": rep.delta,
               "violation_fraction": rep.violation_fraction, "max_exceedance": rep.max_exceedance}
    return summary, files, EXIT_OK


def cmd_convergence(exp, out):
    p = exp.problems[0]
    o = exp.options
    rep = strong_error(p, exp.sim, o["Ns"], o.get("ref_factor", 4), o.get("t_eval"), exp.scheme, _c_fn(p))
    comps = np.array(rep.bound_components)
    files = {}
    if "csv" in exp.formats:
        files["report"] = export.write_columns(out / "report.csv", {
            "N": np.array(rep.Ns), "error": rep.errors, "error_se": rep.error_se,
            "omega_g": comps[:, 0], "omega_K": comps[:, 1], "sup_C2": comps[:, 2]})
    if "svg" in exp.formats:
        files["plot"] = plotting.line_chart(out / "plot.svg", rep.Ns, {"mean-square error": rep.errors},
                                            xlabel="N", logx=True, logy=True)
    summary = {"command": "convergence", "scheme": exp.scheme, "n_ref": rep.n_ref, "t_eval": rep.t_eval,
               "fitted_rate": rep.fitted_rate,
               "strictly_decreasing": bool(np.all(np.diff(rep.errors) < 0))}
    return summary, files, EXIT_OK


def cmd_ml(exp, out):
    o = exp.options
    alpha, gamma = float(o["alpha"]), float(o["gamma"])
    beta = float(o.get("beta", -1.0))
    t_max, n_grid = float(o.get("t_max", 50.0)), int(o.get("n_grid", 400))
    rep = ml_sign_scan(alpha, gamma, t_max, n_grid, lam=-beta)
    t = np.geomspace(t_max * 1e-4, t_max, n_grid)
    vals = ml(alpha, gamma, beta * t ** alpha)
    files = {}
    if "csv" in exp.formats:
        files["report"] = export.write_columns(out / "report.csv", {"t": t, "value": vals})
    if "svg" in exp.formats:
        files["plot"] = plotting.line_chart(out / "plot.svg", t, {"E(beta t^alpha)": vals}, logx=True)
    summary = {"command": "ml", "alpha": alpha, "gamma": gamma, "beta": beta, "t_max": t_max,
               "first_negative_t": "none" if rep.first_negative_t is None else rep.first_negative_t,
               "min_value": rep.min_value, "argmin_t": rep.argmin_t, "threshold": rep.threshold}
    return summary, files, EXIT_OK


def cmd_check(exp, out):
    o = exp.options
    rows, passed = [], True
    for i, p in enumerate(exp.problems):
        rep = check_assumption(p, float(o["q"]), float(o["eta"]))
        passed &= rep.passed
        rows += [(f"problem[{i}]", c.name, c.passed, c.margin, c.detail) for c in rep.clauses]
    if len(exp.problems) == 2:
        p1, p2 = exp.problems
        cr = comparable_check((p1.g, p1.b), (p2.g, p2.b), exp.kernel, T=p1.T)
        passed &= cr.comparable
        rows.append(("pair", "comparable_i", cr.clause_i, cr.min_gap_i, "; ".join(cr.notes)))
        rows.append(("pair", "comparable_ii", cr.clause_ii, cr.min_gap_ii, "; ".join(cr.notes)))
    files = {}
    if "csv" in exp.formats:
        files["report"] = export.write_csv(out / "report.csv",
                                           ["subject", "clause", "passed", "margin", "detail"], rows)
    summary = {"command": "check", "passed": passed,
               "failed_clauses": ",".join(f"{r[0]}.{r[1]}" for r in rows if not r[2]) or "none"}
    return summary, files, EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_counterexample(exp, out):
    o = exp.options
    alpha, beta0 = float(o["alpha"]), float(o["beta0"])
    rep = counterexample_report(alpha, beta0, float(o["x1"]), float(o["x2"]), exp.sim,
                                BrownianDriver(exp.sim.seed), float(o.get("sigma", 1.0)))
    scan = ml_sign_scan(alpha, beta0, exp.sim.T)
    i = int(np.argmin(np.abs(rep.grid - scan.argmin_t)))
    files = {}
    if "csv" in exp.formats:
        files["report"] = export.write_columns(out / "report.csv", {
            "t": rep.grid, "analytic_diff": rep.analytic_diff, "mc_diff_mean": rep.mc_diff_mean,
            "mc_diff_se": rep.mc_diff_se})
    if "svg" in exp.formats:
        files["plot"] = plotting.line_chart(out / "plot.svg", rep.grid, {
            "analytic": rep.analytic_diff, "Monte Carlo": rep.mc_diff_mean},
            ylabel="X2 - X1", bands={"Monte Carlo": 3 * rep.mc_diff_se})
    summary = {"command": "counterexample", "alpha": alpha, "beta0": beta0, "t_at_scan_min": rep.grid[i],
               "mc_diff_at_min": rep.mc_diff_mean[i], "se_at_min": rep.mc_diff_se[i],
               "analytic_at_min": rep.analytic_diff[i],
               "agreement_fraction_3se": rep.agreement_fraction(3.0)}
    return summary, files, EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "convergence": cmd_convergence,
            "ml": cmd_ml, "check": cmd_check, "counterexample": cmd_counterexample}


def _module_of(exc):
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        path = Path(frame.filename)
        if path.parent.name == "svesim":
            return f"svesim.{path.stem}"
    return "svesim"


def run(config_path, out=None, threads=None, formats=None, stdout=None, stderr=None):
    """Run a configuration and write its artifacts; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        exp = cfgmod.load(config_path)
    except cfgmod.ConfigError as exc:
        for d in exc.diagnostics:
            print(f"{config_path}: {d}", file=stderr)
        return EXIT_INVALID
    if threads is not None:
        if threads < 1:
            print("--threads must be >= 1", file=stderr)
            return EXIT_INVALID
        if exp.sim is not None:
            exp.sim = exp.sim.replace(threads=threads)
    if formats is not None:
        exp.formats = formats
    out_dir = Path(out) if out is not None else exp.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        summary, files, status = COMMANDS[exp.command](exp, out_dir)
    except SveError as exc:
        print(f"{_module_of(exc)}: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_RUNTIME
    export.write_summary(out_dir / "summary.txt", summary)
    for name, path in files.items():
        print(f"wrote {name}: {path}", file=stdout)
    print(f"wrote summary: {out_dir / 'summary.txt'}", file=stdout)
    return status


def _formats(text):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in cfgmod.FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unsupported formats {bad}; choose from csv, svg")
    return items


def build_parser():
    ap = argparse.ArgumentParser(prog="svesim", description="Simulate and analyse stochastic Volterra equations.")
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None, help="output directory (overrides [output].dir)")
    r.add_argument("--threads", type=int, default=None, help="worker threads; results do not depend on it")
    r.add_argument("--format", dest="formats", type=_formats, default=None, help="comma list from csv,svg")
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config", type=Path)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.action == "validate":
        diags = cfgmod.validate(args.config)
        for d in diags:
            print(f"{args.config}: {d}")
        if not diags:
            print(f"{args.config}: ok")
        return EXIT_INVALID if diags else EXIT_OK
    return run(args.config, args.out, args.threads, args.formats)


if __name__ == "__main__":
    sys.exit(main())
