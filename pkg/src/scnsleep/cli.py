"""Command-line runner: simulate, sweep, loaddist and verify.

Examples::

    scnsleep simulate --config low_util --replications 20 --out low.csv
    scnsleep sweep --config plan.toml --out runs/ --workers 4
    scnsleep loaddist --nu-u 3 --mode both --out loads.csv
    scnsleep verify
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import AXES, ConfigError, ExperimentPlan, config_hash, load_plan
from .load_model import (FitError, MomentComputationError, MomentSpec, first_moment,
                         fit_empirical, fit_from_moments, ks_distance, load_cdf, load_pdf,
                         sample_origin_loads, second_moment)
from .power import Mode
from .sim import run

MODE_COLUMNS = tuple(f"time_{m.name.lower()}" for m in Mode)
CSV_COLUMNS = (
    "scheduler", "on_ratio", "lambda_s", "w_t", "utilization_label",
    "p_block_mean", "p_block_ci", "r_scn_mean", "r_scn_ci", "ee_mean", "ee_ci",
    "seed", "replications", "config_hash",
    "request_count", "blocked_count", "total_energy_mean",
) + MODE_COLUMNS


class OutputExists(RuntimeError):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _half_width(stat):
    return None if stat is None else stat.half_width


def point_row(cfg, agg) -> dict:
    """One CSV row; ``*_ci`` columns hold 95% half-widths (empty if undefined)."""
    s = agg.stats
    row = {
        "scheduler": cfg.scheduler,
        "on_ratio": cfg.on_ratio,
        "lambda_s": cfg.lambda_s,
        "w_t": cfg.w_t,
        "utilization_label": cfg.utilization_label,
        "p_block_mean": agg.p_block,
        "p_block_ci": _half_width(s["p_block"]),
        "r_scn_mean": agg.r_scn,
        "r_scn_ci": _half_width(s["r_scn"]),
        "ee_mean": agg.ee,
        "ee_ci": _half_width(s["ee"]),
        "seed": cfg.seed,
        "replications": cfg.replications,
        "config_hash": config_hash(cfg.to_dict()),
        "request_count": agg.request_count,
        "blocked_count": agg.blocked_count,
        "total_energy_mean": agg.total_energy,
    }
    for m, col in zip(Mode, MODE_COLUMNS):
        row[col] = agg.mode_time.get(m.name.lower(), 0.0)
    return row


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def _write(path: Path, text: str, force: bool):
    if path.exists() and not force:
        raise OutputExists(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def manifest(plan: ExperimentPlan, rows, failures=()) -> dict:
    return {
        "version": __version__,
        "seed": plan.base.seed,
        "config_hash": plan.hash,
        "plan": plan.to_dict(),
        "results": [{k: row.get(k) for k in CSV_COLUMNS} for row in rows],
        "failures": list(failures),
    }


def _progress(i, total, cfg, quiet=False):
    if not quiet:
        print(f"[{i}/{total}] {cfg.scheduler} on_ratio={cfg.on_ratio} lambda_s={cfg.lambda_s} "
              f"w_t={cfg.w_t}", file=sys.stderr, flush=True)


def run_plan(plan: ExperimentPlan, workers=1, quiet=False):
    """Run every point, isolating failures; returns (rows, failures)."""
    rows, failures = [], []
    total = len(plan)
    for i, cfg in enumerate(plan.points(), 1):
        _progress(i, total, cfg, quiet)
        try:
            agg, _ = run(cfg, workers=workers)
        except Exception as e:  # one bad point must not sink the sweep
            print(f"  failed: {type(e).__name__}: {e}", file=sys.stderr)
            failures.append({axis: getattr(cfg, axis) for axis in AXES} | {"error": str(e)})
            continue
        rows.append(point_row(cfg, agg))
    return rows, failures


# -- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> int:
    plan = load_plan(args.config).override(args.seed, args.replications, args.raw_distance_sinr)
    out = Path(args.out)
    rows, failures = run_plan(plan, args.workers, args.quiet)
    man = manifest(plan, rows, failures)
    if args.format == "csv":
        _write(out, rows_to_csv(rows), args.force)
        _write(out.with_suffix(".json"), _dump(man), args.force)
    else:
        _write(out, _dump(man), args.force)
    return 1 if failures else 0


def _point_name(row) -> str:
    return f"{row['scheduler']}_on{row['on_ratio']:g}_ls{row['lambda_s']:g}_wt{row['w_t']:g}"


def cmd_sweep(args) -> int:
    plan = load_plan(args.config).override(args.seed, args.replications, args.raw_distance_sinr)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise OutputExists(f"{out} is not empty; pass --force to overwrite")
    rows, failures = run_plan(plan, args.workers, args.quiet)
    ext = args.format
    for row in rows:
        text = rows_to_csv([row]) if ext == "csv" else _dump(row)
        _write(out / f"{_point_name(row)}.{ext}", text, args.force)
    merged = rows_to_csv(rows) if ext == "csv" else _dump(rows)
    _write(out / f"merged.{ext}", merged, args.force)
    _write(out / "manifest.json", _dump(manifest(plan, rows, failures)), args.force)
    if failures:
        print(f"{len(failures)} of {len(plan)} points failed", file=sys.stderr)
    return 1 if failures else 0


def loaddist_table(nu_u, nu_c=None, r_th=1.0, mode="both", samples=100_000, seed=0,
                   e2_samples=200_000, x_max=None, n_points=201) -> dict:
    """Fitted CDF/PDF curves on a grid, plus KS distances to sampled loads."""
    nu_c = nu_u if nu_c is None else nu_c
    if nu_u < 0 or nu_c < 0:
        raise ValueError("densities must be non-negative")
    x_max = x_max if x_max is not None else max(3.0, 2.0 * nu_u / max(nu_c, 1.0) + 2.0)
    x = np.linspace(0.0, x_max, n_points)
    cols = {"x": x}
    ks = {}
    if nu_u == 0:
        # no UEs: all load sits at zero
        for name in ("analytic", "empirical") if mode == "both" else (mode,):
            cols[f"cdf_{name}"] = np.ones_like(x)
            cols[f"pdf_{name}"] = np.where(x == 0, 1.0, 0.0)
        return {"columns": cols, "ks": ks, "nu_u": nu_u, "nu_c": nu_c}

    loads = None
    if mode in ("empirical", "both"):
        loads = sample_origin_loads(nu_u, nu_c, samples, np.random.default_rng(seed))
    if mode in ("analytic", "both"):
        spec = MomentSpec(nu_u=nu_u, nu_c=nu_c, r_th=r_th, e2_samples=e2_samples, seed=seed)
        fit = fit_from_moments(first_moment(spec), second_moment(spec).value, nu_u)
        cols["cdf_analytic"] = np.atleast_1d(load_cdf(x, fit))
        cols["pdf_analytic"] = np.atleast_1d(load_pdf(x, fit))
        if loads is not None:
            ks["analytic"] = ks_distance(loads, fit)
    if loads is not None:
        fit = fit_empirical(loads, nu_u)
        cols["cdf_empirical"] = np.atleast_1d(load_cdf(x, fit))
        cols["pdf_empirical"] = np.atleast_1d(load_pdf(x, fit))
        cols["ecdf"] = np.searchsorted(np.sort(loads), x, side="right") / loads.size
        ks["empirical"] = ks_distance(loads, fit)
    return {"columns": cols, "ks": ks, "nu_u": nu_u, "nu_c": nu_c}


def cmd_loaddist(args) -> int:
    res = loaddist_table(args.nu_u, args.nu_c, args.r_th, args.mode, args.samples, args.seed or 0)
    cols = res["columns"]
    names = list(cols)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for i in range(len(cols["x"])):
            w.writerow([repr(float(cols[n][i])) for n in names])
        text = buf.getvalue()
    else:
        text = _dump({"nu_u": res["nu_u"], "nu_c": res["nu_c"], "ks": res["ks"],
                      "columns": {n: [float(v) for v in cols[n]] for n in names}})
    if args.out:
        _write(Path(args.out), text, args.force)
    else:
        sys.stdout.write(text)
    for name, d in res["ks"].items():
        print(f"KS distance ({name} fit vs sampled loads): {d:.4f}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_checks

    report = run_checks(seed=args.seed or 0)
    text = _dump(report)
    if args.out:
        _write(Path(args.out), text, args.force)
    else:
        sys.stdout.write(text)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scnsleep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="TOML plan, JSON manifest, or preset name (low_util, high_util)")
            sp.add_argument("--replications", type=int)
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--raw-distance-sinr", action="store_true",
                            help="use distances in meters in the SINR instead of units of r_th")
            sp.add_argument("-q", "--quiet", action="store_true")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    sp = sub.add_parser("simulate", help="run every point of a plan into one table")
    common(sp)
    sp.add_argument("--out", default="results.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a plan into a directory, one file per point")
    common(sp)
    sp.add_argument("--out", default="sweep")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("loaddist", help="load distribution curves and KS distance")
    common(sp, config=False)
    sp.add_argument("--nu-u", type=float, required=True, help="mean UEs within r_th of an SBS")
    sp.add_argument("--nu-c", type=float, help="mean SBSs within r_th of a UE (default: nu_u)")
    sp.add_argument("--r-th", type=float, default=1.0)
    sp.add_argument("--mode", choices=("analytic", "empirical", "both"), default="both")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_loaddist)

    sp = sub.add_parser("verify", help="run the oracle cross-checks")
    common(sp, config=False)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OutputExists, FitError, MomentComputationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
