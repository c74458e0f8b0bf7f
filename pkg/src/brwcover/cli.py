"""Command-line entry point: ``brwcover <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .config import COMMANDS, ExperimentConfig, parse_value
from .field import census_block
from .gw import InsufficientSamples, survival_curve
from .offspring import parse_dist
from .rng import stream
from .scales import lower_table, upper_table
from .svg import line_chart

# flag name -> config key
FLAGS = {
    "--d": "d", "--dist": "dist", "--seed": "seed", "--replicas": "replicas", "--threads": "threads",
    "--out": "out", "--r": "r", "--k": "k", "--L": "L", "--gamma": "gamma", "--slack": "slack",
    "--block": "block", "--n0": "n0", "--k-band": "k_band", "--M": "M", "--delta": "delta", "--a": "a",
    "--n": "n", "--mode": "mode", "--delta-upper": "delta_upper",
}


def artifact_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+g{rev}" if rev else __version__


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag, key in FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())
    common.add_argument("--strict-exact", dest="strict_exact", action="store_const", const=True, default=None,
                        help="refuse approximate sampling paths")
    common.add_argument("--config", default=None, help="key=value file; flags override it")
    p = argparse.ArgumentParser(prog="brwcover", description="Branching random walk cover-time experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    over = {}
    for key in list(FLAGS.values()) + ["strict_exact"]:
        v = getattr(args, key)
        if v is not None:
            over[key] = v if isinstance(v, bool) else parse_value(key, v)
    over["command"] = args.command
    text = Path(args.config).read_text() if args.config else ""
    return ExperimentConfig.from_text(text, **over)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items() if not isinstance(v, np.ndarray)}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- commands ---------------------------------------------------------------------


def cmd_cover(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    rows, summaries = [], []
    for r in cfg.r:
        res = ex.cover_experiment(r, dist, cfg.d, cfg.seed, cfg.replicas, cfg.slack, cfg.threads, cfg.block, cfg.strict_exact)
        rows += [list(x.values()) for x in res.rows()]
        summaries.append(res.summary())
    _write_csv(out / "cover.csv", ["replica", "r", "cover_time", "censored", "extinct", "approx_flag", "seed"], rows)
    pts = [(s["r"], s["excess"]["mean"], 2 * s["excess"]["stderr"]) for s in summaries if "excess" in s]
    if pts:
        xs, ys, es = zip(*pts)
        label = f"mean T_cov(r) - r, {cfg.dist_spec}, d={cfg.d}"
        (out / "cover_excess.svg").write_text(line_chart([(label, xs, ys)], "Cover time excess", "r", "T_cov(r) - r", [es]))
        ll = [(math.log(math.log(x)), y, e) for x, y, e in pts if x > math.e]
        if ll:
            lx, ly, le = zip(*ll)
            (out / "cover_loglog.svg").write_text(
                line_chart([(label, lx, ly)], "Cover time excess against log log r", "log log r", "T_cov(r) - r", [le])
            )
    return {"radii": summaries}


def cmd_hit(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    h = ex.hit_experiment(cfg.L, cfg.k_band, dist, cfg.d, cfg.seed, cfg.replicas, cfg.threads, cfg.block or 4096)
    _write_csv(out / "hit.csv", ["replica", "L", "hit_time", "censored", "seed"],
               ([i, cfg.L, "" if x < 0 else int(x), int(x < 0), cfg.seed] for i, x in enumerate(h)))
    ok = h >= 0
    res = {"L": cfg.L, "k_band": cfg.k_band, "censored": int((~ok).sum()), "exact_up_to": cfg.L + 2 * cfg.k_band}
    if ok.sum() >= 2:
        res["excess_half"] = ex.summarize((h[ok] - cfg.L) // 2).as_dict()
    return res


def cmd_freeze(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    Y, F, S = ex.freeze_experiment(cfg.L, cfg.k, cfg.n0, dist, cfg.d, cfg.seed, cfg.replicas, cfg.mode, cfg.threads, cfg.block or 10000)
    _write_csv(out / "freeze.csv", ["replica", "Y", "F", "S"], ([i, int(a), int(b), int(c)] for i, (a, b, c) in enumerate(zip(Y, F, S))))
    n = len(Y)
    return {
        "mode": cfg.mode, "L": cfg.L, "k": cfg.k, "n0": cfg.n0,
        "mean_Y": float(Y.mean()), "stderr_Y": float(Y.std(ddof=1) / math.sqrt(n)) if n > 1 else None,
        "mean_F": float(F.mean()), "mean_S": float(S.mean()),
    }


def cmd_census(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    r = cfg.r[0]
    block = cfg.block or 500
    header = ["replica", "r", "z", "H", "min_away"] + [f"Y0_k{k}" for k in range(1, cfg.k + 1)] + [f"F_k{k}" for k in range(1, cfg.k + 1)]
    rows = []
    for b, start, n in ex.plan_blocks(cfg.replicas, block):
        cb = census_block(r, cfg.k, dist, cfg.d, stream(cfg.seed, ex.TAG_CENSUS, r, b), n, radii=[r],
                          horizon_slack=cfg.slack, strict=cfg.strict_exact)
        ma = cb.min_away(r)
        for i in range(n):
            for z in range(cb.H[r].shape[1]):
                h = int(cb.H[r][i, z])
                row = [start + i, r, z, "" if h < 0 else h, "" if h < 0 else int(ma[i, z])]
                row += [int(cb.Y0[(k, r)][i, z]) for k in range(1, cfg.k + 1)]
                row += ["" if np.isnan(cb.F[(k, r)][i, z]) else int(cb.F[(k, r)][i, z]) for k in range(1, cfg.k + 1)]
                rows.append(row)
    _write_csv(out / "census.csv", header, rows)
    return {"r": r, "k_max": cfg.k, "rows": len(rows)}


def cmd_gw(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist or "geom:1")
    curve = survival_curve(dist, cfg.n)
    _write_csv(out / "gw.csv", ["n", "survival", "n_times_survival"], ([m, repr(float(q)), repr(float(m * q))] for m, q in enumerate(curve)))
    return ex.gw_diagnostics(dist, cfg.n, cfg.replicas, cfg.seed, cfg.threads)


def cmd_pakes(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist or "geom:1")
    rep = ex.pakes_report(float(dist.variance), cfg.gamma)
    _write_csv(out / "pakes.csv", ["gamma", "tail", "error_estimate"], ([x["gamma"], repr(x["tail"]), repr(x["error_estimate"])] for x in rep["rows"]))
    if cfg.replicas > 1 and cfg.n > 0:
        try:
            rep["monte_carlo"] = ex.pakes_mc(dist, cfg.n, cfg.gamma, cfg.replicas, cfg.seed)
        except InsufficientSamples as err:
            rep["monte_carlo"] = {"error": str(err)}
    return rep


def cmd_scales(cfg: ExperimentConfig, out: Path) -> dict:
    lo = lower_table(cfg.M, cfg.delta, cfg.k)
    up = upper_table(cfg.a, cfg.delta_upper, cfg.k)
    rows = []
    for e in lo.entries:
        rows.append(["lower", e.k, repr(float(e.n)), repr(float(e.p)), repr(float(e.R)), int(e.overflow), ""])
    for e in up.entries:
        rows.append(["upper", e.k, repr(float(e.n)), "", repr(float(e.R)), int(e.overflow), int(e.chain_ok)])
    _write_csv(out / "scales.csv", ["kind", "k", "n", "p", "R", "overflow", "chain_ok"], rows)
    return {"lower": lo.as_dict(), "upper": up.as_dict()}


def cmd_lower(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    rep = ex.lower_bound_experiment(cfg.r, cfg.k, dist, cfg.d, cfg.replicas, cfg.seed, threads=cfg.threads,
                                    block=cfg.block or 500, M=cfg.M, delta=cfg.delta)
    rows = []
    for entry in rep["radii"]:
        flags = entry.pop("slow_flags")
        for i, f in enumerate(flags):
            rows.append([i, entry["r"]] + [int(x) for x in f])
    _write_csv(out / "lower.csv", ["replica", "r"] + [f"A_k{k}" for k in range(cfg.k + 1)], rows)
    return rep


def cmd_upper(cfg: ExperimentConfig, out: Path) -> dict:
    dist = parse_dist(cfg.dist_spec)
    rep = ex.upper_bound_experiment(cfg.k, cfg.a, dist, cfg.d, cfg.n0, cfg.replicas, cfg.seed,
                                    delta=cfg.delta_upper, threads=cfg.threads, block=cfg.block or 10)
    flags = rep.pop("B_flags")
    _write_csv(out / "upper.csv", ["replica"] + [f"B_k{k + 1}" for k in range(flags.shape[1])],
               ([i] + [int(x) for x in f] for i, f in enumerate(flags)))
    return rep


HANDLERS = {
    "cover": cmd_cover, "hit": cmd_hit, "freeze": cmd_freeze, "census": cmd_census, "gw-diag": cmd_gw,
    "pakes": cmd_pakes, "scales": cmd_scales, "lower": cmd_lower, "upper": cmd_upper,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ValueError, OSError) as err:
        print(f"brwcover: {err}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    t0 = time.perf_counter()
    result = HANDLERS[cfg.command](cfg, out)
    summary = {
        "config": cfg.as_dict(),
        "version": artifact_version(),
        "wall_clock_seconds": time.perf_counter() - t0,
        "result": result,
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    print(json.dumps(_jsonable(result), indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
