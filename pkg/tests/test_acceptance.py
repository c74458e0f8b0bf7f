"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL <detail>`` line to the
terminal before asserting, so the suite output doubles as a report.
"""

import contextlib
import io
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from brwcover import experiments as ex
from brwcover.cli import main
from brwcover.field import simulate_block
from brwcover.freeze import freeze_1d_batch, freeze_chain_batch, freeze_tree_batch
from brwcover.gw import pgf_survival_exact, simulate_gw_batch, total_progeny_tail_mc
from brwcover.offspring import parse_dist, thin
from brwcover.pakes import PakesLaw, chernoff_rhs, pakes_tail
from brwcover.rng import stream
from brwcover.stats import D2_COEFFICIENT, LIMIT_COEFFICIENT, coefficient, homogeneity_pvalue, tv_binned, wilson_interval
from brwcover.tree import ROOT, vertex

DET3 = parse_dist("det:3")


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def test_c01_martingale(report):
    t0 = time.perf_counter()
    b = freeze_tree_batch([ROOT], vertex(*([0] * 10)), 1, DET3, stream(101), 100_000, d=3)
    se = b.Y.std(ddof=1) / math.sqrt(len(b))
    dt = time.perf_counter() - t0
    ok = abs(b.Y.mean() - 1) <= 3 * se and dt < 60
    report(1, ok, f"mean(Y)={b.Y.mean():.4f} se={se:.4f} runtime={dt:.1f}s")


def test_c02_kolmogorov(report):
    t0 = time.perf_counter()
    g9 = pgf_survival_exact(parse_dist("geom:1"), 9)
    p4 = 10_000 * pgf_survival_exact(parse_dist("poisson:1"), 10_000)
    inside = {}
    for name, dist in (("bin3", thin(DET3, Fraction(1, 3))), ("geom1", parse_dist("geom:1"))):
        hits = int(simulate_gw_batch(dist, 50, 1, 1_000_000, stream(102, len(name))).survived.sum())
        lo, hi = wilson_interval(hits, 1_000_000, 0.99)
        inside[name] = lo <= pgf_survival_exact(dist, 50) <= hi
    dt = time.perf_counter() - t0
    ok = abs(g9 - 0.1) <= 1e-9 and abs(p4 / 2 - 1) <= 0.02 and all(inside.values()) and dt < 120
    report(2, ok, f"geom n=9: {g9:.10f}; poisson n*P={p4:.4f}; MC n=50 inside 99% CI: {inside}; runtime={dt:.1f}s")


def test_c03_pakes(report):
    t0 = time.perf_counter()
    m1 = PakesLaw(1.0).moment(1)
    m2 = PakesLaw(1.0).moment(2)
    gammas = [0.5, 1.0, 2.0]
    est = total_progeny_tail_mc(parse_dist("poisson:1"), 1000, gammas, 60_000_000, stream(103))
    lim = [pakes_tail(g, 1.0) for g in gammas]
    err = [abs(p - q) for p, q in zip(est.estimate, lim)]
    dt = time.perf_counter() - t0
    ok = (
        abs(m1 - 1 / 3) <= 1e-5 and abs(m2 - 7 / 45) <= 1e-4
        and est.accepted >= 100_000 and max(err) <= 0.02 and dt < 300
    )
    rows = ", ".join(f"g={g}: mc={p:.4f} limit={q:.4f}" for g, p, q in zip(gammas, est.estimate, lim))
    report(3, ok, f"E[v]={m1:.7f} E[v^2]={m2:.6f}; accepted={est.accepted}; {rows}; runtime={dt:.1f}s")


def test_c04_chernoff(report):
    x = stream(104).binomial(100, 0.5, size=1_000_000)
    emp = float((x <= 25).mean())
    report(4, emp <= chernoff_rhs(50), f"P(X<=25)={emp:.2e} bound={chernoff_rhs(50):.3e}")


def test_c05_projection(report):
    n, worst_tv, worst_p, fails = 100_000, 0.0, 1.0, []
    for L in (1, 2, 3):
        for k in (1, 2):
            for d in (3, 4):
                for kind in ("det", "poisson"):
                    dist = parse_dist(f"{kind}:{d}")
                    a = freeze_1d_batch(L, k, 1, dist, d, stream(1, L, k, d, kind == "det"), n)
                    b = freeze_tree_batch([ROOT], vertex(*([0] * L)), k, dist, stream(2, L, k, d, kind == "det"), n, d=d)
                    A, B = np.stack([a.Y, a.F], 1), np.stack([b.Y, b.F], 1)
                    tv, p = tv_binned(A, B), homogeneity_pvalue(A, B)
                    worst_tv, worst_p = max(worst_tv, tv), min(worst_p, p)
                    if tv > 0.02 or p <= 0.001:
                        fails.append((L, k, d, kind))
    x, y = vertex(0, 0), vertex(0, 0, 0, 0)
    direct = freeze_tree_batch([ROOT], y, 2, DET3, stream(14, 1), 250_000, d=3, record_arrivals=True)
    ok_rows = direct.arrivals[:, direct.cells.index((x, 0))] == 0
    first = freeze_tree_batch([ROOT], x, 1, DET3, stream(14, 2), 250_000, d=3)
    chained = freeze_chain_batch(first.take(first.Y == 0), y, DET3, stream(14, 3), 3)
    A = np.stack([direct.Y[ok_rows], direct.F[ok_rows]], 1)
    B = np.stack([chained.Y, chained.F], 1)
    ctv, cp = tv_binned(A, B), homogeneity_pvalue(A, B)
    ok = not fails and ctv <= 0.02 and cp > 0.001 and min(len(A), len(B)) >= 100_000
    report(5, ok, f"grid 24 cells: max TV={worst_tv:.4f} min p={worst_p:.4f} fails={fails}; "
                  f"chaining TV={ctv:.4f} p={cp:.3f} n=({len(A)},{len(B)})")


def test_c06_parity_and_floors(report):
    violations, checked = 0, 0
    runs = [("det:3", 3, 6), ("poisson:3", 3, 6), ("geom:3", 3, 5), ("table:0=1/2,6=1/2", 3, 4), ("det:4", 4, 4), ("poisson:4", 4, 4)]
    for i, (spec, d, r) in enumerate(runs):
        b = simulate_block(r, r + 60, parse_dist(spec), d, stream(106, i), 500, keep_hits=True)
        for j, h in enumerate(b.hits):
            seen = h[h >= 0]
            violations += int(np.sum((seen - j) % 2 != 0) + np.sum(seen < j))
            checked += seen.size
        ct = b.cover_time[b.cover_time >= 0]
        violations += int(np.sum(ct < r))
        checked += ct.size
    for L in (1, 5, 20):
        h = ex.hit_experiment(L, 4, parse_dist("poisson:3"), 3, 106, 5000)
        seen = h[h >= 0]
        violations += int(np.sum((seen - L) % 2 != 0) + np.sum(seen < L))
        checked += seen.size
    report(6, violations == 0, f"violations={violations} over {checked} recorded times")


def test_c07_pruning(report):
    kw = dict(keep_hits=True, t_min=8)
    pr, un = [], []
    for blk in range(10):
        a = simulate_block(4, 8, DET3, 3, stream(107, 1, blk), 10_000, **kw)
        b = simulate_block(4, 8, DET3, 3, stream(107, 2, blk), 10_000, prune=False, dense_depth=8, lump=None, **kw)
        pr.append(np.concatenate(a.hits, axis=1))
        un.append(np.concatenate(b.hits, axis=1))
    ha, hb = np.concatenate(pr), np.concatenate(un)
    joint = tv_binned(ha, hb)
    marg = max(tv_binned(ha[:, c], hb[:, c]) for c in range(ha.shape[1]))
    cover = tv_binned(np.where((ha < 0).any(1), -1, ha.max(1)), np.where((hb < 0).any(1), -1, hb.max(1)))
    ok = max(joint, marg, cover) <= 0.02
    report(7, ok, f"joint TV={joint:.4f} max marginal TV={marg:.4f} cover TV={cover:.4f} over 1e5 reps each")


def test_c08_trend(report):
    t0 = time.perf_counter()
    means, cens, coefs, ok_counts = {}, {}, {}, {}
    for r in (4, 8, 12, 16):
        res = ex.cover_experiment(r, DET3, 3, 108, 2100, slack=60)
        good = (res.cover_time >= 0) & ~res.censored
        ok_counts[r] = int(good.sum())
        means[r] = float((res.cover_time[good] - r).mean())
        cens[r] = float(res.censored.mean())
        if r >= 8:
            coefs[r] = coefficient(means[r] + r, r)
    dt = time.perf_counter() - t0
    seq = [means[r] for r in (4, 8, 12, 16)]
    lo, hi = 0.3 * D2_COEFFICIENT, 4 * LIMIT_COEFFICIENT
    ok = (
        all(b >= a for a, b in zip(seq, seq[1:]))
        and all(means[r] >= 2 for r in (8, 12, 16))
        and all(c < 0.01 for c in cens.values())
        and all(n >= 2000 for n in ok_counts.values())
        and all(lo <= c <= hi for c in coefs.values())
    )
    detail = ", ".join(f"r={r}: excess={means[r]:.3f} cens={cens[r]:.4f} n={ok_counts[r]}" for r in means)
    report(8, ok, f"{detail}; finite-size coefficients {({r: round(c, 3) for r, c in coefs.items()})}; runtime={dt:.0f}s")


def test_c09_lower_implication(report):
    total, checked = 0, 0
    for thr in (None, [math.inf, 3.0, 20.0, 100.0]):
        rep = ex.lower_bound_experiment([2, 4, 6, 8], 3, DET3, 3, 2000, 109, thresholds=thr)
        for entry in rep["radii"]:
            for row in entry["rows"]:
                total += row["violations"]
                checked += row["checked"]
    report(9, total == 0, f"violations={total} over {checked} replica-level slow events at r in (2, 4, 6, 8), k <= 3")


def test_c10_determinism(report, tmp_path):
    runs = {
        "cover.csv": ["cover", "--r", "4,6", "--replicas", "600", "--dist", "poisson:3", "--block", "100"],
        "lower.csv": ["lower", "--r", "5", "--k", "2", "--replicas", "400", "--block", "100"],
        "freeze.csv": ["freeze", "--L", "4", "--k", "2", "--replicas", "5000", "--block", "1000", "--mode", "tree"],
    }
    same = {}
    for name, argv in runs.items():
        bodies = []
        for threads in (1, 4, 8):
            out = tmp_path / f"{name}-{threads}"
            with contextlib.redirect_stdout(io.StringIO()):
                main(argv + ["--seed", "110", "--threads", str(threads), "--out", str(out)])
            bodies.append((out / name).read_bytes().split(b"\n", 1)[1])
        same[name] = bodies[0] == bodies[1] == bodies[2] and len(bodies[0]) > 0
    report(10, all(same.values()), f"byte-identical CSV bodies under 1/4/8 workers: {same}")
