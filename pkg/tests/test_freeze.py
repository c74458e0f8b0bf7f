import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from brwcover.freeze import (
    ChainError,
    FreezeOutcome,
    FrozenConfig,
    TreeFreezeModel,
    freeze_1d,
    freeze_1d_batch,
    freeze_chain,
    freeze_chain_batch,
    freeze_tree,
    freeze_tree_batch,
)
from brwcover.offspring import OffspringDist, parse_dist
from brwcover.rng import stream
from brwcover.stats import homogeneity_pvalue, tv_binned, tv_to_law
from brwcover.tree import ROOT, distance, vertex, vertices_in_ball

DET3 = parse_dist("det:3")


def joint(batch) -> np.ndarray:
    return np.stack([batch.Y, batch.F], axis=1)


class TestFreezeTree:
    def test_start_at_target(self, rng):
        x = vertex(1, 0)
        out, cfg = freeze_tree([x, x, x], x, 1, DET3, rng)
        assert out == FreezeOutcome(3, 0, 3)
        assert cfg.size == 0 and cfg.at_target == 3

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            freeze_tree([], ROOT, 1, DET3, rng)

    def test_rejects_k0(self):
        with pytest.raises(ValueError):
            TreeFreezeModel([ROOT], vertex(0), 0, 3)

    def test_one_step_law(self):
        # one particle next to the target, k=1: children toward the target are frozen there
        b = freeze_tree_batch([ROOT], vertex(0), 1, DET3, stream(1), 50_000, d=3)
        assert np.all(b.S == 4) and np.all(b.Y + b.F == 3)
        law = {(y, 3 - y): sps.binom.pmf(y, 3, 1 / 3) for y in range(4)}
        assert tv_to_law([tuple(v) for v in joint(b)], law) < 0.01

    def test_frozen_config_counts(self, rng):
        target = vertex(0, 1, 1)
        out, cfg = freeze_tree([ROOT], target, 2, DET3, rng)
        assert cfg.size == out.F and cfg.at_target == out.Y
        assert cfg.k == 2 and cfg.target == target
        for v in cfg.away:
            assert v != target

    def test_cells_have_bounded_potential(self):
        target = vertex(0, 0, 0)
        model = TreeFreezeModel([ROOT], target, 3, 3)
        for v, a in model.cells:
            assert 0 <= a < 3
            assert distance(v, target) - 2 * a <= 3

    def test_martingale_distance_10(self):
        target = vertex(*([0] * 10))
        b = freeze_tree_batch([ROOT], target, 1, DET3, stream(2), 100_000, d=3)
        se = b.Y.std(ddof=1) / math.sqrt(len(b))
        assert abs(b.Y.mean() - 1) <= 3 * se

    @pytest.mark.parametrize("size", [1, 5, 20])
    def test_martingale_mixed_start(self, size):
        x = vertex(2, 1)
        ball = vertices_in_ball(3, 4)
        pick = stream(3, size).choice(len(ball), size=size)
        gamma = [ball[i] for i in pick]
        b = freeze_tree_batch(gamma, x, 1, parse_dist("poisson:3"), stream(4, size), 100_000, d=3)
        se = b.Y.std(ddof=1) / math.sqrt(len(b))
        assert abs(b.Y.mean() - size) <= 4 * se

    @pytest.mark.parametrize("spec", ["det:3", "poisson:3", "geom:3"])
    def test_expected_total_bound(self, spec):
        R, d = 5, 3
        b = freeze_tree_batch([ROOT], vertex(2, 0, 1, 0, 1), 1, parse_dist(spec), stream(5), 100_000, d=d)
        assert b.S.mean() <= (d + 1) * R
        assert np.all(b.S >= b.F + b.Y)

    def test_frozen_to_unfrozen_witness(self):
        R = 5
        b = freeze_tree_batch([ROOT], vertex(1, 0, 1, 0, 1), 1, parse_dist("geom:3"), stream(6), 100_000, d=3)
        ok = []
        for nu in np.arange(0.05, 0.46, 0.05):
            ok.append(all(np.mean(b.F + b.Y <= nu * b.S - R * M) <= R * math.exp(-nu * M) for M in (5, 10)))
        assert any(ok)

    def test_many_particles_lower_bound_decays(self):
        A, y = 4, vertex(0, 0, 0, 0)
        probs = {}
        for n in (1, 2, 4, 8, 16):
            b = freeze_tree_batch({ROOT: n}, y, 1, DET3, stream(7, n), 20_000, d=3)
            probs[n] = {dl: float(np.mean(b.F + b.Y <= dl * A * n)) for dl in (0.25, 0.5, 0.75, 1.0)}
        fitted = [dl for dl in (0.25, 0.5, 0.75, 1.0) if all(probs[n][dl] <= math.exp(-dl * n / A) for n in probs)]
        assert fitted
        seq = [probs[n][max(fitted)] for n in sorted(probs)]
        assert all(b <= a + 0.01 for a, b in zip(seq, seq[1:]))


class TestFreeze1D:
    def test_distance_zero(self, rng):
        assert freeze_1d(0, 3, 7, DET3, 3, rng) == FreezeOutcome(7, 0, 7)

    def test_one_step(self):
        b = freeze_1d_batch(1, 1, 1, DET3, 3, stream(8), 100_000)
        assert np.all(b.S == 4) and np.all(b.F == 3 - b.Y)
        law = {y: sps.binom.pmf(y, 3, 1 / 3) for y in range(4)}
        assert tv_to_law(b.Y.tolist(), law) < 0.01
        counts = np.bincount(b.Y, minlength=4)
        assert sps.chisquare(counts, 100_000 * np.array([law[y] for y in range(4)])).pvalue > 0.001

    def test_rejects_bad_args(self, rng):
        with pytest.raises(ValueError):
            freeze_1d(-1, 1, 1, DET3, 3, rng)
        with pytest.raises(ValueError):
            freeze_1d(2, 0, 1, DET3, 3, rng)

    def test_matches_tree(self):
        a = freeze_1d_batch(3, 2, 1, DET3, 3, stream(9, 1), 100_000)
        b = freeze_tree_batch([ROOT], vertex(0, 0, 0), 2, DET3, stream(9, 2), 100_000, d=3)
        assert tv_binned(joint(a), joint(b)) <= 0.02
        assert homogeneity_pvalue(joint(a), joint(b)) > 0.001

    @given(
        st.integers(1, 4), st.integers(1, 3), st.integers(1, 3),
        st.sampled_from(["det:3", "poisson:3", "geom:3"]), st.integers(0, 2**31),
    )
    def test_bookkeeping(self, L, k, n0, spec, seed):
        b = freeze_1d_batch(L, k, n0, parse_dist(spec), 3, stream(seed), 50)
        assert np.all(b.S >= b.F + b.Y)
        assert np.all(b.frozen.sum(axis=1) == b.F)
        # parity: a particle frozen after j toward and k away moves sits at L - j + k
        assert not b.frozen[:, 0].any()

    def test_exact_mean_of_y(self):
        b = freeze_1d_batch(6, 1, 4, parse_dist("poisson:3"), 3, stream(10), 100_000)
        se = b.Y.std(ddof=1) / math.sqrt(b.Y.size)
        assert abs(b.Y.mean() - 4) <= 4 * se


class TestChain:
    def test_empty(self, rng):
        cfg = FrozenConfig(vertex(0), 1)
        assert freeze_chain(cfg, vertex(0, 0), DET3, rng) == FreezeOutcome(0, 0, 0)

    def test_rejects_particles_at_target(self, rng):
        cfg = FrozenConfig(vertex(0), 1, {ROOT: 2}, at_target=1)
        with pytest.raises(ChainError):
            freeze_chain(cfg, vertex(0, 0), DET3, rng)

    def test_rejects_target_outside_subtree(self, rng):
        cfg = FrozenConfig(vertex(0), 1, {ROOT: 2})
        with pytest.raises(ChainError):
            freeze_chain(cfg, vertex(1, 0), DET3, rng)

    def test_batch_rejects_unconditioned(self):
        first = freeze_tree_batch([ROOT], vertex(0), 1, DET3, stream(1), 100, d=3)
        with pytest.raises(ChainError):
            freeze_chain_batch(first, vertex(0, 0), DET3, stream(2), 3)

    def test_single_and_batch_agree_in_law(self):
        x, y = vertex(0, 0), vertex(0, 0, 0, 0)
        first = freeze_tree_batch([ROOT], x, 1, DET3, stream(11), 4000, d=3)
        first = first.take(first.Y == 0)
        batch = freeze_chain_batch(first, y, DET3, stream(12), 3)
        rng = stream(13)
        single = [freeze_chain(first.frozen_config(i, x, 1), y, DET3, rng, 3) for i in range(len(first))]
        ys = np.array([o.Y for o in single])
        assert abs(ys.mean() - batch.Y.mean()) < 5 * math.sqrt(ys.var() / len(ys) + batch.Y.var() / len(batch))

    def test_chaining_identity(self):
        x, y = vertex(0, 0), vertex(0, 0, 0, 0)
        n = 250_000
        direct = freeze_tree_batch([ROOT], y, 2, DET3, stream(14, 1), n, d=3, record_arrivals=True)
        ok = direct.arrivals[:, direct.cells.index((x, 0))] == 0
        first = freeze_tree_batch([ROOT], x, 1, DET3, stream(14, 2), n, d=3)
        chained = freeze_chain_batch(first.take(first.Y == 0), y, DET3, stream(14, 3), 3)
        a, b = joint(direct.take(ok)), joint(chained)
        assert min(len(a), len(b)) >= 100_000
        assert tv_binned(a, b) <= 0.02
        assert homogeneity_pvalue(a, b) > 0.001


class TestCap:
    def test_event_cap(self, monkeypatch):
        import brwcover.freeze as fz

        monkeypatch.setattr(fz, "EVENT_CAP", 10)
        with pytest.raises(fz.FreezeCapExceeded):
            fz.freeze_1d(8, 2, 5, DET3, 3, stream(1))
