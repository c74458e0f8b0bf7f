import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwcover.scales import chain_delta_limit, lower_table, scale_table, upper_table


class TestLower:
    def test_n1(self):
        e = lower_table(2.0, 0.1, 1).entry(1)
        assert float(e.n) == pytest.approx(2**1.6, rel=1e-14)
        assert abs(float(e.n) - 3.0314) < 5e-5

    def test_first_radius_is_single_term(self):
        for M in (2.0, 4.0, 10.0):
            tab = lower_table(M, 0.1, 3)
            assert tab.entry(0).R == 0
            assert float(tab.entry(1).R) == pytest.approx(M**0.6, rel=1e-14)

    def test_p_closed_form(self):
        e = lower_table(4.0, 0.2, 3).entry(2)
        assert float(e.p) == pytest.approx(4.0 ** (-0.2 * 1.7 / 2), rel=1e-13)

    @given(st.floats(1.01, 50), st.floats(0.001, 0.249), st.integers(2, 8))
    def test_monotone(self, M, delta, k_max):
        es = lower_table(M, delta, k_max).entries
        for a, b in zip(es, es[1:]):
            assert b.n > a.n and b.R > a.R and b.p < a.p

    def test_overflow_flag(self):
        tab = lower_table(4.0, 0.1, 25)
        assert not tab.entry(3).overflow
        assert tab.entry(25).overflow
        assert tab.as_dict()["entries"][-1]["n"] == math.inf

    @pytest.mark.parametrize("M, delta", [(1.0, 0.1), (0.5, 0.1), (4.0, 0.0), (4.0, 0.25), (4.0, -0.1)])
    def test_range_errors(self, M, delta):
        with pytest.raises(ValueError):
            lower_table(M, delta, 3)


class TestUpper:
    def test_N1(self):
        e = upper_table(0.1, 1.0, 1).entry(1)
        assert float(e.n) == pytest.approx(math.exp(1.5) / 0.01, rel=1e-14)
        assert abs(float(e.n) - 448.17) < 5e-3
        assert e.R == 0

    def test_R2(self):
        e = upper_table(0.1, 1.0, 2).entry(2)
        assert float(e.R) == pytest.approx(math.exp(0.75), rel=1e-14)

    @given(st.floats(1e-3, 10), st.floats(0.01, 1.0), st.integers(2, 8))
    def test_monotone(self, a, delta, k_max):
        es = upper_table(a, delta, k_max).entries
        for x, y in zip(es, es[1:]):
            assert y.n > x.n and y.R > x.R

    @given(st.floats(0.01, 1.0), st.integers(2, 7))
    def test_chain_condition_matches_limit(self, delta, k):
        lim = chain_delta_limit(k)
        if abs(delta - lim) < 1e-9:
            return
        assert upper_table(0.1, delta, k).entry(k).chain_ok == (delta <= lim)

    @given(st.floats(1e-4, 100), st.floats(0.01, 1.0))
    def test_chain_condition_ignores_a(self, a, delta):
        ref = [e.chain_ok for e in upper_table(1.0, delta, 6).entries]
        assert [e.chain_ok for e in upper_table(a, delta, 6).entries] == ref

    def test_k1_always_chains(self):
        assert upper_table(0.1, 1.0, 1).entry(1).chain_ok

    def test_limit_values(self):
        with mpmath.workdps(30):
            e = [mpmath.exp(mpmath.mpf(1.5) ** j / 2) for j in range(1, 4)]
            assert chain_delta_limit(4) == pytest.approx(float((2 * e[-1] - sum(e)) / 4), rel=1e-12)
        with pytest.raises(ValueError):
            chain_delta_limit(1)

    @pytest.mark.parametrize("a, delta", [(0.0, 0.5), (-1.0, 0.5), (0.1, 0.0), (0.1, 1.5)])
    def test_range_errors(self, a, delta):
        with pytest.raises(ValueError):
            upper_table(a, delta, 2)


class TestDispatch:
    def test_kinds(self):
        assert scale_table("lower", {"M": 2.0, "delta": 0.1}, 2).kind == "lower"
        assert scale_table("upper", {"a": 0.1, "delta": 1.0}, 2).kind == "upper"

    def test_errors(self):
        with pytest.raises(ValueError):
            scale_table("middle", {}, 2)
        with pytest.raises(ValueError):
            scale_table("lower", {"M": 2.0, "delta": 0.1}, 0)

    def test_entry_missing(self):
        with pytest.raises(KeyError):
            scale_table("upper", {"a": 0.1, "delta": 1.0}, 2).entry(5)
