import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwcover.pakes import InversionError, PakesLaw, chernoff_rhs, pakes_tail, pakes_transform
from brwcover.rng import stream


class TestTransform:
    def test_examples(self):
        assert pakes_transform(0.0, 3.0) == 1.0
        x = math.sqrt(2.0)
        assert pakes_transform(0.5, 2.0) == pytest.approx(x / math.sinh(x), rel=1e-14)
        assert abs(pakes_transform(1e-8, 1.0) - (1 - 2e-8 / 6)) <= 1e-15

    def test_series_branch_continuous(self):
        # just below and above the switch to the closed form
        for x in (0.0999999, 0.1000001):
            theta = x * x / 2
            assert pakes_transform(theta, 1.0) == pytest.approx(x / math.sinh(x), rel=1e-13)

    @given(st.floats(1e-6, 50), st.floats(1e-3, 10))
    def test_range_and_decreasing(self, theta, s2):
        v = pakes_transform(theta, s2)
        assert 0 < v <= 1
        assert pakes_transform(theta * 1.01, s2) < v

    def test_large_theta(self):
        assert 0 < pakes_transform(1e5, 1.0) < 1e-100


class TestTail:
    def test_near_zero(self):
        assert pakes_tail(1e-6, 1.0) >= 0.999
        assert abs(pakes_tail(1e-6, 1.0) - 1) <= 1e-3

    def test_first_moment(self):
        assert abs(PakesLaw(2.0).moment(1) - 2.0 / 3.0) <= 1e-5

    def test_second_moment(self):
        assert abs(PakesLaw(1.0).moment(2) - 7.0 / 45.0) <= 1e-4

    def test_monotone_on_grid(self):
        law = PakesLaw(1.0)
        vals = [law.tail(g) for g in np.linspace(0.01, 3, 120)]
        assert all(0 <= v <= 1 for v in vals)
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_error_estimate(self):
        _, err = PakesLaw(1.0).tail_with_error(0.5)
        assert err <= 1e-6

    @pytest.mark.parametrize("theta", [0.1, 1.0, 10.0])
    def test_retransform(self, theta):
        law = PakesLaw(1.0)
        assert abs(law.retransform(theta) - law.transform(theta)) <= 1e-4

    def test_scaling_law(self):
        s2 = 2.5
        for g in np.linspace(0.05, 4, 30):
            assert abs(pakes_tail(g, s2) - pakes_tail(g / s2, 1.0)) <= 1e-6

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            pakes_tail(0.0, 1.0)
        with pytest.raises(ValueError):
            PakesLaw(0.0)

    def test_non_convergence_reports_partial_sums(self):
        law = PakesLaw(1.0, terms=1, euler=1, A=2.0)
        with pytest.raises(InversionError) as info:
            law.tail_with_error(0.3)
        assert info.value.partial_sums.size > 0


class TestChernoff:
    def test_values(self):
        assert chernoff_rhs(0) == 1.0
        assert chernoff_rhs(8) == pytest.approx(math.exp(-1))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            chernoff_rhs(-1)

    @given(st.integers(1, 60), st.floats(0.05, 0.95))
    def test_bound_holds_exactly(self, n, p):
        from scipy import stats

        ex = n * p
        assert stats.binom.cdf(math.floor(ex / 2), n, p) <= chernoff_rhs(ex) + 1e-12

    def test_binomial_mc(self):
        x = stream(99).binomial(100, 0.5, size=1_000_000)
        assert (x <= 25).mean() <= chernoff_rhs(50)
