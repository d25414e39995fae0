import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qjcalorimeter.model import GaussianTemp, Macro, Micro
from qjcalorimeter.rates import (
    check_detailed_balance,
    check_detailed_balance_gaussian,
    detailed_balance_sweep,
    entropy_production_down,
    entropy_production_up,
    gaussian_count_ratio,
    gaussian_jump_entropy,
    gaussian_rate_ratio,
    microstate_count,
    rates_gaussian,
    rates_gaussian_temperature,
    rates_ideal,
    rates_macro,
    rates_micro,
)


def test_frozen_microstate_counts():
    # stars and bars: C(k + n - 1, k)
    assert microstate_count(3, 2) == 4
    assert microstate_count(10, 5) == 1001
    assert microstate_count(0, 7) == 1


def test_macro_rates():
    r = rates_macro(3, 5, 0.1)
    assert r.up == pytest.approx(0.3)
    assert r.down == pytest.approx(0.8)
    assert rates_macro(0, 5, 0.1).up == 0


def test_ideal_rates_are_thermal_average_of_macro():
    nbar = 1 / math.expm1(1.0)
    r = rates_ideal(1.0, 4, 0.01)
    assert r.up == pytest.approx(0.04 * nbar)
    assert r.down / r.up == pytest.approx(math.e)


def test_micro_rates_per_mode():
    mr = rates_micro(Micro((0, 2, 1)), 0.5)
    assert mr.up_modes.tolist() == [0.0, 1.0, 0.5]
    assert mr.down_modes.tolist() == [0.5, 1.5, 1.0]
    assert mr.totals == rates_macro(3, 3, 0.5)


@given(st.integers(1, 2000), st.integers(1, 400))
def test_detailed_balance_is_exact(k, n):
    db = check_detailed_balance(k, n, 0.025 / n)
    assert db.equal


def test_sweep_small():
    assert detailed_balance_sweep(200, 3, Fraction(1, 40)).all()


@given(st.lists(st.integers(0, 30), min_size=1, max_size=12), st.floats(1e-4, 1.0))
def test_micro_totals_equal_macro(nu, gamma):
    assert rates_micro(Micro(tuple(nu)), gamma).totals == rates_macro(sum(nu), len(nu), gamma)


@given(st.integers(1, 500), st.integers(1, 50))
def test_macro_entropy_matches_log_rate_ratio(k, n):
    # entropy of a down jump from k equals log of the up/down rate ratio across the jump
    g = 0.01
    expected = math.log(rates_macro(k + 1, n, g).up / rates_macro(k, n, g).down)
    assert entropy_production_down(k, n) == pytest.approx(-expected, rel=1e-12)
    assert entropy_production_up(k, n) == pytest.approx(-entropy_production_down(k - 1, n), rel=1e-12)


def test_gaussian_rates_fermion_and_boson():
    s = GaussianTemp(10.0, 10.0, 10.0, 10.0, "fermion")
    r = rates_gaussian_temperature(s, 0.5)
    assert r.down == pytest.approx(0.5 / (1 + math.exp(-1)))
    assert r.up / r.down == pytest.approx(math.exp(-1))
    b = rates_gaussian_temperature(GaussianTemp(10.0, 10.0, 10.0, 10.0, "boson"), 0.5)
    assert b.up / b.down == pytest.approx(math.exp(-1))


def test_gaussian_up_channel_closed_below_one_quantum():
    s = GaussianTemp(0.7, 10.0, 10.0, 10.0, "fermion")
    assert rates_gaussian(s, 0.5).up == 0.0
    assert rates_gaussian(s, 0.5).down > 0
    with pytest.raises(ValueError):
        rates_gaussian_temperature(GaussianTemp(-1.0, 10.0, 10.0, 10.0), 0.5)


def test_gaussian_detailed_balance_broken():
    # at the mean energy the two sides of the relation disagree
    s = GaussianTemp(100.0, 100.0, 100.0, 100.0, "boson")
    count = gaussian_count_ratio(100.0, 100.0, 100.0, 1.0)
    rate = gaussian_rate_ratio(s, 0.025)
    assert not math.isclose(count, rate, rel_tol=1e-6)
    assert not check_detailed_balance_gaussian(s, 0.025, 1.0).equal


def test_gaussian_jump_entropy_is_log_rate_ratio():
    s = GaussianTemp(9.0, 10.0, 10.0, 10.0, "fermion")
    down = gaussian_jump_entropy(s, "down", 0.5)
    fwd = rates_gaussian(s, 0.5).down
    rev = rates_gaussian(GaussianTemp(10.0, 10.0, 10.0, 10.0, "fermion"), 0.5).up
    assert down == pytest.approx(math.log(fwd / rev))


def test_macro_state_valid():
    with pytest.raises(ValueError):
        rates_macro(-1, 3, 0.1)
    assert Macro(0, 1).k == 0
