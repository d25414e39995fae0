import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qjcalorimeter.dynamics import JumpEvent, TrajectoryRecord, simulate_trajectory
from qjcalorimeter.model import Ideal, Macro, Micro
from qjcalorimeter.thermo import (
    boundary_log_probability,
    ift_estimator,
    jarzynski_estimator,
    path_entropy_production,
    reversed_record,
    total_entropy_production,
    work_of_trajectory,
)
from qjcalorimeter.validation import short_configs

CONFIGS = short_configs()


def record(events, q0=1, q1=0, k0=3, k1=None, n=5):
    heat = sum(1 if e.direction == "down" else -1 for e in events)
    k1 = k0 + heat if k1 is None else k1
    return TrajectoryRecord("macro", q0, q1, Macro(k0, n), Macro(k1, n), k0, k1, tuple(events))


def test_work_counts_qubit_change_plus_heat():
    rec = record([JumpEvent(1.0, "down", 3), JumpEvent(2.0, "up", 4), JumpEvent(3.0, "down", 3)], q0=0, q1=1)
    w = work_of_trajectory(rec)
    assert w.heat_to_calorimeter == 1
    assert w.work == 2


def test_boundary_macro_is_negative_binomial():
    cfg = CONFIGS["macro"]
    # log of (1/(1+e^-1)) * C(k+n-1, k) (1-e^-1)^n e^-k  at q=0, k=3, n=5
    expected = -math.log1p(math.exp(-1)) + math.log(35) + 5 * math.log(1 - math.exp(-1)) - 3
    assert boundary_log_probability(0, Macro(3, 5), cfg) == pytest.approx(expected, rel=1e-13)


def test_boundary_micro_sums_to_macro():
    cfg = CONFIGS["micro"]
    states = [Micro(nu) for nu in np.ndindex(4, 4, 4, 4, 4) if sum(nu) == 3]
    total = sum(math.exp(boundary_log_probability(1, s, cfg)) for s in states)
    assert total == pytest.approx(math.exp(boundary_log_probability(1, Macro(3, 5), cfg)), rel=1e-12)


@pytest.mark.parametrize("mode", ["micro", "macro", "ideal"])
def test_entropy_equals_beta_work(mode):
    # integer baths at one temperature: entropy production reduces to beta W
    cfg = CONFIGS[mode]
    for i in range(40):
        rec = simulate_trajectory(cfg, 3, i)
        assert total_entropy_production(rec, cfg) == pytest.approx(
            cfg.beta * work_of_trajectory(rec).work, abs=1e-9)


@pytest.mark.parametrize("mode", ["micro", "macro", "ideal", "gaussian"])
def test_path_probability_ratio(mode):
    cfg = CONFIGS[mode]
    for i in range(20):
        rec = simulate_trajectory(cfg, 21, i)
        a = path_entropy_production(rec, cfg)
        b = total_entropy_production(rec, cfg)
        assert abs(a - b) <= 1e-6 * max(abs(b), 1.0)


@pytest.mark.parametrize("mode", ["macro", "gaussian"])
def test_reversal_flips_entropy(mode):
    cfg = CONFIGS[mode]
    for i in range(10):
        rec = simulate_trajectory(cfg, 4, i)
        rev = reversed_record(rec, cfg)
        assert total_entropy_production(rev, cfg) == pytest.approx(-total_entropy_production(rec, cfg), abs=1e-9)


def test_estimators_on_known_samples():
    e = jarzynski_estimator(np.array([0, 0, 1, -1]), 1.0)
    vals = np.exp([0, 0, -1, 1])
    assert e.mean == pytest.approx(vals.mean())
    assert e.half_width == pytest.approx(1.96 * vals.std(ddof=1) / 2)
    assert ift_estimator(np.zeros(10)).mean == 1.0
    assert ift_estimator(np.zeros(10)).half_width == 0.0
    with pytest.raises(ValueError):
        ift_estimator([0.3])


@given(st.lists(st.integers(-20, 20), min_size=2, max_size=200), st.floats(0.1, 3.0))
def test_estimate_interval_is_symmetric(work, beta):
    e = jarzynski_estimator(np.array(work), beta)
    assert e.low <= e.mean <= e.high
    assert e.high - e.mean == pytest.approx(e.mean - e.low)
    assert e.contains(e.mean)


def test_ideal_boundary_has_no_bath_term():
    cfg = CONFIGS["ideal"]
    assert boundary_log_probability(0, Ideal(0.5), cfg) == pytest.approx(-math.log1p(math.exp(-1)))
