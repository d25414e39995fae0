import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qjcalorimeter.dynamics import (
    ConfigurationError,
    decide_and_apply_jump,
    effective_hamiltonian,
    first_jump_directions,
    simulate_trajectory,
    simulate_trajectory_stepwise,
    step_no_jump,
)
from qjcalorimeter.ensemble import EnsembleConfig, run_ensemble
from qjcalorimeter.model import (
    DriveProtocol,
    GaussianParams,
    GaussianTemp,
    Ideal,
    Macro,
    Micro,
    QubitState,
    SimulationConfig,
    uniform_sample_times,
)
from qjcalorimeter.rates import RatePair

SHORT = DriveProtocol(0.3, 2, (True, False), 800)


def cfg(mode="macro", **kw):
    base = dict(n=5, beta=1.0, gamma=0.1, protocol=SHORT, sample_times=uniform_sample_times(SHORT, 11))
    if mode == "gaussian":
        base["gaussian"] = GaussianParams(heat_capacity=10.0, g2=0.3)
    base.update(kw)
    return SimulationConfig(mode, **base)


class Fixed:
    def __init__(self, *u):
        self.u = list(u)

    def random(self):
        return self.u.pop(0)


def test_effective_hamiltonian_shape():
    H = effective_hamiltonian(1.0, RatePair(0.2, 0.4), SHORT)
    assert H[0, 0] == pytest.approx(-0.1j)
    assert H[1, 1] == pytest.approx(-0.2j)
    assert H[0, 1] == pytest.approx(np.conj(H[1, 0]))


def test_no_jump_step_undriven_decay():
    # without drive the amplitudes shrink by 1 - rate*dt/2 before renormalisation
    off = DriveProtocol(0.3, 1, (False,), 100)
    psi = QubitState(1 / math.sqrt(2), 1 / math.sqrt(2))
    out, dpu, dpd = step_no_jump(psi, 0.0, 0.01, RatePair(0.2, 0.6), off)
    a, b = 1 - 0.001, 1 - 0.003
    assert dpu == pytest.approx(0.001) and dpd == pytest.approx(0.003)
    assert abs(out.c1) ** 2 == pytest.approx(b**2 / (a**2 + b**2))


def test_coarse_step_rejected():
    with pytest.raises(ConfigurationError):
        step_no_jump(QubitState.excited(), 0.0, 1.0, RatePair(0.0, 0.5), SHORT)


def test_jump_decision_thresholds():
    psi = QubitState(0.6, 0.8)
    cal = Macro(3, 5)
    r = RatePair(0.3, 0.8)
    _, c, ev = decide_and_apply_jump(psi, r, 0.01, 0.02, cal, Fixed(0.015))
    assert ev.direction == "down" and c == Macro(4, 5)
    _, c, ev = decide_and_apply_jump(psi, r, 0.01, 0.02, cal, Fixed(0.025))
    assert ev.direction == "up" and c == Macro(2, 5)
    p, c, ev = decide_and_apply_jump(psi, r, 0.01, 0.02, cal, Fixed(0.5))
    assert ev is None and p is psi and c is cal


def test_micro_jump_picks_occupied_mode():
    _, c, ev = decide_and_apply_jump(QubitState.ground(), RatePair(0.1, 0.2), 0.05, 0.0,
                                     Micro((0, 1, 0)), Fixed(0.01, 0.7))
    assert ev.mode_index == 1 and c == Micro((0, 0, 0))


@pytest.mark.parametrize("mode", ["micro", "macro", "ideal", "gaussian"])
def test_record_bookkeeping(mode):
    c = cfg(mode)
    for i in range(30):
        rec = simulate_trajectory(c, 11, i)
        times = [e.time for e in rec.events]
        assert times == sorted(times)
        if mode != "ideal":
            assert rec.energy_final - rec.energy_initial == pytest.approx(rec.n_down - rec.n_up)
        if mode == "gaussian":
            assert isinstance(rec.final_calorimeter, GaussianTemp) and rec.final_calorimeter.E > 0
        if mode == "ideal":
            assert isinstance(rec.final_calorimeter, Ideal)
        assert rec.initial_qubit in (0, 1) and rec.final_qubit in (0, 1)
        assert len(rec.excited_population) == 11


def test_single_trajectory_matches_ensemble_row():
    c = cfg("macro")
    res = run_ensemble(EnsembleConfig(c, 40, 99), threads=1)
    for i in (0, 17, 39):
        rec = simulate_trajectory(c, 99, i)
        assert rec.n_up == res.n_up[i] and rec.n_down == res.n_down[i]
        assert rec.final_qubit == res.final_qubit[i]
        assert rec.final_excited_population == res.final_population[i]


def test_kernel_and_stepwise_agree_in_law():
    c = cfg("macro")
    M = 400
    rng = np.random.default_rng(5)
    ref = [simulate_trajectory_stepwise(c, rng) for _ in range(M)]
    ens = run_ensemble(EnsembleConfig(c, 20_000, 5))
    for name, a, b in (
        ("down jumps", np.array([r.n_down for r in ref], float), ens.n_down.astype(float)),
        ("final population", np.array([r.final_excited_population for r in ref]), ens.final_population),
    ):
        se = math.sqrt(a.var(ddof=1) / M + b.var(ddof=1) / b.size)
        assert abs(a.mean() - b.mean()) < 5 * se, name


def test_first_jump_frequency():
    psi = QubitState(0.6, 0.8j)
    c = SimulationConfig("macro", 5, 1.0, 0.1, DriveProtocol(0.0, 1, (False,), 300))
    d = first_jump_directions(psi, Macro(2, 5), c, 20_000, 3)
    sigma = math.sqrt(0.64 * 0.36 / d.size)
    assert abs(d.mean() - 0.64) < 5 * sigma


def test_empty_calorimeter_never_jumps_up():
    c = cfg("macro", initial_k=0, initial_qubit="ground")
    for i in range(20):
        rec = simulate_trajectory(c, 1, i)
        k = rec.energy_initial
        for e in rec.events:
            assert e.pre_jump == k
            k += 1 if e.direction == "down" else -1
            assert k >= 0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.0, 2 * math.pi))
def test_no_jump_step_preserves_norm(theta, t):
    psi = QubitState(math.cos(theta / 2), math.sin(theta / 2))
    out, dpu, dpd = step_no_jump(psi, t, SHORT.dt, RatePair(0.3, 0.5), SHORT)
    assert out.norm2 == pytest.approx(1.0, abs=1e-12)
    assert 0 <= dpu + dpd < 0.1


def test_trajectory_determinism():
    c = replace(cfg("micro"), n=3)
    a = simulate_trajectory(c, 5, 8)
    b = simulate_trajectory(c, 5, 8)
    assert a.events == b.events
