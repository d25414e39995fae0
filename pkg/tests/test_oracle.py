import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from qjcalorimeter.model import (
    DriveProtocol,
    GaussianParams,
    QubitState,
    SimulationConfig,
    excited_probability,
    uniform_sample_times,
)
from qjcalorimeter.oracle import (
    BoundaryOverflow,
    first_jump_probabilities,
    hybrid_master_evolve,
    jarzynski_expectation,
    lindblad_two_level,
    work_generating_function,
)
from qjcalorimeter.rates import RatePair

PROTO = DriveProtocol(0.05, 5, (True, False, True, False), 20_000)


def sim(mode="macro", n=5, **kw):
    return SimulationConfig(mode, n, 1.0, 0.025 / n, PROTO, sample_times=uniform_sample_times(PROTO, 50), **kw)


def test_trace_and_distribution():
    s = hybrid_master_evolve(sim())
    assert np.max(np.abs(s.trace - 1)) < 1e-12
    np.testing.assert_allclose(s.k_distribution.sum(axis=1), s.trace, atol=1e-12)
    assert s.excited_population[0] == pytest.approx(excited_probability(1.0))


def test_ideal_hybrid_equals_lindblad():
    c = sim("ideal")
    a = hybrid_master_evolve(c).excited_population
    b = lindblad_two_level(1.0, 5, 0.005, PROTO, c.sample_times)
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_undriven_canonical_is_stationary():
    proto = DriveProtocol(0.05, 3, (False,), 5000)
    c = SimulationConfig("macro", 5, 1.0, 0.005, proto, sample_times=uniform_sample_times(proto, 10))
    s = hybrid_master_evolve(c)
    np.testing.assert_allclose(s.excited_population, excited_probability(1.0), atol=1e-12)
    np.testing.assert_allclose(s.mean_k, 5 / math.expm1(1.0), rtol=1e-6)


def test_boundary_overflow_detected():
    with pytest.raises(BoundaryOverflow):
        hybrid_master_evolve(sim(), k_max=4, grow=False)


@pytest.mark.parametrize("mode", ["macro", "ideal"])
def test_generating_function_is_one_at_beta(mode):
    assert jarzynski_expectation(sim(mode)) == pytest.approx(1.0, abs=1e-12)
    assert work_generating_function(sim(mode), 0.0) == pytest.approx(1.0, abs=1e-12)


def test_generating_function_gaussian_differs_from_one():
    c = sim("gaussian", gaussian=GaussianParams(10.0, 0.5, "fermion"))
    assert work_generating_function(c, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert abs(jarzynski_expectation(c) - 1.0) > 1e-3


def test_hybrid_rejects_gaussian():
    with pytest.raises(ValueError):
        hybrid_master_evolve(sim("gaussian"))


@given(st.floats(0.0, math.pi), st.floats(0.0, 2 * math.pi), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_first_jump_direction_is_population(theta, phi, up, down):
    psi = QubitState(math.cos(theta / 2), math.sin(theta / 2) * complex(math.cos(phi), math.sin(phi)))
    fj = first_jump_probabilities(psi, RatePair(up, down))
    assert fj.p_down == pytest.approx(abs(psi.normalized().c1) ** 2, abs=1e-15)
    assert fj.p_up + fj.p_down + fj.p_never == pytest.approx(1.0)


def test_first_jump_waiting_density_normalised():
    fj = first_jump_probabilities(QubitState(0.6, 0.8), RatePair(0.2, 0.5))
    t = np.linspace(0, 200, 200_001)
    assert trapezoid(fj.waiting_density(t), t) == pytest.approx(1.0, abs=1e-6)
    assert fj.mean_wait == pytest.approx(0.36 / 0.2 + 0.64 / 0.5)
    zero_up = first_jump_probabilities(QubitState(0.6, 0.8), RatePair(0.0, 0.5))
    assert zero_up.p_never == pytest.approx(0.36)
    with pytest.raises(ValueError):
        first_jump_probabilities(QubitState(0.6, 0.8), RatePair(0.0, 0.0))


def test_lindblad_from_excited_relaxes():
    proto = DriveProtocol(0.0, 40, (False,), 20_000)
    out = lindblad_two_level(1.0, 1, 0.1, proto, [0.0, proto.duration], "excited")
    assert out[0] == 1.0
    assert out[1] == pytest.approx(excited_probability(1.0), abs=1e-6)


def test_micro_and_macro_share_oracle():
    a = hybrid_master_evolve(sim("macro")).excited_population
    b = hybrid_master_evolve(replace(sim("macro"), bath_mode="micro")).excited_population
    np.testing.assert_array_equal(a, b)
