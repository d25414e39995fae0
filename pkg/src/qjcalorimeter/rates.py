"""Transition rates between the qubit and the calorimeter.

Four bath models are supported:

* microstate and macrostate calorimeters made of ``n`` oscillators that share
  the qubit gap (rates linear in the stored quanta),
* the ideal infinite bath whose rates stay at their thermal values,
* a bath with Gaussian energy fluctuations whose rates follow the standard
  thermal form at the effective temperature ``T = E / C``.

Only the last one breaks the finite-bath detailed-balance relation
``rate_down(k-1) / rate_up(k) = N(k) / N(k-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from .model import (
    CalorimeterState,
    GaussianTemp,
    Ideal,
    Macro,
    Micro,
    SimulationConfig,
    thermal_occupation,
)

# relative distance from the bosonic pole at which rates are refused
BOSE_POLE_TOL = 1e-12


@dataclass(frozen=True)
class RatePair:
    """Qubit excitation (``up``) and de-excitation (``down``) rates."""

    up: float
    down: float

    @property
    def total(self) -> float:
        return self.up + self.down


@dataclass(frozen=True)
class MicroRates:
    up_modes: np.ndarray
    down_modes: np.ndarray
    totals: RatePair


def rates_macro(k: int, n: int, gamma: float) -> RatePair:
    """Rates of a macrostate with ``k`` quanta: ``up = gamma k``, ``down = gamma (k + n)``."""
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    return RatePair(gamma * k, gamma * (k + n))


def rates_micro(state: Micro, gamma: float) -> MicroRates:
    """Per-oscillator rates of a microstate.

    Absorbing a quantum from oscillator ``m`` goes as ``nu_m``, emitting into
    it as ``nu_m + 1``.
    """
    nu = np.asarray(state.nu, dtype=np.int64)
    up_w = nu
    down_w = nu + 1
    # totals from the exact integer weights so they match rates_macro bit for bit
    totals = RatePair(gamma * int(up_w.sum()), gamma * int(down_w.sum()))
    return MicroRates(gamma * up_w.astype(float), gamma * down_w.astype(float), totals)


def rates_ideal(beta: float, n: int, gamma: float) -> RatePair:
    """Thermal average of the macrostate rates; frozen for the whole protocol."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    nbar = thermal_occupation(beta)
    return RatePair(gamma * n * nbar, gamma * n * (nbar + 1.0))


def rates_gaussian_temperature(state: GaussianTemp, g2: float, gap: float = 1.0) -> RatePair:
    """Standard thermal rates evaluated at the effective temperature ``E / C``.

    ``down = g2 / (1 +- e^(-gap/T))`` and ``up = g2 / (e^(gap/T) +- 1)`` with
    ``+`` for fermions and ``-`` for bosons.
    """
    T = state.E / state.C
    if not T > 0:
        raise ValueError(f"effective temperature must be positive, got T={T}")
    x = math.exp(-gap / T)
    if state.statistic == "fermion":
        denom = 1.0 + x
    else:
        denom = -math.expm1(-gap / T)
        if denom <= BOSE_POLE_TOL:
            raise OverflowError(f"bosonic rate diverges at T={T}")
    return RatePair(g2 * x / denom, g2 / denom)


def rates_gaussian(state: GaussianTemp, g2: float, gap: float = 1.0) -> RatePair:
    """Effective-temperature rates with the up channel closed below one quantum.

    The bath cannot hand over a quantum it does not have, so for ``E <= gap``
    the up rate is zero and the energy stays positive.
    """
    r = rates_gaussian_temperature(state, g2, gap)
    if state.E <= gap:
        return RatePair(0.0, r.down)
    return r


def rates_for(cal: CalorimeterState, config: SimulationConfig) -> RatePair:
    """Total rates for any calorimeter state under ``config``."""
    if isinstance(cal, Micro):
        return rates_micro(cal, config.gamma).totals
    if isinstance(cal, Macro):
        return rates_macro(cal.k, cal.n, config.gamma)
    if isinstance(cal, Ideal):
        return rates_ideal(config.beta, config.n, config.gamma)
    if isinstance(cal, GaussianTemp):
        return rates_gaussian(cal, config.gaussian.g2)
    raise TypeError(f"unknown calorimeter state {cal!r}")


def microstate_count(k: int, n: int) -> int:
    """Number of ways to put ``k`` quanta into ``n`` oscillators, exactly."""
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    return math.comb(k + n - 1, n - 1)


@dataclass(frozen=True)
class DetailedBalance:
    rate_ratio: float | Fraction
    count_ratio: float | Fraction
    equal: bool


def check_detailed_balance(k: int, n: int, gamma: float) -> DetailedBalance:
    """Compare ``rate_down(k-1)/rate_up(k)`` with ``N(k)/N(k-1)`` as exact rationals."""
    if k < 1:
        raise ValueError("detailed balance needs k >= 1")
    g = Fraction(gamma)
    lower = rates_macro(k - 1, n, g)
    upper = rates_macro(k, n, g)
    rate_ratio = Fraction(lower.down) / Fraction(upper.up)
    count_ratio = Fraction(microstate_count(k, n), microstate_count(k - 1, n))
    return DetailedBalance(rate_ratio, count_ratio, rate_ratio == count_ratio)


def detailed_balance_sweep(k_max: int, n: int, gamma: float = 1.0) -> np.ndarray:
    """Exact check of the relation for every ``k`` in ``[1, k_max]``.

    Cross-multiplied integer form ``down(k-1) N(k-1) == up(k) N(k)``.  The
    rates are taken at unit ``gamma`` (which makes them integers) after
    checking that ``gamma`` enters only as a common factor.  Returns a
    boolean per ``k``.
    """
    probe = max(k_max, 1)
    if not (rates_macro(probe, n, gamma).up == gamma * rates_macro(probe, n, 1).up
            and rates_macro(probe, n, gamma).down == gamma * rates_macro(probe, n, 1).down):
        raise AssertionError("rates are not proportional to gamma")
    ok = np.empty(k_max, dtype=bool)
    n_prev = gmpy2.comb(n - 1, n - 1)
    for k in range(1, k_max + 1):
        n_k = gmpy2.comb(k + n - 1, n - 1)
        ok[k - 1] = rates_macro(k - 1, n, 1).down * n_prev == rates_macro(k, n, 1).up * n_k
        n_prev = n_k
    return ok


def gaussian_count_ratio(E: float, E0: float, sigma2: float, beta: float, gap: float = 1.0) -> float:
    """``N(E) / N(E - gap)`` implied by Gaussian canonical energy fluctuations."""
    return math.exp(gap * (beta + (gap - 2.0 * (E - E0)) / (2.0 * sigma2)))


def gaussian_rate_ratio(state: GaussianTemp, g2: float, gap: float = 1.0) -> float:
    """``rate_down(E - gap) / rate_up(E)`` with effective-temperature rates."""
    lower = GaussianTemp(state.E - gap, state.C, state.E0, state.sigma2, state.statistic)
    return rates_gaussian_temperature(lower, g2, gap).down / rates_gaussian_temperature(state, g2, gap).up


def check_detailed_balance_gaussian(
    state: GaussianTemp, g2: float, beta: float, rtol: float = 1e-9
) -> DetailedBalance:
    count = gaussian_count_ratio(state.E, state.E0, state.sigma2, beta)
    rate = gaussian_rate_ratio(state, g2)
    return DetailedBalance(rate, count, math.isclose(rate, count, rel_tol=rtol))


def entropy_production_up(k: int, n: int) -> float:
    """Boltzmann entropy change ``ln N(k-1)/N(k)`` of an up-jump that starts at ``k`` quanta."""
    if k < 1:
        raise ValueError("an up-jump needs at least one quantum in the calorimeter")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.log(k / (k + n - 1))


def entropy_production_down(k: int, n: int) -> float:
    """Entropy change of a down-jump that starts at ``k`` quanta; equals ``-entropy_production_up(k+1)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return -entropy_production_up(k + 1, n)


def gaussian_jump_entropy(state: GaussianTemp, direction: str, g2: float) -> float:
    """``ln(rate_forward(E) / rate_reverse(E'))`` for a jump out of energy ``E``."""
    if direction == "down":
        after = GaussianTemp(state.E + 1.0, state.C, state.E0, state.sigma2, state.statistic)
        return math.log(
            rates_gaussian_temperature(state, g2).down / rates_gaussian_temperature(after, g2).up
        )
    after = GaussianTemp(state.E - 1.0, state.C, state.E0, state.sigma2, state.statistic)
    return math.log(rates_gaussian_temperature(state, g2).up / rates_gaussian_temperature(after, g2).down)
