"""Domain types shared by the whole package.

Units are natural throughout: hbar = omega_0 = k_B = 1.  The qubit gap and
every calorimeter oscillator share the same gap, so energies are counted in
integer quanta, times are in units of 1/omega_0 and rates in units of
omega_0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

TWO_PI = 2.0 * math.pi

BathMode = Literal["micro", "macro", "ideal", "gaussian"]
BATH_MODES = ("micro", "macro", "ideal", "gaussian")


@dataclass(frozen=True)
class QubitState:
    """Pure qubit state ``c0|0> + c1|1>`` in the undriven eigenbasis."""

    c0: complex
    c1: complex

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(0j, 1.0 + 0j)

    @property
    def norm2(self) -> float:
        return abs(self.c0) ** 2 + abs(self.c1) ** 2

    @property
    def excited_population(self) -> float:
        return abs(self.c1) ** 2

    def normalized(self) -> "QubitState":
        s = math.sqrt(self.norm2)
        if s == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return QubitState(complex(self.c0) / s, complex(self.c1) / s)

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=np.complex128)


@dataclass(frozen=True)
class DriveProtocol:
    """Piecewise sinusoidal drive ``lambda(t) = amplitude * sin(t)``.

    The protocol consists of ``len(segment_mask)`` segments of
    ``segment_periods`` drive periods each; the drive is on in a segment when
    its mask entry is true.  The sine uses absolute protocol time, so the
    phase is continuous across segments.
    """

    amplitude: float
    segment_periods: int
    segment_mask: tuple[bool, ...]
    total_steps: int

    def __post_init__(self):
        object.__setattr__(self, "segment_mask", tuple(bool(m) for m in self.segment_mask))
        if self.segment_periods < 1:
            raise ValueError("segment_periods must be >= 1")
        if not self.segment_mask:
            raise ValueError("segment_mask must contain at least one segment")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")

    @property
    def n_segments(self) -> int:
        return len(self.segment_mask)

    @property
    def segment_duration(self) -> float:
        return self.segment_periods * TWO_PI

    @property
    def duration(self) -> float:
        return self.n_segments * self.segment_duration

    @property
    def dt(self) -> float:
        return self.duration / self.total_steps

    @property
    def ends_driven(self) -> bool:
        return self.segment_mask[-1]

    def segment_of(self, t: float) -> int:
        return min(int(t // self.segment_duration), self.n_segments - 1)

    def step_times(self) -> np.ndarray:
        """Left end point ``t_j = j*dt`` of every time step."""
        return np.arange(self.total_steps) * self.dt

    def step_segments(self) -> np.ndarray:
        # integer arithmetic keeps segment boundaries exact
        j = np.arange(self.total_steps, dtype=np.int64)
        return (j * self.n_segments) // self.total_steps

    def coupling_table(self) -> np.ndarray:
        """Interaction-picture drive matrix element ``lambda(t_j) exp(i t_j)`` per step."""
        t = self.step_times()
        on = np.asarray(self.segment_mask, dtype=bool)[self.step_segments()]
        lam = np.where(on, self.amplitude * np.sin(t), 0.0)
        return lam * np.exp(1j * t)


def drive_amplitude(t: float, p: DriveProtocol) -> float:
    """Drive strength ``lambda(t)``; zero in the segments where the drive is off."""
    tol = 1e-9 * max(1.0, p.duration)
    if not (-tol <= t <= p.duration + tol):
        raise ValueError(f"t={t} outside protocol [0, {p.duration}]")
    if not p.segment_mask[p.segment_of(max(t, 0.0))]:
        return 0.0
    return p.amplitude * math.sin(t)


@dataclass(frozen=True)
class Micro:
    """Calorimeter microstate: occupation number of each oscillator."""

    nu: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(int(v) for v in self.nu))
        if not self.nu or min(self.nu) < 0:
            raise ValueError("occupations must be non-negative and n >= 1")

    @property
    def k(self) -> int:
        return sum(self.nu)

    @property
    def n(self) -> int:
        return len(self.nu)


@dataclass(frozen=True)
class Macro:
    """Calorimeter macrostate: total number of quanta over ``n`` oscillators."""

    k: int
    n: int

    def __post_init__(self):
        if self.k < 0 or self.n < 1:
            raise ValueError("macrostate needs k >= 0 and n >= 1")


@dataclass(frozen=True)
class Ideal:
    """Infinite bath frozen at thermal occupation ``nbar``."""

    nbar: float


@dataclass(frozen=True)
class GaussianTemp:
    """Bath energy ``E`` with constant heat capacity and temperature ``T = E/C``."""

    E: float
    C: float
    E0: float
    sigma2: float
    statistic: Literal["boson", "fermion"] = "boson"

    def __post_init__(self):
        if self.C <= 0 or self.sigma2 <= 0:
            raise ValueError("heat capacity and variance must be positive")
        if self.statistic not in ("boson", "fermion"):
            raise ValueError(f"unknown statistic {self.statistic!r}")

    @property
    def temperature(self) -> float:
        return self.E / self.C


CalorimeterState = Union[Micro, Macro, Ideal, GaussianTemp]


@dataclass(frozen=True)
class CouplingConfig:
    """Per-quantum jump rate ``gamma = |g|^2`` for ``n`` oscillators at inverse temperature ``beta``."""

    gamma: float
    n: int
    beta: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @classmethod
    def normalized(cls, n: int, beta: float = 1.0, total: float = 0.025) -> "CouplingConfig":
        """Coupling with ``gamma = total / n`` so the summed strength is independent of n."""
        return cls(total / n, n, beta)


@dataclass(frozen=True)
class GaussianParams:
    """Settings of the effective-temperature bath.

    ``E0`` defaults to ``C / beta`` so that the mean effective temperature
    equals the preparation temperature.
    """

    heat_capacity: float = 100.0
    g2: float = 0.025
    statistic: Literal["boson", "fermion"] = "boson"
    E0: float | None = None

    def mean_energy(self, beta: float) -> float:
        return self.heat_capacity / beta if self.E0 is None else self.E0

    def variance(self, beta: float) -> float:
        return self.heat_capacity / beta**2


InitialQubit = Union[Literal["canonical", "ground", "excited"], QubitState]


@dataclass(frozen=True)
class SimulationConfig:
    """Everything that determines the law of a single trajectory."""

    bath_mode: BathMode
    n: int
    beta: float
    gamma: float
    protocol: DriveProtocol
    sample_times: tuple[float, ...] = ()
    gaussian: GaussianParams = field(default_factory=GaussianParams)
    initial_qubit: InitialQubit = "canonical"
    initial_k: int | None = None
    reverse_beta: float | None = None
    measurement: Literal["projective", "calorimetric"] = "projective"

    def __post_init__(self):
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if self.bath_mode not in BATH_MODES:
            raise ValueError(f"unknown bath mode {self.bath_mode!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.reverse_beta is not None and self.reverse_beta <= 0:
            raise ValueError("reverse_beta must be positive")
        ts = self.sample_times
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample_times must be sorted")
        tol = 1e-9 * max(1.0, self.protocol.duration)
        if ts and (ts[0] < -tol or ts[-1] > self.protocol.duration + tol):
            raise ValueError("sample_times must lie within the protocol")
        if isinstance(self.initial_qubit, str):
            if self.initial_qubit not in ("canonical", "ground", "excited"):
                raise ValueError(f"unknown initial qubit {self.initial_qubit!r}")
        if self.initial_k is not None:
            if self.initial_k < 0:
                raise ValueError("initial_k must be >= 0")
            if self.bath_mode in ("micro", "gaussian"):
                raise ValueError("a fixed initial_k is only meaningful in macro or ideal mode")
        if self.measurement not in ("projective", "calorimetric"):
            raise ValueError(f"unknown measurement {self.measurement!r}")

    @property
    def dt(self) -> float:
        return self.protocol.dt

    @property
    def canonical_start(self) -> bool:
        return self.initial_qubit == "canonical" and self.initial_k is None

    def sample_steps(self) -> np.ndarray:
        """Step index at which each sample time is recorded (state after that many steps)."""
        idx = np.rint(np.asarray(self.sample_times, dtype=float) / self.dt).astype(np.int64)
        return np.clip(idx, 0, self.protocol.total_steps)


def uniform_sample_times(protocol: DriveProtocol, count: int = 400) -> tuple[float, ...]:
    return tuple(np.linspace(0.0, protocol.duration, count))


def thermal_occupation(beta: float) -> float:
    """Bose-Einstein occupation ``1/(e^beta - 1)`` of one oscillator."""
    return 1.0 / math.expm1(beta)


def excited_probability(beta: float) -> float:
    """Gibbs weight of the excited qubit state."""
    w = math.exp(-beta)
    return w / (1.0 + w)


def sample_initial_qubit(beta: float, rng: np.random.Generator) -> QubitState:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if rng.random() < excited_probability(beta):
        return QubitState.excited()
    return QubitState.ground()


def sample_initial_calorimeter(
    beta: float, n: int, mode: Literal["micro", "macro"], rng: np.random.Generator
) -> Micro | Macro:
    """Draw a calorimeter state from the canonical ensemble at ``beta``.

    Each oscillator occupation is geometric, ``P(nu) = (1 - e^-beta) e^(-beta nu)``;
    the total of ``n`` of them is negative binomial.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    p = -math.expm1(-beta)
    if mode == "micro":
        # numpy's geometric counts trials, starting at 1
        return Micro(tuple(int(v) for v in rng.geometric(p, size=n) - 1))
    if mode == "macro":
        return Macro(int(rng.negative_binomial(n, p)), n)
    raise ValueError(f"mode must be 'micro' or 'macro', got {mode!r}")
