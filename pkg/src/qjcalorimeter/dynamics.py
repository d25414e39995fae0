"""Single-trajectory dynamics of the driven qubit.

Between jumps the qubit follows the non-unitary interaction-picture
Hamiltonian ``H(t) = V_I(t) - (i/2) diag(rate_up, rate_down)`` with first-order
stepping ``psi <- (1 - i H dt) psi`` and renormalisation.  A jump collapses
the qubit onto an eigenstate and moves one quantum into or out of the
calorimeter, after which the rates are re-evaluated from the new calorimeter
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as K
from .model import (
    CalorimeterState,
    DriveProtocol,
    GaussianTemp,
    Ideal,
    Macro,
    Micro,
    QubitState,
    SimulationConfig,
    drive_amplitude,
    sample_initial_calorimeter,
    sample_initial_qubit,
    thermal_occupation,
)
from .rates import (
    RatePair,
    entropy_production_down,
    entropy_production_up,
    gaussian_jump_entropy,
    rates_for,
    rates_ideal,
)
from .streams import trajectory_keys

SUPERPOSITION = 2  # label of an initial state that is not an eigenstate


class ConfigurationError(ValueError):
    pass


class TrajectoryError(RuntimeError):
    """A trajectory hit a domain error; ``index`` identifies it within the ensemble."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"trajectory {index}: {message}")
        self.index = index


def effective_hamiltonian(t: float, rates: RatePair, drive: DriveProtocol) -> np.ndarray:
    """Non-Hermitian generator in the ``{|0>, |1>}`` basis at time ``t``."""
    lam = drive_amplitude(t, drive)
    w = lam * complex(math.cos(t), math.sin(t))
    return np.array(
        [[-0.5j * rates.up, w.conjugate()], [w, -0.5j * rates.down]],
        dtype=np.complex128,
    )


@dataclass(frozen=True)
class JumpEvent:
    """One quantum exchanged with the calorimeter.

    ``pre_jump`` is the calorimeter energy before the jump (integer quanta,
    or the continuous energy in Gaussian mode).  ``entropy`` is the per-jump
    entropy production; zero for microstates.
    """

    time: float
    direction: str
    pre_jump: float
    mode_index: int | None = None
    entropy: float = 0.0
    step: int | None = None

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise ValueError(f"direction must be 'up' or 'down', got {self.direction!r}")


@dataclass
class TrajectoryRecord:
    bath_mode: str
    initial_qubit: int
    final_qubit: int
    initial_calorimeter: CalorimeterState
    final_calorimeter: CalorimeterState
    energy_initial: float
    energy_final: float
    events: tuple[JumpEvent, ...]
    sample_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    excited_population: np.ndarray = field(default_factory=lambda: np.zeros(0))
    calorimeter_energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_excited_population: float = float("nan")
    entropy_sum: float = 0.0

    @property
    def n_up(self) -> int:
        return sum(e.direction == "up" for e in self.events)

    @property
    def n_down(self) -> int:
        return sum(e.direction == "down" for e in self.events)


# ---------------------------------------------------------------- single steps


def step_no_jump(
    psi: QubitState, t: float, dt: float, rates: RatePair, drive: DriveProtocol
) -> tuple[QubitState, float, float]:
    """Advance ``psi`` by one no-jump step and return the two jump probabilities of the step.

    The probabilities ``dt * rate_up * |c0|^2`` and ``dt * rate_down * |c1|^2``
    are evaluated on the incoming state.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    p0 = abs(psi.c0) ** 2
    p1 = abs(psi.c1) ** 2
    dp_up = dt * rates.up * p0
    dp_down = dt * rates.down * p1
    if dp_up + dp_down >= K.DP_LIMIT:
        raise ConfigurationError(
            f"time step too coarse: jump probability {dp_up + dp_down:.3g} per step"
        )
    H = effective_hamiltonian(t, rates, drive)
    v = psi.as_array()
    v = v - 1j * dt * (H @ v)
    return QubitState(complex(v[0]), complex(v[1])).normalized(), dp_up, dp_down


def _jump_entropy(cal: CalorimeterState, direction: str, rates: RatePair, g2: float) -> float:
    if isinstance(cal, Micro):
        return 0.0
    if isinstance(cal, Macro):
        if direction == "down":
            return entropy_production_down(cal.k, cal.n)
        return entropy_production_up(cal.k, cal.n)
    if isinstance(cal, Ideal):
        r = rates.down / rates.up
        return math.log(r) if direction == "down" else -math.log(r)
    return gaussian_jump_entropy(cal, direction, g2)


def _shift(cal: CalorimeterState, direction: str, rng) -> tuple[CalorimeterState, int | None]:
    delta = 1 if direction == "down" else -1
    if isinstance(cal, Micro):
        nu = np.asarray(cal.nu, dtype=np.int64)
        weights = nu + 1 if direction == "down" else nu
        u = rng.random() * weights.sum()
        m = min(int(np.searchsorted(np.cumsum(weights), u, side="right")), len(nu) - 1)
        nu = nu.copy()
        nu[m] += delta
        return Micro(tuple(nu)), m
    if isinstance(cal, Macro):
        return Macro(cal.k + delta, cal.n), None
    if isinstance(cal, GaussianTemp):
        return replace(cal, E=cal.E + delta), None
    return cal, None


def decide_and_apply_jump(
    psi: QubitState,
    rates: RatePair,
    dp_up: float,
    dp_down: float,
    cal: CalorimeterState,
    rng,
    *,
    time: float = 0.0,
    g2: float = 0.025,
) -> tuple[QubitState, CalorimeterState, JumpEvent | None]:
    """Per-step jump decision with a single uniform against ``(dp_down, dp_down + dp_up)``.

    ``psi`` is the state already propagated through the step; it is kept
    when no jump happens.  In microstate mode a second uniform picks the
    oscillator.
    """
    if dp_up + dp_down >= 1.0:
        raise ConfigurationError("jump probabilities must sum to less than one")
    u = rng.random()
    if u < dp_down:
        direction = "down"
    elif u < dp_down + dp_up:
        direction = "up"
        if isinstance(cal, (Micro, Macro)) and _energy(cal) < 1:
            raise AssertionError("up-jump from an empty calorimeter")
    else:
        return psi, cal, None
    ds = _jump_entropy(cal, direction, rates, g2)
    new_cal, m = _shift(cal, direction, rng)
    new_psi = QubitState.ground() if direction == "down" else QubitState.excited()
    return new_psi, new_cal, JumpEvent(time, direction, _energy(cal), m, ds)


def _energy(cal: CalorimeterState) -> float:
    if isinstance(cal, Micro):
        return cal.k
    if isinstance(cal, Macro):
        return cal.k
    if isinstance(cal, GaussianTemp):
        return cal.E
    return float("nan")


# ---------------------------------------------------------------- compiled engine


@dataclass
class KernelOutput:
    out_int: np.ndarray
    out_float: np.ndarray
    pop: np.ndarray
    cal: np.ndarray
    ev_step: np.ndarray
    ev_down: np.ndarray
    ev_pre: np.ndarray
    ev_mode: np.ndarray
    ev_ds: np.ndarray
    ev_count: np.ndarray
    nu_init: np.ndarray
    flags: np.ndarray


def _initial_qubit_args(config: SimulationConfig) -> tuple[int, np.ndarray]:
    iq = config.initial_qubit
    if isinstance(iq, QubitState):
        psi = iq.normalized()
        if psi.c1 == 0:
            label = 0
        elif psi.c0 == 0:
            label = 1
        else:
            label = SUPERPOSITION
        return label, psi.as_array()
    if iq == "ground":
        return 0, np.array([1.0, 0.0], dtype=np.complex128)
    if iq == "excited":
        return 1, np.array([0.0, 1.0], dtype=np.complex128)
    return -1, np.zeros(2, dtype=np.complex128)


def run_kernel(
    config: SimulationConfig,
    keys: np.ndarray,
    *,
    event_cap: int = 0,
    nsteps: int | None = None,
    coupling: np.ndarray | None = None,
) -> KernelOutput:
    """Run the compiled engine for the trajectories identified by ``keys``.

    ``coupling`` (the drive table) may be passed in to avoid recomputing it
    for every chunk of a large ensemble.
    """
    proto = config.protocol
    steps = proto.total_steps if nsteps is None else nsteps
    if coupling is None:
        coupling = proto.coupling_table()
    coupling = coupling[:steps]
    w_re = np.ascontiguousarray(coupling.real)
    w_im = np.ascontiguousarray(coupling.imag)
    sample_idx = config.sample_steps() if nsteps is None else np.zeros(0, dtype=np.int64)
    ideal = rates_ideal(config.beta, config.n, config.gamma)
    gp = config.gaussian
    fixed_qubit, psi0 = _initial_qubit_args(config)
    M = len(keys)
    S = len(sample_idx)
    nmodes = config.n if config.bath_mode == "micro" else 1
    o = KernelOutput(
        out_int=np.zeros((M, K.N_INT), dtype=np.int64),
        out_float=np.zeros((M, K.N_FLOAT)),
        pop=np.zeros((M, S)),
        cal=np.zeros((M, S)),
        ev_step=np.zeros((M, event_cap), dtype=np.int64),
        ev_down=np.zeros((M, event_cap), dtype=np.bool_),
        ev_pre=np.zeros((M, event_cap)),
        ev_mode=np.zeros((M, event_cap), dtype=np.int64),
        ev_ds=np.zeros((M, event_cap)),
        ev_count=np.zeros(M, dtype=np.int64),
        nu_init=np.zeros((M, nmodes), dtype=np.int64),
        flags=np.zeros(M, dtype=np.int64),
    )
    K.run_trajectories(
        K.MODE_CODES[config.bath_mode], config.n, float(config.beta), float(config.gamma),
        float(gp.g2), float(gp.heat_capacity), float(gp.mean_energy(config.beta)),
        math.sqrt(gp.variance(config.beta)), gp.statistic == "fermion",
        float(ideal.up), float(ideal.down),
        fixed_qubit, psi0,
        -1 if config.initial_k is None else int(config.initial_k),
        w_re, w_im, float(proto.dt), steps,
        sample_idx, config.measurement == "calorimetric",
        np.ascontiguousarray(keys, dtype=np.uint64),
        o.out_int, o.out_float, o.pop, o.cal,
        o.ev_step, o.ev_down, o.ev_pre, o.ev_mode, o.ev_ds, o.ev_count,
        o.nu_init, o.flags,
    )
    return o


_FLAG_TEXT = {
    K.FLAG_NONPOSITIVE_T: "effective temperature became non-positive",
    K.FLAG_BOSE_POLE: "bosonic rate diverged",
    K.FLAG_EMPTY_UP: "up-jump from an empty calorimeter",
    K.FLAG_WAIT_FAILED: "calorimetric wait never produced a jump",
    K.FLAG_COARSE_STEP: "time step too coarse (jump probability per step >= 0.1)",
}


def check_flags(flags: np.ndarray, offset: int = 0) -> None:
    bad = np.flatnonzero(flags)
    if bad.size == 0:
        return
    i = int(bad[0])
    reasons = [text for bit, text in _FLAG_TEXT.items() if flags[i] & bit]
    if flags[i] & K.FLAG_COARSE_STEP and len(reasons) == 1:
        raise ConfigurationError(f"trajectory {offset + i}: {reasons[0]}")
    raise TrajectoryError("; ".join(reasons), offset + i)


def _calorimeter_states(config: SimulationConfig, o: KernelOutput, row: int, events):
    gp = config.gaussian
    mode = config.bath_mode
    if mode == "micro":
        nu0 = o.nu_init[row].copy()
        nu = nu0.copy()
        for e in events:
            nu[e.mode_index] += 1 if e.direction == "down" else -1
        return Micro(tuple(nu0)), Micro(tuple(nu))
    if mode == "macro":
        return (Macro(int(o.out_int[row, K.I_K0]), config.n),
                Macro(int(o.out_int[row, K.I_KN]), config.n))
    if mode == "ideal":
        bath = Ideal(thermal_occupation(config.beta))
        return bath, bath
    E0, sigma2 = gp.mean_energy(config.beta), gp.variance(config.beta)
    return (GaussianTemp(float(o.out_float[row, K.F_E0]), gp.heat_capacity, E0, sigma2, gp.statistic),
            GaussianTemp(float(o.out_float[row, K.F_EN]), gp.heat_capacity, E0, sigma2, gp.statistic))


def _record(config: SimulationConfig, o: KernelOutput, row: int) -> TrajectoryRecord:
    dt = config.dt
    count = int(o.ev_count[row])
    events = tuple(
        JumpEvent(
            time=float(o.ev_step[row, e] * dt),
            direction="down" if o.ev_down[row, e] else "up",
            pre_jump=float(o.ev_pre[row, e]),
            mode_index=int(o.ev_mode[row, e]) if o.ev_mode[row, e] >= 0 else None,
            entropy=float(o.ev_ds[row, e]),
            step=int(o.ev_step[row, e]),
        )
        for e in range(count)
    )
    cal0, cal1 = _calorimeter_states(config, o, row, events)
    gaussian = config.bath_mode == "gaussian"
    return TrajectoryRecord(
        bath_mode=config.bath_mode,
        initial_qubit=int(o.out_int[row, K.I_INIT]),
        final_qubit=int(o.out_int[row, K.I_FINAL]),
        initial_calorimeter=cal0,
        final_calorimeter=cal1,
        energy_initial=float(o.out_float[row, K.F_E0]) if gaussian else int(o.out_int[row, K.I_K0]),
        energy_final=float(o.out_float[row, K.F_EN]) if gaussian else int(o.out_int[row, K.I_KN]),
        events=events,
        sample_times=np.asarray(config.sample_times),
        excited_population=o.pop[row].copy(),
        calorimeter_energy=o.cal[row].copy(),
        final_excited_population=float(o.out_float[row, K.F_FINAL_POP]),
        entropy_sum=float(o.out_float[row, K.F_ENTROPY]),
    )


def simulate_trajectory(config: SimulationConfig, seed: int, index: int = 0) -> TrajectoryRecord:
    """Simulate trajectory ``index`` of the stream family ``seed``.

    The result is bit-identical to row ``index`` of an ensemble run with the
    same configuration and master seed.
    """
    keys = trajectory_keys(seed, index, 1)
    cap = 64
    while True:
        o = run_kernel(config, keys, event_cap=cap)
        check_flags(o.flags, index)
        if o.ev_count[0] <= cap:
            return _record(config, o, 0)
        cap = int(o.ev_count[0])


def first_jump_directions(
    psi: QubitState, cal: CalorimeterState, config: SimulationConfig, runs: int, seed: int
) -> np.ndarray:
    """Calorimetric measurement of ``psi``: wait undriven for the first jump.

    Returns, per run, 1 if the first jump was down (qubit found excited) and
    0 if it was up.  Runs start from ``psi`` and the fixed calorimeter state
    ``cal`` and use the time step of ``config``.
    """
    if isinstance(cal, Micro):
        cal = Macro(cal.k, cal.n)  # only the totals matter for the direction
    if isinstance(cal, Macro):
        cfg = replace(config, bath_mode="macro", n=cal.n, initial_k=cal.k)
    elif isinstance(cal, Ideal):
        cfg = replace(config, bath_mode="ideal", initial_k=0)
    else:
        raise ValueError("calorimetric wait supports micro, macro and ideal baths")
    cfg = replace(cfg, initial_qubit=psi.normalized(), measurement="calorimetric", sample_times=())
    o = run_kernel(cfg, trajectory_keys(seed, 0, runs), nsteps=0,
                   coupling=np.zeros(0, dtype=np.complex128))
    check_flags(o.flags)
    return o.out_int[:, K.I_FINAL].copy()


# ---------------------------------------------------------------- reference stepper


def _initial_calorimeter(config: SimulationConfig, rng: np.random.Generator) -> CalorimeterState:
    mode = config.bath_mode
    if mode in ("micro", "macro"):
        if config.initial_k is not None:
            return Macro(config.initial_k, config.n)
        return sample_initial_calorimeter(config.beta, config.n, mode, rng)
    if mode == "ideal":
        return Ideal(thermal_occupation(config.beta))
    gp = config.gaussian
    mean, var = gp.mean_energy(config.beta), gp.variance(config.beta)
    while True:
        E = rng.normal(mean, math.sqrt(var))
        if E > 0:
            return GaussianTemp(E, gp.heat_capacity, mean, var, gp.statistic)


def simulate_trajectory_stepwise(config: SimulationConfig, rng: np.random.Generator) -> TrajectoryRecord:
    """Literal per-step simulation built from :func:`step_no_jump` and :func:`decide_and_apply_jump`.

    One uniform per time step.  Much slower than :func:`simulate_trajectory`
    and statistically equivalent to it; used to cross-check the compiled
    engine on short protocols.
    """
    proto = config.protocol
    dt = proto.dt
    iq = config.initial_qubit
    if iq == "canonical":
        psi = sample_initial_qubit(config.beta, rng)
    else:
        psi = _initial_qubit_args(config)[1]
        psi = QubitState(complex(psi[0]), complex(psi[1]))
    label0 = 1 if psi.c1 == 1 else 0 if psi.c0 == 1 else SUPERPOSITION
    cal = _initial_calorimeter(config, rng)
    cal0 = cal
    energy = 0 if isinstance(cal, Ideal) else _energy(cal)
    energy0 = energy
    rates = rates_for(cal, config)
    sample_idx = config.sample_steps()
    pops, cals, events = [], [], []
    sp = 0
    entropy = 0.0
    for j in range(proto.total_steps + 1):
        while sp < len(sample_idx) and sample_idx[sp] == j:
            pops.append(psi.excited_population)
            cals.append(energy)
            sp += 1
        if j == proto.total_steps:
            break
        t = j * dt
        psi, dpu, dpd = step_no_jump(psi, t, dt, rates, proto)
        psi, cal, ev = decide_and_apply_jump(psi, rates, dpu, dpd, cal, rng, time=t, g2=config.gaussian.g2)
        if ev is not None:
            ev = replace(ev, pre_jump=energy, step=j)
            energy += 1 if ev.direction == "down" else -1
            entropy += ev.entropy
            events.append(ev)
            rates = rates_for(cal, config)
    p1 = psi.excited_population
    final = 1 if rng.random() < p1 else 0
    return TrajectoryRecord(
        bath_mode=config.bath_mode,
        initial_qubit=label0,
        final_qubit=final,
        initial_calorimeter=cal0,
        final_calorimeter=cal,
        energy_initial=energy0,
        energy_final=energy,
        events=tuple(events),
        sample_times=np.asarray(config.sample_times),
        excited_population=np.asarray(pops),
        calorimeter_energy=np.asarray(cals, dtype=float),
        final_excited_population=p1,
        entropy_sum=entropy,
    )
