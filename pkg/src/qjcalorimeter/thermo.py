"""Work, heat and entropy production of trajectories, and the fluctuation-theorem estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, log_ndtr

from .dynamics import SUPERPOSITION, JumpEvent, TrajectoryRecord
from .model import (
    CalorimeterState,
    GaussianTemp,
    Ideal,
    Macro,
    Micro,
    SimulationConfig,
)
from .rates import microstate_count, rates_for, rates_micro

Z_CRIT = 1.96


@dataclass(frozen=True)
class ThermoSample:
    work: int
    heat_to_calorimeter: int
    delta_S: float
    initial_qubit: int
    final_qubit: int
    energy_initial: float
    energy_final: float


def work_of_trajectory(rec: TrajectoryRecord, delta_S: float = float("nan")) -> ThermoSample:
    """Work = change of qubit energy + heat released into the calorimeter, in quanta."""
    if rec.initial_qubit not in (0, 1) or rec.final_qubit not in (0, 1):
        raise ValueError("work needs measured eigenstate labels at both ends")
    heat = rec.n_down - rec.n_up
    return ThermoSample(
        work=(rec.final_qubit - rec.initial_qubit) + heat,
        heat_to_calorimeter=heat,
        delta_S=delta_S,
        initial_qubit=rec.initial_qubit,
        final_qubit=rec.final_qubit,
        energy_initial=rec.energy_initial,
        energy_final=rec.energy_final,
    )


# ---------------------------------------------------------------- boundary terms


def _log_qubit_gibbs(q: int, beta: float) -> float:
    if q not in (0, 1):
        raise ValueError("boundary probability needs a qubit eigenstate")
    return -beta * q - math.log1p(math.exp(-beta))


def _log_gaussian(E: float, mean: float, var: float) -> float:
    if not E > 0:
        raise ValueError(f"bath energy {E} has zero probability")
    sd = math.sqrt(var)
    # density of the normal truncated to E > 0
    return (-0.5 * (E - mean) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
            - float(log_ndtr(mean / sd)))


def boundary_log_probability(
    qubit: int, cal: CalorimeterState, config: SimulationConfig, beta: float | None = None
) -> float:
    """Log-probability of ``(qubit, calorimeter)`` in the canonical ensemble at ``beta``.

    Microstate: a specific occupation pattern.  Macrostate: the total ``k``,
    so the microstate count enters.  Ideal bath: qubit only.  Gaussian bath:
    truncated normal density of the bath energy with ``C/beta`` mean (or the
    configured one) and ``C/beta^2`` variance.
    """
    b = config.beta if beta is None else beta
    lq = _log_qubit_gibbs(qubit, b)
    if isinstance(cal, Ideal):
        return lq
    if isinstance(cal, GaussianTemp):
        gp = config.gaussian
        return lq + _log_gaussian(cal.E, gp.mean_energy(b), gp.variance(b))
    if isinstance(cal, (Micro, Macro)):
        k, n = cal.k, cal.n
        lc = -b * k + n * math.log(-math.expm1(-b))
        if isinstance(cal, Macro):
            lc += math.log(microstate_count(k, n))
        return lq + lc
    raise TypeError(f"unknown calorimeter state {cal!r}")


def _boundary_pair(rec: TrajectoryRecord, config: SimulationConfig) -> tuple[float, float]:
    reverse_beta = config.reverse_beta if config.reverse_beta is not None else config.beta
    initial = boundary_log_probability(rec.initial_qubit, rec.initial_calorimeter, config)
    final = boundary_log_probability(rec.final_qubit, rec.final_calorimeter, config, reverse_beta)
    return initial, final


def total_entropy_production(rec: TrajectoryRecord, config: SimulationConfig) -> float:
    """Boundary log-ratio plus the per-jump entropy recorded along the trajectory."""
    if rec.initial_qubit == SUPERPOSITION:
        raise ValueError("entropy production needs an eigenstate at the start")
    initial, final = _boundary_pair(rec, config)
    return initial - final + math.fsum(e.entropy for e in rec.events)


def thermo_sample(rec: TrajectoryRecord, config: SimulationConfig) -> ThermoSample:
    return work_of_trajectory(rec, total_entropy_production(rec, config))


# ---------------------------------------------------------------- ensembles, vectorised


def ensemble_work(init_q: np.ndarray, final_q: np.ndarray, n_up: np.ndarray, n_down: np.ndarray) -> np.ndarray:
    return (final_q - init_q) + (n_down - n_up)


def _log_boundary_vec(q, energy, config: SimulationConfig, beta: float) -> np.ndarray:
    q = np.asarray(q)
    if np.any((q != 0) & (q != 1)):
        raise ValueError("boundary probability needs qubit eigenstates")
    out = -beta * q - math.log1p(math.exp(-beta))
    mode = config.bath_mode
    if mode == "ideal":
        return out
    if mode == "gaussian":
        gp = config.gaussian
        mean, var = gp.mean_energy(beta), gp.variance(beta)
        E = np.asarray(energy, dtype=float)
        if np.any(E <= 0):
            raise ValueError("bath energy with zero probability")
        return out + (-0.5 * (E - mean) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
                      - float(log_ndtr(mean / math.sqrt(var))))
    k = np.asarray(energy, dtype=float)
    n = config.n
    out = out - beta * k + n * math.log(-math.expm1(-beta))
    if mode == "macro":
        out = out + gammaln(k + n) - gammaln(k + 1) - gammaln(n)
    return out


def ensemble_entropy_production(
    init_q, final_q, energy_initial, energy_final, jump_entropy, config: SimulationConfig
) -> np.ndarray:
    """Vectorised :func:`total_entropy_production` from per-trajectory summaries."""
    reverse_beta = config.reverse_beta if config.reverse_beta is not None else config.beta
    return (_log_boundary_vec(init_q, energy_initial, config, config.beta)
            - _log_boundary_vec(final_q, energy_final, config, reverse_beta)
            + np.asarray(jump_entropy, dtype=float))


# ---------------------------------------------------------------- estimators


@dataclass(frozen=True)
class Estimate:
    """Exponential average with its normal-approximation 95% interval."""

    mean: float
    half_width: float
    std: float
    count: int
    sample_max: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def as_dict(self) -> dict:
        return {"mean": self.mean, "ci_half_width": self.half_width, "std": self.std,
                "M": self.count, "sample_max": self.sample_max}


def _exp_average(x: np.ndarray) -> Estimate:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    e = np.exp(-x)
    sd = float(np.std(e, ddof=1))
    return Estimate(float(np.mean(e)), Z_CRIT * sd / math.sqrt(e.size), sd, int(e.size), float(e.max()))


def ift_estimator(delta_S) -> Estimate:
    """Sample mean of ``exp(-delta_S)``."""
    return _exp_average(delta_S)


def jarzynski_estimator(work, beta: float) -> Estimate:
    """Sample mean of ``exp(-beta W)``; the target is 1 when the drive vanishes at both ends."""
    return _exp_average(beta * np.asarray(work, dtype=float))


# ---------------------------------------------------------------- path probabilities


def _segments(rec: TrajectoryRecord, config: SimulationConfig):
    """Calorimeter state in force at each step and the jump (if any) that ends the step."""
    cal_states = [rec.initial_calorimeter]
    jumps: dict[int, JumpEvent] = {}
    for e in rec.events:
        if e.step is None:
            raise ValueError("trajectory probability needs step indices of the jumps")
        if e.step in jumps:
            raise ValueError("two jumps in one time step")
        jumps[e.step] = e
    for e in rec.events:
        cal_states.append(_after(cal_states[-1], e))
    return jumps, cal_states


def _after(cal: CalorimeterState, e: JumpEvent) -> CalorimeterState:
    d = 1 if e.direction == "down" else -1
    if isinstance(cal, Micro):
        nu = list(cal.nu)
        nu[e.mode_index] += d
        return Micro(tuple(nu))
    if isinstance(cal, Macro):
        return Macro(cal.k + d, cal.n)
    if isinstance(cal, GaussianTemp):
        return replace(cal, E=cal.E + d)
    return cal


def _channel_rate(cal: CalorimeterState, direction: str, mode_index: int | None,
                  config: SimulationConfig) -> float:
    if isinstance(cal, Micro):
        r = rates_micro(cal, config.gamma)
        return float((r.down_modes if direction == "down" else r.up_modes)[mode_index])
    r = rates_for(cal, config)
    return r.down if direction == "down" else r.up


def _reverse_direction(d: str) -> str:
    return "up" if d == "down" else "down"


def _step(c0: complex, c1: complex, w: complex, gu: float, gd: float, dt: float, adjoint: bool):
    au = 1.0 - 0.5 * dt * gu
    ad = 1.0 - 0.5 * dt * gd
    s = 1j if adjoint else -1j
    return au * c0 + s * dt * w.conjugate() * c1, ad * c1 + s * dt * w * c0


def _renorm(c0: complex, c1: complex) -> tuple[complex, complex, float]:
    s = math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    if s == 0.0:
        return c0, c1, -math.inf
    return c0 / s, c1 / s, math.log(s)


def _basis(q: int) -> tuple[complex, complex]:
    return (1.0 + 0j, 0j) if q == 0 else (0j, 1.0 + 0j)


def _apply_jump(c0: complex, c1: complex, direction: str) -> tuple[complex, complex]:
    # sigma_minus moves |1> to |0>; sigma_plus the other way
    return (c1, 0j) if direction == "down" else (0j, c0)


def _log_abs2(x: complex) -> float:
    a = abs(x)
    return 2.0 * math.log(a) if a > 0 else -math.inf


def trajectory_log_probability(rec: TrajectoryRecord, direction: str, config: SimulationConfig) -> float:
    """Log path density of a recorded trajectory, without the common ``dt^N`` factor.

    ``forward``: initial boundary, rates of the jump channels at the pre-jump
    calorimeter states, and the squared overlap of ``<f|`` with the
    no-jump/jump product applied to ``|i>``.  ``reverse``: final boundary
    (at the reverse temperature), reverse-channel rates at the post-jump
    states, and the overlap built from adjoint steps in reverse order
    starting from ``|f>``.  Amplitudes are renormalised every step and the
    logs of the norms accumulated, so long products do not underflow.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    if rec.initial_qubit not in (0, 1) or rec.final_qubit not in (0, 1):
        raise ValueError("path probability needs eigenstates at both ends")
    proto = config.protocol
    dt = proto.dt
    w_table = proto.coupling_table()
    jumps, cal_states = _segments(rec, config)
    rate_pairs = [rates_for(c, config) for c in cal_states]

    # index of the calorimeter state in force during each step
    seg = np.zeros(proto.total_steps, dtype=np.int64)
    for i, e in enumerate(rec.events):
        seg[e.step + 1:] = i + 1

    boundary_i, boundary_f = _boundary_pair(rec, config)
    log_norm = 0.0
    if direction == "forward":
        log_rates = 0.0
        for i, e in enumerate(rec.events):
            log_rates += math.log(_channel_rate(cal_states[i], e.direction, e.mode_index, config))
        c0, c1 = _basis(rec.initial_qubit)
        for j in range(proto.total_steps):
            r = rate_pairs[seg[j]]
            c0, c1 = _step(c0, c1, complex(w_table[j]), r.up, r.down, dt, adjoint=False)
            if j in jumps:
                c0, c1 = _apply_jump(c0, c1, jumps[j].direction)
            c0, c1, ln = _renorm(c0, c1)
            log_norm += ln
        overlap = (c0, c1)[rec.final_qubit]
        return boundary_i + log_rates + 2.0 * log_norm + _log_abs2(overlap)

    log_rates = 0.0
    for i, e in enumerate(rec.events):
        # reverse channel, evaluated at the state the forward jump produced
        log_rates += math.log(_channel_rate(cal_states[i + 1], _reverse_direction(e.direction),
                                            e.mode_index, config))
    c0, c1 = _basis(rec.final_qubit)
    for j in range(proto.total_steps - 1, -1, -1):
        if j in jumps:
            # adjoint of the forward jump operator
            c0, c1 = _apply_jump(c0, c1, _reverse_direction(jumps[j].direction))
        r = rate_pairs[seg[j]]
        c0, c1 = _step(c0, c1, complex(w_table[j]), r.up, r.down, dt, adjoint=True)
        c0, c1, ln = _renorm(c0, c1)
        log_norm += ln
    overlap = (c0, c1)[rec.initial_qubit]
    return boundary_f + log_rates + 2.0 * log_norm + _log_abs2(overlap)


def path_entropy_production(rec: TrajectoryRecord, config: SimulationConfig) -> float:
    """Entropy production as the log-ratio of forward and reverse path densities."""
    return (trajectory_log_probability(rec, "forward", config)
            - trajectory_log_probability(rec, "reverse", config))


def reversed_record(rec: TrajectoryRecord, config: SimulationConfig) -> TrajectoryRecord:
    """The time-reversed counterpart: endpoints swapped, jumps inverted and in reverse order.

    Per-jump entropies are recomputed for the reversed jumps, so that
    ``total_entropy_production`` of the result equals minus that of ``rec``
    when forward and reverse boundaries share one temperature.
    """
    from .dynamics import _jump_entropy

    _, cal_states = _segments(rec, config)
    total = config.protocol.total_steps
    events = []
    for i in range(len(rec.events) - 1, -1, -1):
        e = rec.events[i]
        post = cal_states[i + 1]
        d = _reverse_direction(e.direction)
        pre_energy = _energy_of(post, e)
        events.append(JumpEvent(
            time=config.protocol.duration - e.time,
            direction=d,
            pre_jump=pre_energy,
            mode_index=e.mode_index,
            entropy=_jump_entropy(post, d, rates_for(post, config), config.gaussian.g2),
            step=None if e.step is None else total - 1 - e.step,
        ))
    return TrajectoryRecord(
        bath_mode=rec.bath_mode,
        initial_qubit=rec.final_qubit,
        final_qubit=rec.initial_qubit,
        initial_calorimeter=rec.final_calorimeter,
        final_calorimeter=rec.initial_calorimeter,
        energy_initial=rec.energy_final,
        energy_final=rec.energy_initial,
        events=tuple(events),
        entropy_sum=math.fsum(e.entropy for e in events),
    )


def _energy_of(cal: CalorimeterState, e: JumpEvent) -> float:
    if isinstance(cal, Ideal):
        return e.pre_jump + (1 if e.direction == "down" else -1)
    if isinstance(cal, GaussianTemp):
        return cal.E
    return cal.k
