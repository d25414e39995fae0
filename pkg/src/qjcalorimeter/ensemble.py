"""Ensembles of trajectories: parallel execution, aggregation and comparison.

Trajectory ``i`` always uses the random streams of ``(master_seed, i)`` and
the ensemble is cut into fixed chunks whose partial sums are combined in
chunk order, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernel as K
from .dynamics import check_flags, run_kernel
from .model import SimulationConfig
from .streams import trajectory_keys
from .thermo import (
    Estimate,
    ensemble_entropy_production,
    ensemble_work,
    ift_estimator,
    jarzynski_estimator,
)

CHUNK = 1024


@dataclass(frozen=True)
class EnsembleConfig:
    simulation: SimulationConfig
    trajectories: int
    master_seed: int = 2015

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")


def config_dict(config: EnsembleConfig) -> dict:
    d = asdict(config)
    sim = d["simulation"]
    iq = config.simulation.initial_qubit
    if not isinstance(iq, str):
        sim["initial_qubit"] = {"c0": [iq.c0.real, iq.c0.imag], "c1": [iq.c1.real, iq.c1.imag]}
    sim["protocol"]["segment_mask"] = list(sim["protocol"]["segment_mask"])
    sim["sample_times"] = list(sim["sample_times"])
    return d


def config_hash(config: EnsembleConfig) -> str:
    blob = json.dumps(config_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    config_hash: str
    # per trajectory
    initial_qubit: np.ndarray
    final_qubit: np.ndarray
    n_up: np.ndarray
    n_down: np.ndarray
    energy_initial: np.ndarray
    energy_final: np.ndarray
    work: np.ndarray
    delta_S: np.ndarray
    final_population: np.ndarray
    tail_population: np.ndarray
    # time series
    times: np.ndarray
    population_mean: np.ndarray
    population_sigma: np.ndarray
    calorimeter_mean: np.ndarray
    # summaries
    jarzynski: Estimate | None
    ift: Estimate | None
    wall_time: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def trajectories(self) -> int:
        return len(self.work)

    def work_histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Counts on the contiguous integer range spanned by the samples and 0."""
        lo = min(int(self.work.min()), 0)
        hi = max(int(self.work.max()), 0)
        values = np.arange(lo, hi + 1)
        counts = np.bincount(self.work - lo, minlength=hi - lo + 1)
        return values, counts


def _tail_columns(sim: SimulationConfig) -> np.ndarray:
    """Sample indices inside the last protocol segment, used for the tail average."""
    times = np.asarray(sim.sample_times)
    start = (sim.protocol.n_segments - 1) * sim.protocol.segment_duration
    return np.flatnonzero(times >= start - 1e-9 * sim.protocol.duration)


def _run_chunk(sim: SimulationConfig, seed: int, start: int, count: int, coupling, tail_cols):
    o = run_kernel(sim, trajectory_keys(seed, start, count), coupling=coupling)
    check_flags(o.flags, start)
    tail = o.pop[:, tail_cols].mean(axis=1) if tail_cols.size else o.out_float[:, K.F_FINAL_POP]
    return (o.out_int, o.out_float, tail,
            o.pop.sum(axis=0), o.cal.sum(axis=0))


def run_ensemble(config: EnsembleConfig, threads: int | None = None, chunk: int = CHUNK) -> EnsembleResult:
    """Simulate ``config.trajectories`` trajectories and aggregate them."""
    sim = config.simulation
    M = config.trajectories
    threads = threads or os.cpu_count() or 1
    coupling = sim.protocol.coupling_table()
    tail_cols = _tail_columns(sim)
    starts = list(range(0, M, chunk))
    t0 = time.perf_counter()
    args = [(sim, config.master_seed, s, min(chunk, M - s), coupling, tail_cols) for s in starts]
    if threads == 1 or len(starts) == 1:
        parts = [_run_chunk(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _run_chunk(*a), args))
    wall = time.perf_counter() - t0

    out_int = np.concatenate([p[0] for p in parts])
    out_float = np.concatenate([p[1] for p in parts])
    tail = np.concatenate([p[2] for p in parts])
    S = len(sim.sample_times)
    pop_sum = np.zeros(S)
    cal_sum = np.zeros(S)
    for p in parts:  # fixed chunk order
        pop_sum += p[3]
        cal_sum += p[4]
    pop_mean = pop_sum / M
    cal_mean = cal_sum / M

    init_q = out_int[:, K.I_INIT]
    final_q = out_int[:, K.I_FINAL]
    gaussian = sim.bath_mode == "gaussian"
    e0 = out_float[:, K.F_E0] if gaussian else out_int[:, K.I_K0]
    en = out_float[:, K.F_EN] if gaussian else out_int[:, K.I_KN]
    work = ensemble_work(init_q, final_q, out_int[:, K.I_NUP], out_int[:, K.I_NDOWN])

    eigen_ends = np.all((init_q == 0) | (init_q == 1)) and np.all((final_q == 0) | (final_q == 1))
    if eigen_ends:
        dS = ensemble_entropy_production(init_q, final_q, e0, en, out_float[:, K.F_ENTROPY], sim)
    else:
        dS = np.full(M, np.nan)
    jar = jarzynski_estimator(work, sim.beta) if M >= 2 else None
    ift = ift_estimator(dS) if M >= 2 and eigen_ends else None

    return EnsembleResult(
        config=config,
        config_hash=config_hash(config),
        initial_qubit=init_q,
        final_qubit=final_q,
        n_up=out_int[:, K.I_NUP],
        n_down=out_int[:, K.I_NDOWN],
        energy_initial=np.asarray(e0),
        energy_final=np.asarray(en),
        work=work,
        delta_S=dS,
        final_population=out_float[:, K.F_FINAL_POP],
        tail_population=tail,
        times=np.asarray(sim.sample_times),
        population_mean=pop_mean,
        population_sigma=np.sqrt(np.clip(pop_mean * (1.0 - pop_mean), 0.0, None) / M),
        calorimeter_mean=cal_mean,
        jarzynski=jar,
        ift=ift,
        wall_time=wall,
        metadata={"seed": config.master_seed, "trajectories": M, "chunk": chunk},
    )


# ---------------------------------------------------------------- comparison


@dataclass
class Comparison:
    work_values: np.ndarray
    delta_p: np.ndarray
    delta_p_sigma: np.ndarray
    population_difference: np.ndarray
    population_sigma: np.ndarray
    tail_difference: float
    tail_sigma: float
    paired: bool
    jarzynski_delta: float
    ift_delta: float


def _same_protocol(a: SimulationConfig, b: SimulationConfig) -> bool:
    return (a.protocol == b.protocol and a.beta == b.beta and a.sample_times == b.sample_times)


def compare_runs(a: EnsembleResult, b: EnsembleResult) -> Comparison:
    """Differences ``a - b`` of work distribution, populations and estimators.

    When both runs share master seed and size, trajectory ``i`` of the two
    runs uses the same random numbers and the tail-population difference is
    given the paired standard error; otherwise the independent one.
    """
    sa, sb = a.config.simulation, b.config.simulation
    if not _same_protocol(sa, sb):
        raise ValueError("runs differ in protocol, beta or sample times")
    va, ca = a.work_histogram()
    vb, cb = b.work_histogram()
    lo, hi = min(va[0], vb[0]), max(va[-1], vb[-1])
    values = np.arange(lo, hi + 1)
    pa = np.zeros(len(values))
    pb = np.zeros(len(values))
    pa[va - lo] = ca / a.trajectories
    pb[vb - lo] = cb / b.trajectories
    sigma = np.sqrt(pa * (1 - pa) / a.trajectories + pb * (1 - pb) / b.trajectories)

    paired = (a.config.master_seed == b.config.master_seed and a.trajectories == b.trajectories)
    if paired:
        d = a.tail_population - b.tail_population
        tail_sigma = float(np.std(d, ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
        tail_diff = float(d.mean())
    else:
        tail_diff = float(a.tail_population.mean() - b.tail_population.mean())
        tail_sigma = math.sqrt(_sem2(a.tail_population) + _sem2(b.tail_population))

    def delta(x: Estimate | None, y: Estimate | None) -> float:
        return float("nan") if x is None or y is None else x.mean - y.mean

    return Comparison(
        work_values=values,
        delta_p=pa - pb,
        delta_p_sigma=sigma,
        population_difference=a.population_mean - b.population_mean,
        population_sigma=np.hypot(a.population_sigma, b.population_sigma),
        tail_difference=tail_diff,
        tail_sigma=tail_sigma,
        paired=paired,
        jarzynski_delta=delta(a.jarzynski, b.jarzynski),
        ift_delta=delta(a.ift, b.ift),
    )


def _sem2(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1) / len(x)) if len(x) > 1 else 0.0
