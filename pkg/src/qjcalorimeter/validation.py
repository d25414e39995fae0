"""Self-contained validation suites behind ``qjcal validate``.

Each suite returns a list of checks ``{"name", "value", "tolerance",
"passed", ...}``.  The parameter sweeps are fixed so reports are
reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import first_jump_directions, simulate_trajectory
from .ensemble import EnsembleConfig, run_ensemble
from .model import (
    DriveProtocol,
    GaussianParams,
    Macro,
    Micro,
    QubitState,
    SimulationConfig,
    uniform_sample_times,
)
from .oracle import first_jump_probabilities, hybrid_master_evolve
from .rates import detailed_balance_sweep, rates_macro, rates_micro
from .thermo import path_entropy_production, total_entropy_production

SUITES = ("detailed-balance", "appendix-a", "appendix-b", "oracle")

# short protocol with strong coupling for path-probability checks
SHORT_DRIVE = DriveProtocol(0.3, 2, (True, False), 800)


def _check(name, value, tolerance, passed, **extra) -> dict:
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed), **extra}


def detailed_balance_checks(k_max: int = 10_000, ns=(1, 2, 5, 50, 400), seed: int = 0) -> list[dict]:
    out = []
    for n in ns:
        ok = detailed_balance_sweep(k_max, n, 0.025 / n)
        bad = np.flatnonzero(~ok)
        out.append(_check(f"rate ratio equals microstate ratio, n={n}, k<={k_max}",
                          int(ok.sum()), "exact", ok.all(),
                          first_failure=None if bad.size == 0 else int(bad[0] + 1)))
    # microstate totals against the macrostate rates
    mismatches = 0
    total = 0
    for n in range(1, 5):
        for occ in np.ndindex(*(7,) * n):
            if sum(occ) > 6:
                continue
            total += 1
            mismatches += rates_micro(Micro(occ), 0.025 / n).totals != rates_macro(sum(occ), n, 0.025 / n)
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        n = int(rng.integers(1, 401))
        nu = rng.geometric(0.3, size=n) - 1 + rng.integers(0, 50, size=n)
        total += 1
        mismatches += rates_micro(Micro(tuple(nu)), 0.025 / n).totals != rates_macro(int(nu.sum()), n, 0.025 / n)
    out.append(_check("microstate totals equal macrostate rates", total - mismatches, "exact",
                      mismatches == 0, states=total))
    return out


def appendix_a_checks(runs: int = 100_000, states: int = 5, seed: int = 2015) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    cal = Macro(3, 5)
    cfg = SimulationConfig("macro", 5, 1.0, 0.1, DriveProtocol(0.0, 1, (False,), 300))
    for i in range(states):
        theta = rng.uniform(0.15, math.pi - 0.15)
        phase = rng.uniform(0, 2 * math.pi)
        c1 = math.sin(theta / 2) * complex(math.cos(phase), math.sin(phase))
        psi = QubitState(math.cos(theta / 2), c1).normalized()
        p1 = abs(psi.c1) ** 2
        fj = first_jump_probabilities(psi, rates_macro(cal.k, cal.n, cfg.gamma))
        d = first_jump_directions(psi, cal, cfg, runs, seed + i)
        f = float(d.mean())
        sigma = math.sqrt(p1 * (1 - p1) / runs)
        out.append(_check(f"closed-form down probability, state {i}", fj.p_down, "exact", fj.p_down == p1,
                          expected=p1))
        out.append(_check(f"calorimetric wait frequency, state {i}", f, 4 * sigma,
                          abs(f - p1) <= 4 * sigma, expected=p1, z=(f - p1) / sigma))
    return out


def short_configs() -> dict[str, SimulationConfig]:
    base = dict(n=5, beta=1.0, gamma=0.1, protocol=SHORT_DRIVE)
    return {
        "micro": SimulationConfig("micro", **base),
        "macro": SimulationConfig("macro", **base),
        "ideal": SimulationConfig("ideal", **base),
        "gaussian": SimulationConfig("gaussian", **base,
                                     gaussian=GaussianParams(heat_capacity=10.0, g2=0.3)),
    }


def appendix_b_checks(trajectories: int = 100, seed: int = 2015) -> list[dict]:
    out = []
    for mode, cfg in short_configs().items():
        worst = 0.0
        jumps = 0
        for i in range(trajectories):
            rec = simulate_trajectory(cfg, seed, i)
            jumps += len(rec.events)
            a = path_entropy_production(rec, cfg)
            b = total_entropy_production(rec, cfg)
            worst = max(worst, abs(a - b) / max(abs(b), 1.0))
        out.append(_check(f"path log-ratio equals entropy production, {mode}", worst, 1e-6,
                          worst <= 1e-6, trajectories=trajectories, jumps=jumps))
    return out


def oracle_checks(trajectories: int = 20_000, seed: int = 2015) -> list[dict]:
    proto = DriveProtocol(0.05, 5, (True, False, True, False), 20_000)
    out = []
    for mode, n in (("macro", 5), ("macro", 20), ("ideal", 5)):
        sim = SimulationConfig(mode, n, 1.0, 0.025 / n, proto, sample_times=uniform_sample_times(proto, 100))
        res = run_ensemble(EnsembleConfig(sim, trajectories, seed))
        ref = hybrid_master_evolve(sim)
        sigma = np.maximum(res.population_sigma, 1e-12)
        z = float(np.max(np.abs(res.population_mean - ref.excited_population) / sigma))
        out.append(_check(f"population vs hybrid master equation, {mode} n={n}", z, 5.0, z <= 5.0,
                          unit="binomial sigma"))
        out.append(_check(f"oracle trace conservation, {mode} n={n}", float(np.max(np.abs(ref.trace - 1))),
                          1e-9, np.max(np.abs(ref.trace - 1)) <= 1e-9))
    return out


def run_suite(name: str, trajectories: int | None = None, seed: int = 2015) -> list[dict]:
    if name == "detailed-balance":
        return detailed_balance_checks()
    if name == "appendix-a":
        return appendix_a_checks(runs=trajectories or 100_000, seed=seed)
    if name == "appendix-b":
        return appendix_b_checks(trajectories=trajectories or 100, seed=seed)
    if name == "oracle":
        return oracle_checks(trajectories=trajectories or 20_000, seed=seed)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
