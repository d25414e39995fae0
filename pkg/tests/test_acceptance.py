"""Acceptance suite: one test per headline criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary.  The statistical criteria share the M = 10^5, seed 2015 preset
runs through session caches, so the whole file takes several minutes.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from qjcalorimeter.cli import appendix_c_grid, main
from qjcalorimeter.config import PRESETS, build_config
from qjcalorimeter.ensemble import EnsembleConfig, run_ensemble
from qjcalorimeter.export import FILES
from qjcalorimeter.model import DriveProtocol, Micro, SimulationConfig, excited_probability
from qjcalorimeter.oracle import lindblad_two_level
from qjcalorimeter.rates import detailed_balance_sweep, rates_macro, rates_micro
from qjcalorimeter.validation import appendix_a_checks, appendix_b_checks

from .conftest import preset_oracle, preset_run, segment_oracle

REPORT: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def test_criterion_01_detailed_balance_exact():
    t0 = time.perf_counter()
    ok = all(detailed_balance_sweep(10_000, n, 0.025 / n).all() for n in (1, 2, 5, 50, 400))
    dt = time.perf_counter() - t0
    verdict(1, ok and dt < 1.0, f"k in [1, 1e4], n in {{1,2,5,50,400}}, exact, {dt:.2f} s")


def test_criterion_02_micro_macro_totals():
    t0 = time.perf_counter()
    bad = 0
    count = 0
    for n in range(1, 5):
        for occ in np.ndindex(*(7,) * n):
            if sum(occ) <= 6:
                count += 1
                bad += rates_micro(Micro(occ), 0.025 / n).totals != rates_macro(sum(occ), n, 0.025 / n)
    rng = np.random.default_rng(2015)
    for _ in range(1000):
        n = int(rng.integers(5, 401))
        nu = rng.integers(0, 60, size=n)
        count += 1
        bad += rates_micro(Micro(tuple(nu)), 0.025 / n).totals != rates_macro(int(nu.sum()), n, 0.025 / n)
    dt = time.perf_counter() - t0
    verdict(2, bad == 0 and dt < 1.0, f"{count} states, {bad} mismatches, {dt:.2f} s")


def test_criterion_03_path_probability_identity():
    t0 = time.perf_counter()
    checks = appendix_b_checks(trajectories=100, seed=2015)
    dt = time.perf_counter() - t0
    worst = max(c["value"] for c in checks)
    ok = all(c["passed"] for c in checks) and dt < 60
    verdict(3, ok, f"4 bath modes x 100 trajectories, max rel. error {worst:.1e}, {dt:.1f} s")


@pytest.mark.parametrize("preset", ["paper-n5", "paper-n20", "paper-n400", "paper-ideal"])
def test_criterion_04_fluctuation_relations(preset):
    r = preset_run(preset)
    j, s = r.jarzynski, r.ift
    ok = j.contains(1.0) and s.contains(1.0)
    verdict(4, ok, f"{preset}: Jarzynski {j.mean:.4f} +- {j.half_width:.4f}, "
                   f"IFT {s.mean:.4f} +- {s.half_width:.4f}, M={j.count}")


@pytest.mark.parametrize("preset", ["paper-n5", "paper-n20", "paper-ideal"])
def test_criterion_05_oracle_equivalence(preset):
    r = preset_run(preset)
    sim = r.config.simulation
    if sim.bath_mode == "ideal":
        ref = lindblad_two_level(sim.beta, sim.n, sim.gamma, sim.protocol, sim.sample_times)
        oracle = "two-level master equation"
    else:
        ref = preset_oracle(preset).excited_population
        oracle = "hybrid master equation"
    z = np.abs(r.population_mean - ref) / np.maximum(r.population_sigma, 1e-300)
    ok = len(ref) == 400 and float(z.max()) <= 5.0
    verdict(5, ok, f"{preset} vs {oracle}: max |z| = {z.max():.2f} over {len(ref)} sample times")


def test_criterion_06_undriven_fixed_point():
    proto = DriveProtocol(0.05, 64, (False,), 20_000)
    sim = SimulationConfig("ideal", 1, 1.0, 0.025, proto, sample_times=(proto.duration,),
                           initial_qubit="excited")
    r = run_ensemble(EnsembleConfig(sim, 100_000, 2015))
    p, sigma = float(r.population_mean[-1]), float(r.population_sigma[-1])
    target = 1 / (1 + math.e)
    assert target == pytest.approx(excited_probability(1.0))
    z = (p - target) / sigma
    verdict(6, abs(z) <= 4.0, f"population {p:.5f} vs {target:.5f}, z = {z:.2f}")


def test_criterion_07_finite_size_population_excess():
    ideal = preset_run("paper-ideal")
    n5 = preset_run("paper-n5")
    n400 = preset_run("paper-n400")

    def paired(a, b):
        d = a.tail_population - b.tail_population
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))

    d5, s5 = paired(n5, ideal)
    d400, s400 = paired(n400, ideal)
    dd, sdd = paired(n5, n400)
    ok = d5 > 3 * s5 and d400 > 3 * s400 and dd > 3 * sdd
    verdict(7, ok, f"last-segment excess n=5: {d5:.5f} ({d5 / s5:.1f} sigma), "
                   f"n=400: {d400:.5f} ({d400 / s400:.1f} sigma), "
                   f"n=5 minus n=400: {dd:.5f} ({dd / sdd:.1f} sigma)")


def test_criterion_08_calorimeter_energy_shape():
    tol = 1e-3
    lines = []
    ok = True
    increase = {}
    for preset in ("paper-n5", "paper-n20", "paper-n400"):
        sim, sol = segment_oracle(preset)
        k = sol.mean_k
        for s, on in enumerate(sim.protocol.segment_mask):
            ks = k[s * 100:(s + 1) * 100 + 1]
            if on:
                drop = max(float(-np.min(np.diff(ks))), 0.0)
                ok &= drop <= tol
                lines.append(f"{preset} segment {s} (drive on): largest decrease {drop:.2e}")
            else:
                change = float(abs(ks[-1] - ks[0]))
                ok &= change <= tol
                lines.append(f"{preset} segment {s} (drive off): change {change:.3e}")
        increase[sim.n] = (k[-1] - k[0]) / sim.n
    ok &= increase[5] > increase[20] > increase[400]
    per_osc = ", ".join(f"n={n}: {v:.4f}" for n, v in increase.items())
    verdict(8, ok, f"tolerance {tol} quanta per segment; {'; '.join(lines)}; "
                   f"per-oscillator increase {per_osc}")


def test_criterion_08_supplement_energy_bookkeeping():
    # without drive, calorimeter plus qubit energy is what stays constant
    for preset in ("paper-n5", "paper-n20", "paper-n400"):
        sim, sol = segment_oracle(preset)
        total = sol.mean_k + sol.excited_population
        for s, on in enumerate(sim.protocol.segment_mask):
            if not on:
                assert np.ptp(total[s * 100:(s + 1) * 100 + 1]) < 1e-9, (preset, s)


def test_criterion_08_supplement_relaxation_transient():
    # the undriven change of the calorimeter energy is an early transient
    for preset in ("paper-n5", "paper-n20", "paper-n400"):
        sim, sol = segment_oracle(preset)
        for s, on in enumerate(sim.protocol.segment_mask):
            if not on:
                late = sol.mean_k[s * 100 + 50:(s + 1) * 100 + 1]
                assert np.ptp(late) < 1e-3, (preset, s)


def test_criterion_09_calorimetric_measurement():
    checks = appendix_a_checks(runs=100_000, states=5, seed=2015)
    exact = [c for c in checks if c["name"].startswith("closed-form")]
    sampled = [c for c in checks if c["name"].startswith("calorimetric")]
    ok = all(c["passed"] for c in checks) and len(exact) == 5 and len(sampled) == 5
    zs = ", ".join(f"{c['z']:+.2f}" for c in sampled)
    verdict(9, ok, f"5 states x 1e5 runs, z = [{zs}], closed form exact")


def test_criterion_10_effective_temperature_violation():
    g = preset_run("gaussian-demo")
    macro = preset_run("paper-n5")
    sim = g.config.simulation
    gp = sim.gaussian
    grid = appendix_c_grid(gp.heat_capacity, sim.beta, gp.g2, gp.statistic)
    gap = max(abs(r["log_gap"]) for r in grid)
    j = g.jarzynski
    ok = (not j.contains(1.0)) and macro.jarzynski.contains(1.0) and gap > 1e-6
    verdict(10, ok, f"gaussian {gp.statistic} C={gp.heat_capacity} g2={gp.g2}: Jarzynski {j.mean:.4f} +- "
                    f"{j.half_width:.4f}; macro {macro.jarzynski.mean:.4f} +- {macro.jarzynski.half_width:.4f}; "
                    f"max |log gap| on grid {gap:.3f}")


def test_criterion_11_thread_independent_bytes(tmp_path):
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        assert main(["simulate", "--preset", "paper-n5", "--trajectories", "5000",
                     "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out)
    match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], FILES, shallow=False)
    verdict(11, not mismatch and not errors and len(match) == len(FILES),
            f"{len(match)} files identical across 1 and 8 threads, differing: {mismatch + errors}")
