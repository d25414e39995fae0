import functools

import numpy as np

from qjcalorimeter.config import PRESETS, build_config
from qjcalorimeter.ensemble import run_ensemble
from qjcalorimeter.oracle import hybrid_master_evolve


@functools.lru_cache(maxsize=None)
def preset_run(name: str, trajectories: int = 100_000, seed: int = 2015):
    data = dict(PRESETS[name])
    data["run"] = {"trajectories": trajectories, "seed": seed}
    return run_ensemble(build_config(data))


@functools.lru_cache(maxsize=None)
def preset_oracle(name: str):
    return hybrid_master_evolve(build_config(PRESETS[name]).simulation)


@functools.lru_cache(maxsize=None)
def segment_oracle(name: str, per_segment: int = 100):
    """Oracle on a grid that hits every segment boundary exactly."""
    sim = build_config(PRESETS[name]).simulation
    count = sim.protocol.n_segments * per_segment + 1
    return sim, hybrid_master_evolve(sim, np.linspace(0.0, sim.protocol.duration, count))


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
