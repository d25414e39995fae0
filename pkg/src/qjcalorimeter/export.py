"""Writing ensemble results to disk and reading them back.

Every file carries the config hash: CSV files in a leading ``#`` comment
line, JSON files as a ``config_hash`` field.  Nothing that depends on the
machine or on the thread count is written, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import EnsembleConfig, EnsembleResult, config_dict
from .model import DriveProtocol, GaussianParams, QubitState, SimulationConfig
from .thermo import Estimate

FILES = ("work_histogram.csv", "population.csv", "calorimeter_energy.csv", "estimators.json",
         "run_meta.json", "trajectories.csv")

_TRAJ_COLUMNS = ("index", "initial_qubit", "final_qubit", "n_up", "n_down", "energy_initial",
                 "energy_final", "work", "delta_S", "final_population", "tail_population")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, config_hash: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _dump_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def estimators_payload(result: EnsembleResult) -> dict:
    sim = result.config.simulation
    ends_driven = sim.protocol.ends_driven
    payload = {
        "config_hash": result.config_hash,
        "M": result.trajectories,
        "seed": result.config.master_seed,
        "beta": sim.beta,
        "bath_mode": sim.bath_mode,
        "jarzynski": None if result.jarzynski is None else result.jarzynski.as_dict(),
        "ift": None if result.ift is None else result.ift.as_dict(),
    }
    if ends_driven:
        payload["target_comparison"] = {
            "refused": True,
            "reason": "the drive is on in the last segment, so the free-energy difference "
                      "of the endpoints need not vanish",
        }
    else:
        payload["target_comparison"] = {
            "refused": False,
            "target": 1.0,
            "jarzynski_within_ci": None if result.jarzynski is None else result.jarzynski.contains(1.0),
            "ift_within_ci": None if result.ift is None else result.ift.contains(1.0),
        }
    return payload


def write_outputs(result: EnsembleResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = result.config_hash
    M = result.trajectories

    values, counts = result.work_histogram()
    _write_csv(out / "work_histogram.csv", h, ("W_quanta", "count", "probability"),
               ((v, c, c / M) for v, c in zip(values, counts)))
    _write_csv(out / "population.csv", h, ("t", "mean_excited", "sigma"),
               zip(result.times, result.population_mean, result.population_sigma))
    _write_csv(out / "calorimeter_energy.csv", h, ("t", "mean_k"),
               zip(result.times, result.calorimeter_mean))
    _write_csv(out / "trajectories.csv", h, _TRAJ_COLUMNS,
               zip(range(M), result.initial_qubit, result.final_qubit, result.n_up, result.n_down,
                   result.energy_initial, result.energy_final, result.work, result.delta_S,
                   result.final_population, result.tail_population))
    _dump_json(out / "estimators.json", estimators_payload(result))
    _dump_json(out / "run_meta.json", {
        "config_hash": h,
        "config": config_dict(result.config),
        "version": f"qjcalorimeter {__version__}",
    })
    return [out / f for f in FILES]


# ---------------------------------------------------------------- reading back


def _read_csv(path: Path) -> tuple[str, list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise ValueError(f"{path}: missing config hash line")
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return first.split("=", 1)[1], header, data


def config_from_dict(d: dict) -> EnsembleConfig:
    sim = dict(d["simulation"])
    proto = DriveProtocol(**{**sim.pop("protocol")})
    gp = GaussianParams(**sim.pop("gaussian"))
    iq = sim.pop("initial_qubit")
    if isinstance(iq, dict):
        iq = QubitState(complex(*iq["c0"]), complex(*iq["c1"]))
    s = SimulationConfig(protocol=proto, gaussian=gp, initial_qubit=iq,
                         **{**sim, "sample_times": tuple(sim["sample_times"])})
    return EnsembleConfig(s, d["trajectories"], d["master_seed"])


def _estimate(d) -> Estimate | None:
    if d is None:
        return None
    return Estimate(d["mean"], d["ci_half_width"], d["std"], d["M"], d["sample_max"])


def read_result(out_dir: str | Path) -> EnsembleResult:
    """Rebuild an :class:`EnsembleResult` from the files of :func:`write_outputs`."""
    out = Path(out_dir)
    meta = json.loads((out / "run_meta.json").read_text(encoding="utf-8"))
    est = json.loads((out / "estimators.json").read_text(encoding="utf-8"))
    h, _, traj = _read_csv(out / "trajectories.csv")
    _, _, pop = _read_csv(out / "population.csv")
    _, _, cal = _read_csv(out / "calorimeter_energy.csv")
    if h != meta["config_hash"]:
        raise ValueError(f"{out}: files come from different runs")
    col = {name: traj[:, i] for i, name in enumerate(_TRAJ_COLUMNS)}
    as_int = lambda name: col[name].astype(np.int64)  # noqa: E731
    return EnsembleResult(
        config=config_from_dict(meta["config"]),
        config_hash=h,
        initial_qubit=as_int("initial_qubit"),
        final_qubit=as_int("final_qubit"),
        n_up=as_int("n_up"),
        n_down=as_int("n_down"),
        energy_initial=col["energy_initial"],
        energy_final=col["energy_final"],
        work=as_int("work"),
        delta_S=col["delta_S"],
        final_population=col["final_population"],
        tail_population=col["tail_population"],
        times=pop[:, 0],
        population_mean=pop[:, 1],
        population_sigma=pop[:, 2],
        calorimeter_mean=cal[:, 1],
        jarzynski=_estimate(est["jarzynski"]),
        ift=_estimate(est["ift"]),
    )
