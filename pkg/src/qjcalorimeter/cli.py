"""Command-line interface: ``qjcal simulate | validate | appendix-c | compare``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PRESETS, apply_overrides, build_config, env_default, load_config
from .ensemble import compare_runs, run_ensemble
from .export import read_result, write_outputs
from .model import GaussianTemp
from .oracle import work_generating_function
from .rates import gaussian_count_ratio, gaussian_rate_ratio
from .validation import SUITES, run_suite

log = logging.getLogger("qjcal")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    p.add_argument("--trajectories", type=int, metavar="M")
    p.add_argument("--seed", type=int, metavar="S")
    p.add_argument("--threads", type=int, metavar="T")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--mode", choices=("micro", "macro", "ideal", "gaussian"))


def _ensemble_config(args, default_preset: str):
    preset = args.preset or (None if args.config else default_preset)
    data, lines = load_config(args.config, preset)
    data = apply_overrides(data, trajectories=args.trajectories, seed=args.seed, mode=args.mode)
    return build_config(data, lines)


def _threads(args) -> int | None:
    return env_default("THREADS", args.threads, int)


def _dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_simulate(args) -> int:
    cfg = _ensemble_config(args, "paper-n5")
    out = Path(env_default("OUT", args.out) or "out")
    res = run_ensemble(cfg, threads=_threads(args))
    log.info("%d trajectories in %.1f s", res.trajectories, res.wall_time)
    write_outputs(res, out)
    j = res.jarzynski
    if j is not None:
        print(f"Jarzynski estimator: {j.mean:.5f} +- {j.half_width:.5f} (M={j.count})")
    if cfg.simulation.protocol.ends_driven:
        print("not comparing against 1: the drive is still on at the end of the protocol")
    elif j is not None:
        print("within 95% CI of 1" if j.contains(1.0) else "outside 95% CI of 1")
    print(f"outputs written to {out}")
    return 0


def cmd_validate(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    report = {}
    ok = True
    for name in names:
        checks = run_suite(name, trajectories=args.trajectories, seed=args.seed)
        report[name] = checks
        ok &= all(c["passed"] for c in checks)
    report["passed"] = ok
    _dump(report, Path(args.out) / "validation.json" if args.out else None)
    return 0 if ok else 1


def appendix_c_grid(C: float, beta: float, g2: float, statistic: str, points: int = 25) -> list[dict]:
    """Both sides of the finite-bath detailed-balance relation on an energy grid around ``C/beta``."""
    E0 = C / beta
    sigma2 = C / beta**2
    sd = math.sqrt(sigma2)
    lo = max(E0 - 3 * sd, 1.0 + 1e-6)
    rows = []
    for E in np.linspace(lo, E0 + 3 * sd, points):
        state = GaussianTemp(float(E), C, E0, sigma2, statistic)
        count = gaussian_count_ratio(float(E), E0, sigma2, beta)
        rate = gaussian_rate_ratio(state, g2)
        rows.append({"E": float(E), "count_ratio": count, "rate_ratio": rate,
                     "log_gap": math.log(rate / count)})
    return rows


def cmd_appendix_c(args) -> int:
    cfg = _ensemble_config(args, "gaussian-demo")
    sim = cfg.simulation
    if sim.bath_mode != "gaussian":
        raise ConfigError("appendix-c needs the gaussian bath mode")
    gp = sim.gaussian
    grid = appendix_c_grid(gp.heat_capacity, sim.beta, gp.g2, gp.statistic)
    res = run_ensemble(cfg, threads=_threads(args))
    j = res.jarzynski
    report = {
        "config_hash": res.config_hash,
        "heat_capacity": gp.heat_capacity,
        "statistic": gp.statistic,
        "g2": gp.g2,
        "grid": grid,
        "max_abs_log_gap": max(abs(r["log_gap"]) for r in grid),
        "jarzynski": j.as_dict(),
        "jarzynski_expected": work_generating_function(sim, sim.beta),
        "violation_beyond_ci": not j.contains(1.0),
        "ift": None if res.ift is None else res.ift.as_dict(),
    }
    if args.out:
        write_outputs(res, args.out)
    _dump(report, Path(args.out) / "appendix_c.json" if args.out else None)
    return 0


def cmd_compare(args) -> int:
    a = read_result(args.a)
    b = read_result(args.b)
    c = compare_runs(a, b)
    report = {
        "a": a.config_hash,
        "b": b.config_hash,
        "work": [{"W_quanta": int(w), "delta_p": float(d), "sigma": float(s)}
                 for w, d, s in zip(c.work_values, c.delta_p, c.delta_p_sigma)],
        "population_difference_final": float(c.population_difference[-1]),
        "population_sigma_final": float(c.population_sigma[-1]),
        "tail_population_difference": c.tail_difference,
        "tail_sigma": c.tail_sigma,
        "paired": c.paired,
        "jarzynski_delta": c.jarzynski_delta,
        "ift_delta": c.ift_delta,
    }
    _dump(report, Path(args.out) / "compare.json" if args.out else None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qjcal", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an ensemble and write its data files")
    _add_run_flags(s)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run a validation suite and print a JSON report")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--trajectories", type=int, metavar="M")
    v.add_argument("--seed", type=int, default=2015)
    v.add_argument("--out", metavar="DIR")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("appendix-c", help="detailed-balance gap and Jarzynski estimate of the gaussian bath")
    _add_run_flags(c)
    c.set_defaults(func=cmd_appendix_c)

    k = sub.add_parser("compare", help="difference report of two simulate output directories")
    k.add_argument("a", metavar="DIR_A")
    k.add_argument("b", metavar="DIR_B")
    k.add_argument("--out", metavar="DIR")
    k.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
