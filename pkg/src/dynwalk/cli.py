"""Command-line experiment runner.

Every subcommand writes ``summary.json`` (deterministic given config and
seed) and ``timing.json`` (wall-clock) into ``--out`` when it is given, and
prints the summary to stdout. ``--format csv`` additionally writes the
per-record table.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .birth_death import BDParams, simulate_bd_returns, tail_exponent_fit
from .closed_forms import identity_table, nvbrw_expansion, v_asym, vbrw_expansion
from .conductance_law import ConductanceLaw, law_from_mapping, parse_law
from .environment import DynEnvironment, Lattice, Torus
from .couplings import (asym_speed_gap, coupled_bias_pair_cycles, coupled_monotone_d1,
                        coupled_nvbrw_dominated_by_tasym, dim_reduction_gap, tasym_gap_cycles)
from .errors import DynWalkError
from .regeneration import CycleBatch, estimate_speed, ratio_estimate, run_cycles
from .rng import RandomStream
from .verification import (cbrw_symmetry_test, detailed_balance_test, speed_positivity_test,
                           stationarity_test)
from .walkers import CBRW, KINDS, NVBRW, VBRW, WalkerParams, run

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

MAX_GRID = 10_000
EXPERIMENTS = ("simulate", "sweep", "verify", "validate-closed-forms", "coupling-check", "bd-check")

# key -> (type, default)
_KEYS: dict[str, tuple[Callable, Any]] = {
    "kind": (str, "vbrw"),
    "lambda": (str, "1.0"),
    "mu": (str, "1.0"),
    "d": (int, 1),
    "kappa": (float, None),
    "law": (str, "two_point:0.1,1:0.5"),
    "cycles": (int, 10_000),
    "horizon": (float, None),
    "seed": (int, 0),
    "replicas": (int, 1),
    "workers": (int, 1),
    "out": (str, None),
    "format": (str, "json"),
    "geometry": (str, "lattice"),
    "M": (int, 2),
    "epsilon": (float, 0.1),
    "paths": (int, 100),
    "coupling_kind": (str, "monotone"),
    "alpha": (float, 2.0),
    "L": (int, 1),
    "samples": (int, 10_000),
    "scale": (float, 1.0),
}


class ConfigError(DynWalkError, ValueError):
    """Configuration could not be parsed or is out of range."""


# -- configuration ----------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = {}
    for key, value in raw.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "law" and isinstance(value, dict):
            cfg[key] = value
        else:
            cfg[key] = value if isinstance(value, str) else _KEYS[key][0](value)
    return cfg


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {k: default for k, (_, default) in _KEYS.items()}
    cfg.update(load_config(args.config))
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("lambda", "mu"):
        cfg[key] = str(cfg[key])
    _check_ranges(cfg)
    return cfg


def parse_grid(text: str) -> list[float]:
    """``"a"``, ``"a,b,c"`` or inclusive ``"start:stop:step"``."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ConfigError(f"grid step must be positive in {text!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            if count > MAX_GRID:
                raise ConfigError(f"grid {text!r} has {count} points; limit is {MAX_GRID}")
            return [round(start + i * step, 12) for i in range(max(count, 0))]
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse grid {text!r}") from None


def _check_ranges(cfg: dict) -> None:
    for lam in parse_grid(cfg["lambda"]):
        if not -20 <= lam <= 20:
            raise ConfigError(f"lambda={lam} outside [-20, 20]")
    for mu in parse_grid(cfg["mu"]):
        if not 0 < mu <= 1e4:
            raise ConfigError(f"mu={mu} outside (0, 1e4]")
    if not 1 <= cfg["d"] <= 4:
        raise ConfigError(f"d={cfg['d']} outside [1, 4]")
    if not 2 <= cfg["M"] <= 64:
        raise ConfigError(f"M={cfg['M']} outside [2, 64]")
    if cfg["geometry"] not in ("lattice", "torus"):
        raise ConfigError(f"geometry must be lattice or torus, got {cfg['geometry']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    if cfg["replicas"] < 1 or cfg["workers"] < 1:
        raise ConfigError("replicas and workers must be >= 1")
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")


def _law(cfg: dict) -> ConductanceLaw:
    law_spec = cfg["law"]
    if isinstance(law_spec, dict):
        law_spec = dict(law_spec)
        if cfg["kappa"] is not None:
            law_spec["kappa"] = cfg["kappa"]
        return law_from_mapping(law_spec)
    return parse_law(law_spec, cfg["kappa"])


def _scalar(cfg: dict, key: str) -> float:
    values = parse_grid(cfg[key])
    if len(values) != 1:
        raise ConfigError(f"{key} must be a single value for this subcommand")
    return values[0]


# -- replica fan-out ----------------------------------------------------------------

def _cycles_job(job: tuple) -> CycleBatch:
    params, n, seed, replica = job
    return run_cycles(params, n, RandomStream.for_replica(seed, replica))


def _fan_out(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def simulate_cycles(params: WalkerParams, n: int, seed: int, replicas: int,
                    workers: int) -> CycleBatch:
    sizes = [n // replicas + (1 if r < n % replicas else 0) for r in range(replicas)]
    jobs = [(params, k, seed, r) for r, k in enumerate(sizes) if k > 0]
    return CycleBatch.concat(_fan_out(_cycles_job, jobs, workers))


# -- subcommands --------------------------------------------------------------------

def _params(cfg: dict, lam: float | None = None, mu: float | None = None) -> WalkerParams:
    return WalkerParams(cfg["kind"], _scalar(cfg, "lambda") if lam is None else lam,
                        _scalar(cfg, "mu") if mu is None else mu, cfg["d"], _law(cfg))


def cmd_simulate(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    params = _params(cfg)
    if cfg["horizon"] is not None:
        rows, csv_parts = [], []
        for r in range(cfg["replicas"]):
            rng = RandomStream.for_replica(cfg["seed"], r)
            geometry = Torus(params.d, cfg["M"]) if cfg["geometry"] == "torus" else Lattice(params.d)
            env = DynEnvironment(params.law, params.mu, rng, geometry)
            traj = run(params, env, cfg["horizon"], rng, record=cfg["format"] == "csv")
            rows.append({"replica": r, "final_position": list(traj.final_position),
                         "attempts": traj.n_attempts})
            csv_parts.append(traj.to_csv())
        tables = {f"trajectory_{r}.csv": c for r, c in enumerate(csv_parts)}
        return {"trajectories": rows}, tables, True
    batch = simulate_cycles(params, cfg["cycles"], cfg["seed"], cfg["replicas"], cfg["workers"])
    est = estimate_speed(batch)
    return {"speed": est.as_dict()}, {"cycles.csv": batch.to_csv()}, True


def _sweep_row(cfg: dict, lam: float, mu: float) -> dict:
    params = _params(cfg, lam, mu)
    batch = simulate_cycles(params, cfg["cycles"], cfg["seed"], cfg["replicas"], cfg["workers"])
    est = estimate_speed(batch)
    law, d = params.law, params.d
    row = {"lambda": lam, "mu": mu, "speed": est.point, "ci_low": est.ci_low,
           "ci_high": est.ci_high, "se": est.se, "n_cycles": est.n_cycles}
    if params.kind in (NVBRW, "totally_asymmetric"):
        coeff = nvbrw_expansion(law, mu, d, lam)
        row.update(zeroth=coeff.zeroth, first=coeff.first, predicted=coeff.predict(lam),
                   vA_minus_speed=coeff.zeroth - est.point)
    elif params.kind == VBRW:
        # the expansion describes v(lambda, Z mu); report it at the simulated mu / Z
        row.update(expansion=vbrw_expansion(law, mu / params.z, d, lam))
    return row


def cmd_sweep(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    lams, mus = parse_grid(cfg["lambda"]), parse_grid(cfg["mu"])
    if len(lams) * len(mus) > MAX_GRID:
        raise ConfigError(f"grid has {len(lams) * len(mus)} points; limit is {MAX_GRID}. "
                          "Narrow the lambda/mu ranges or coarsen the step.")
    rows = [_sweep_row(cfg, lam, mu) for lam in lams for mu in mus]
    header = list(rows[0])
    lines = [",".join(header)] + [",".join(repr(r[k]) for k in header) for r in rows]
    return {"rows": rows}, {"sweep.csv": "\n".join(lines) + "\n"}, True


def verify_suite(seed: int, scale: float = 1.0) -> list[dict]:
    """Fixed battery of statistical checks; sizes scale with ``scale``."""
    def n(base: int, floor: int = 30) -> int:
        return max(floor, int(base * scale))

    def rng(i: int) -> RandomStream:
        return RandomStream.for_replica(seed, i)

    elliptic = ConductanceLaw.two_point(0.1, 1.0, 0.5, kappa=1.0)
    reports = [
        detailed_balance_test(2, 1, 0.5, 1.0, elliptic, 1.0, n(20_000, 200), rng(0)),
        stationarity_test(1.0, elliptic, 1.0, n(2_000, 100), rng(1)),
        cbrw_symmetry_test(20, 1.0, 1.0, elliptic, n(2_000), rng(2)),
        speed_positivity_test(VBRW, 1.0, 1.0, elliptic, n(20_000, 100), rng(3)),
        speed_positivity_test(CBRW, 1.0, 1.0, elliptic, n(10_000, 100), rng(4)),
    ]
    out = [r.as_dict() for r in reports]
    table = identity_table(seed)
    out.append({"name": "closed_form_identities", "statistic": max(r["max_abs_dev"] for r in table[:-1]),
                "threshold": 1e-12, "passed": all(r["passed"] for r in table),
                "applicable": True, "n_samples": 100, "notes": "", "details": {"rows": table}})
    paths = n(100, 5)
    mono = sum(coupled_monotone_d1(1.0, 0.2, 1.0, elliptic, 100.0, rng(5 + i), record=False).violations
               for i in range(paths))
    dom = sum(coupled_nvbrw_dominated_by_tasym(1.0, 1.0, elliptic, 100.0, rng(5 + paths + i),
                                               record=False).violations for i in range(paths))
    for name, v in (("monotone_coupling", mono), ("tasym_dominance", dom)):
        out.append({"name": name, "statistic": v, "threshold": 0, "passed": v == 0,
                    "applicable": True, "n_samples": paths, "notes": "", "details": {}})
    return out


def cmd_verify(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    checks = verify_suite(cfg["seed"], cfg["scale"])
    ok = all(c["passed"] for c in checks if c["applicable"])
    lines = ["name,statistic,threshold,passed"] + [
        f"{c['name']},{c['statistic']!r},{c['threshold']!r},{int(c['passed'])}" for c in checks]
    return {"checks": checks, "all_passed": ok}, {"checks.csv": "\n".join(lines) + "\n"}, ok


def cmd_validate_closed_forms(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    table = identity_table(cfg["seed"])
    ok = all(r["passed"] for r in table)
    lines = ["identity,max_abs_dev,tolerance,passed"] + [
        f"\"{r['identity']}\",{r['max_abs_dev']!r},{r['tolerance']!r},{int(r['passed'])}"
        for r in table]
    return {"identities": table, "all_passed": ok}, {"identities.csv": "\n".join(lines) + "\n"}, ok


def cmd_coupling_check(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    kind = cfg["coupling_kind"]
    law, seed = _law(cfg), cfg["seed"]
    horizon = cfg["horizon"] or 100.0
    if kind in ("monotone", "dominate"):
        lam, mu = _scalar(cfg, "lambda"), _scalar(cfg, "mu")
        rows = []
        for i in range(cfg["paths"]):
            rng = RandomStream.for_replica(seed, i)
            if kind == "monotone":
                pair = coupled_monotone_d1(lam, cfg["epsilon"], mu, law, horizon, rng, record=False)
            else:
                pair = coupled_nvbrw_dominated_by_tasym(lam, mu, law, horizon, rng, record=False)
            rows.append({"path": i, "violations": pair.violations,
                         "x_a": pair.traj_a.final_position[0], "x_b": pair.traj_b.final_position[0]})
        total = sum(r["violations"] for r in rows)
        lines = ["path,violations,x_a,x_b"] + [f"{r['path']},{r['violations']},{r['x_a']},{r['x_b']}"
                                               for r in rows]
        return ({"coupling": kind, "paths": len(rows), "violations": total},
                {"coupling.csv": "\n".join(lines) + "\n"}, total == 0)
    if kind == "bias-pair":
        lam, mu = _scalar(cfg, "lambda"), _scalar(cfg, "mu")
        cc = coupled_bias_pair_cycles(lam, cfg["epsilon"], mu, law, cfg["d"], cfg["cycles"],
                                      RandomStream.for_replica(seed, 0))
        diff = cc.difference.astype(float)
        quiet = diff[~cc.saw_very_bad]
        ok = bool(np.all(quiet == 0))
        r, se = ratio_estimate(diff, cc.x.tau)
        summary = {"coupling": kind, "cycles": len(cc), "mean_difference": float(diff.mean()),
                   "speed_difference": r, "speed_difference_se": se,
                   "fraction_very_bad": float(cc.saw_very_bad.mean()),
                   "nonzero_difference_without_very_bad": int((quiet != 0).sum())}
        lines = ["cycle,tau,dx_lambda,dx_lambda_eps,saw_very_bad,saw_bad_before,first_split"] + [
            f"{i},{cc.x.tau[i]!r},{cc.x.dx1[i]},{cc.y.dx1[i]},{int(cc.saw_very_bad[i])},"
            f"{int(cc.saw_bad_before[i])},{cc.first_split[i]}" for i in range(len(cc))]
        return summary, {"bias_pair.csv": "\n".join(lines) + "\n"}, ok
    if kind == "dim-gap":
        mu = _scalar(cfg, "mu")
        rows = []
        for i, lam in enumerate(parse_grid(cfg["lambda"])):
            g = dim_reduction_gap(lam, mu, law, max(cfg["d"], 2), cfg["cycles"],
                                  RandomStream.for_replica(seed, i))
            rows.append({"lambda": lam, "gap": g.gap, "se": g.se, "ci_low": g.ci[0],
                         "ci_high": g.ci[1]})
        lines = ["lambda,gap,se,ci_low,ci_high"] + [
            ",".join(repr(r[k]) for k in ("lambda", "gap", "se", "ci_low", "ci_high")) for r in rows]
        return {"coupling": kind, "rows": rows}, {"dim_gap.csv": "\n".join(lines) + "\n"}, True
    if kind == "asym-gap":
        mu = _scalar(cfg, "mu")
        rows = []
        for i, lam in enumerate(parse_grid(cfg["lambda"])):
            g = asym_speed_gap(tasym_gap_cycles(lam, mu, law, cfg["cycles"],
                                                RandomStream.for_replica(seed, i)))
            rows.append({"lambda": lam, "gap": g.gap, "se": g.se, "ci_low": g.ci[0],
                         "ci_high": g.ci[1], "v_asym": v_asym(law, mu)})
        lines = ["lambda,gap,se,ci_low,ci_high,v_asym"] + [
            ",".join(repr(r[k]) for k in ("lambda", "gap", "se", "ci_low", "ci_high", "v_asym"))
            for r in rows]
        return {"coupling": kind, "rows": rows}, {"asym_gap.csv": "\n".join(lines) + "\n"}, True
    raise ConfigError(f"unknown coupling kind {kind!r}")


def cmd_bd_check(cfg: dict) -> tuple[dict, dict[str, str], bool]:
    params = BDParams(cfg["alpha"], _scalar(cfg, "mu"), cfg["L"])
    taus, steps = simulate_bd_returns(params, cfg["samples"], RandomStream.for_replica(cfg["seed"], 0))
    n = len(steps)
    summary: dict[str, Any] = {"alpha": params.alpha, "mu": params.mu, "L": params.L, "samples": n,
                               "mean_tau": float(taus.mean()), "mean_T": float(steps.mean()),
                               "se_T": float(steps.std(ddof=1) / math.sqrt(n)) if n > 1 else None}
    ok = True
    if params.L == 1:
        target = 2 * math.exp(params.alpha / params.mu)
        summary["target_mean_T"] = target
        if summary["se_T"]:
            summary["T_within_3se"] = abs(summary["mean_T"] - target) <= 3 * summary["se_T"]
            ok = summary["T_within_3se"]
    if n >= 10_000:
        rate, r2 = tail_exponent_fit(taus)
        summary.update(tail_rate=rate, tail_r2=r2)
        ok = ok and rate > 0 and r2 > 0.95
    summary["passed"] = ok
    lines = ["tau,T"] + [f"{t!r},{k}" for t, k in zip(taus.tolist(), steps.tolist())]
    return summary, {"bd_samples.csv": "\n".join(lines) + "\n"}, ok


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "validate-closed-forms": cmd_validate_closed_forms,
    "coupling-check": cmd_coupling_check,
    "bd-check": cmd_bd_check,
}


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML file; flags override its keys")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--kind", choices=(*KINDS, "tasym") if name != "coupling-check"
                       else ("monotone", "dominate", "bias-pair", "dim-gap", "asym-gap"),
                       dest="kind" if name != "coupling-check" else "coupling_kind")
        p.add_argument("--lambda", dest="lambda", help="value, list a,b,c or range start:stop:step")
        p.add_argument("--mu", help="value, list or range")
        p.add_argument("--d", type=int)
        p.add_argument("--geometry", help="lattice or torus")
        p.add_argument("--M", type=int, help="torus half-width")
        p.add_argument("--law", help="e.g. two_point:0,1:0.5, point:1, uniform:0.2,1")
        p.add_argument("--kappa", type=float)
        p.add_argument("--cycles", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--L", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--scale", type=float, help="budget multiplier for verify")
    return parser


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = _resolve(args)
        result, tables, ok = _COMMANDS[args.experiment](cfg)
    except (DynWalkError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"dynwalk {args.experiment}: error: {exc}", file=sys.stderr)
        return 2
    echo = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    summary = _jsonable({"experiment": args.experiment, "version": f"dynwalk-{__version__}",
                         "config": echo, "passed": ok, "result": result})
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text)
        (out / "timing.json").write_text(
            json.dumps({"wall_clock_seconds": time.perf_counter() - start}) + "\n")
        if cfg["format"] == "csv":
            for name, body in tables.items():
                (out / name).write_text(body)
    print(text, end="")
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
