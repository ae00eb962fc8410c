"""Command line: ``cribsim {run, sweep, oracle-compare, validate, list-scenarios}``.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numerical
failure (non-finite values or the weak-field flag). Failures also print one
JSON object ``{"error": ..., "exit_code": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .config import (ConfigError, SimulationConfig, config_to_dict, load_config, parse_config,
                     pulse_from_config, schedule_from_config, with_overrides)
from .io import append_metrics, dumps_record, metrics_record, write_outputs, write_timeseries
from .metrics import evaluate
from .solver import NumericalError, ScheduleError, run_protocol, validate_schedule

log = logging.getLogger("cribsim")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
WORKERS_ENV = "CRIBSIM_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- scenarios -----------------------------------------------------------------
def scenario_names() -> list[str]:
    root = resources.files("cribsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def scenario_text(name: str) -> str:
    path = resources.files("cribsim") / "scenarios" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError([f"unknown scenario {name!r}"])
    return path.read_text(encoding="utf-8")


def resolve_config(ref: str) -> SimulationConfig:
    """Load a config file, or a bundled scenario by name."""
    p = Path(ref)
    if p.exists():
        return load_config(p)
    stem = p.name[:-5] if p.name.endswith(".toml") else p.name
    for suffix in (".cfg",):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    if stem in scenario_names():
        return parse_config(scenario_text(stem))
    raise ConfigError([f"{ref}: no such file or bundled scenario"])


# -- sweeps --------------------------------------------------------------------
def resolve_key(key: str) -> str:
    """Expand a bare leaf name (``d``) to its dotted path (``medium.d``)."""
    if "." in key:
        return key
    hits = [name for name, f in SimulationConfig.model_fields.items()
            if hasattr(f.annotation, "model_fields") and key in f.annotation.model_fields]
    primary = [h for h in hits if h != "oracle"]
    hits = primary or hits
    if len(hits) != 1:
        raise UsageError(f"sweep key {key!r} is {'ambiguous' if hits else 'unknown'}; use block.key")
    return f"{hits[0]}.{key}"


def parse_sweep(spec: str) -> tuple[str, list[float]]:
    """``key=start:stop:count`` (inclusive linspace) or ``key=a,b,c``."""
    if "=" not in spec:
        raise UsageError(f"bad sweep {spec!r}: expected key=start:stop:count or key=a,b,...")
    key, rng = spec.split("=", 1)
    try:
        if ":" in rng:
            a, b, n = rng.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            values = [float(v) for v in np.linspace(float(a), float(b), n)]
        else:
            values = [float(v) for v in rng.split(",")]
    except ValueError:
        raise UsageError(f"bad sweep range {rng!r}") from None
    return resolve_key(key.strip()), values


def _coerce(value: float):
    return int(value) if float(value).is_integer() else value


def _sweep_point(args) -> tuple[int, str]:
    index, config_dict, overrides, directory, stem, stride = args
    from .config import config_from_dict

    config = with_overrides(config_from_dict(config_dict), overrides)
    record = run_protocol(config)
    report = evaluate(record)
    write_timeseries(record, Path(directory) / f"{stem}-{index:03d}.csv", stride)
    obj = metrics_record(record, report, config, {"sweep": {"index": index, "values": overrides}})
    return index, dumps_record(obj)


def _workers(requested: int | None, n_points: int) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise UsageError(f"{WORKERS_ENV} must be an integer") from None
    if requested is None:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_points))


# -- commands ------------------------------------------------------------------
def cmd_validate(args) -> int:
    config = resolve_config(args.config)
    shape = pulse_from_config(config)
    sched = schedule_from_config(config)
    report = validate_schedule(sched, shape, config.medium.T_decoh)
    summary = {"valid": True, "description": config.description, "warnings": config.warnings(),
               "schedule": report.as_dict()}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_run(args) -> int:
    config = resolve_config(args.config)
    for w in config.warnings():
        log.warning(w)
    record = run_protocol(config)
    report = evaluate(record)
    csv_path, json_path = write_outputs(record, report, config, args.out, args.stem, args.stride)
    summary = {"timeseries": str(csv_path), "metrics": str(json_path), "efficiency": report.efficiency,
               "fidelity": report.mode_overlap_fidelity, "phase": report.global_phase,
               "warnings": list(record.warnings)}
    print(json.dumps(summary, sort_keys=True))
    if record.weak_field_violation:
        raise NumericalError(next(w for w in record.warnings if "weak-field" in w))
    return EXIT_OK


def cmd_sweep(args) -> int:
    *specs, cfg = args.items
    if not specs:
        raise UsageError("sweep needs at least one key=range before the config")
    if len(specs) > 2:
        raise UsageError("sweep varies at most two parameters")
    config = resolve_config(cfg)
    axes = [parse_sweep(s) for s in specs]
    keys = [k for k, _ in axes]
    points = [dict(zip(keys, (_coerce(v) for v in combo)))
              for combo in itertools.product(*(vals for _, vals in axes))]
    for p in points:
        with_overrides(config, p)  # reject bad values before starting workers
    directory = Path(args.out or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = args.stem or f"{config.output.stem}-sweep"
    stride = args.stride or config.output.stride
    jobs = [(i, config_to_dict(config), p, str(directory), stem, stride) for i, p in enumerate(points)]
    n_workers = _workers(args.workers, len(jobs))
    if n_workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    out = directory / f"{stem}.ndjson"
    out.write_text("", encoding="utf-8")
    with open(out, "a", encoding="utf-8") as fh:
        for _, line in sorted(results):
            fh.write(line + "\n")
    for (i, line), p in zip(sorted(results), points):
        eta = json.loads(line)["metrics"]["efficiency"]
        print(json.dumps({"index": i, "values": p, "efficiency": eta}, sort_keys=True))
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    from .oracle import compare_to_semiclassical, matched_configuration

    config = resolve_config(args.config) if args.config else SimulationConfig()
    block = config.oracle
    kw = {} if block is None else dict(n_atoms=block.n_atoms, n_modes=block.n_modes, box=block.box,
                                       half_width=block.half_width, optical_depth=block.d)
    setup = matched_configuration(**kw)
    report = compare_to_semiclassical(setup.oracle_record(), setup.solver_record())
    directory = Path(args.out or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{args.stem or config.output.stem}-oracle.ndjson"
    obj = {"comparison": report.as_dict(), "oracle": kw or "defaults"}
    path.write_text("", encoding="utf-8")
    append_metrics(obj, path)
    print(dumps_record(obj))
    return EXIT_OK


def cmd_list(args) -> int:
    names = scenario_names()
    if args.show:
        print(scenario_text(args.show), end="")
        return EXIT_OK
    if args.export:
        d = Path(args.export)
        d.mkdir(parents=True, exist_ok=True)
        for n in names:
            (d / f"{n}.toml").write_text(scenario_text(n), encoding="utf-8")
    for n in names:
        desc = parse_config(scenario_text(n)).description
        print(f"{n}\t{desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cribsim", description="CRIB quantum-memory simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def outputs(sp):
        sp.add_argument("--out", help="output directory (default: output.directory)")
        sp.add_argument("--stem", help="output file stem (default: output.stem)")
        sp.add_argument("--stride", type=int, help="time-series sample stride")

    r = sub.add_parser("run", help="run one protocol and write outputs")
    r.add_argument("config", help="config file or bundled scenario name")
    outputs(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="vary one or two config keys")
    s.add_argument("items", nargs="+", metavar="KEY=RANGE... CONFIG")
    s.add_argument("--workers", type=int, help=f"worker processes (env {WORKERS_ENV})")
    outputs(s)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle-compare", help="matched oracle and solver runs")
    o.add_argument("config", nargs="?")
    o.add_argument("--out")
    o.add_argument("--stem")
    o.set_defaults(func=cmd_oracle_compare)

    v = sub.add_parser("validate", help="parse and check a config")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-scenarios", help="bundled example configs")
    ls.add_argument("--show", metavar="NAME")
    ls.add_argument("--export", metavar="DIR")
    ls.set_defaults(func=cmd_list)
    return p


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if not getattr(args, "func", None):
            raise UsageError("missing subcommand")
        return args.func(args)
    except UsageError as err:
        return _fail("usage", EXIT_USAGE, str(err))
    except (ConfigError, ScheduleError) as err:
        return _fail("config", EXIT_CONFIG, str(err))
    except NumericalError as err:
        return _fail("numerical", EXIT_NUMERICAL, str(err))
    except OSError as err:
        return _fail("io", EXIT_CONFIG, str(err))


if __name__ == "__main__":
    sys.exit(main())
