"""Command line entry point: ``flatlab run | list-builtins | validate-surface | self-test``.

Exit codes: 0 success, 2 invalid input, 3 runtime failure or interruption.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, FlatLabError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _err(msg: str) -> None:
    print(f"flatlab: {msg}", file=sys.stderr)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatlab", description="Experiments on translation surfaces.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, help="YAML or JSON experiment config")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--out-dir", help="output directory (overrides the config)")
    run.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    run.add_argument("--checkpoint-every", type=int, help="flush partial output after this many jobs")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config entry, e.g. params.T=2000; repeatable")
    run.add_argument("--quiet", action="store_true")

    lb = sub.add_parser("list-builtins", help="list built-in surfaces and test functions")
    lb.add_argument("--json", action="store_true", help="machine-readable output")

    vs = sub.add_parser("validate-surface", help="check a surface file")
    vs.add_argument("path")

    sub.add_parser("self-test", help="quick consistency checks of this installation")

    ex = sub.add_parser("example-config", help="print a config with default parameters")
    ex.add_argument("experiment")
    return p


def cmd_run(args) -> int:
    from .config import build_config
    from .experiments import Runner

    flags = {"seed": args.seed, "out_dir": args.out_dir, "workers": args.workers,
             "checkpoint_every": args.checkpoint_every}
    try:
        config = build_config(args.config, args.set, flags)
        if "workers" not in config:
            config["workers"] = os.cpu_count() or 1
        runner = Runner(config, log=None if args.quiet else lambda m: print(m, file=sys.stderr))
    except (ConfigError, KeyError) as exc:
        _err(exc.args[0] if exc.args else str(exc))
        return EXIT_INVALID
    try:
        summary = runner.run()
    except KeyboardInterrupt:
        _err(f"interrupted after {runner.done}/{len(runner.jobs)} jobs; partial output in {runner.out_dir}")
        return EXIT_RUNTIME
    except (FlatLabError, ArithmeticError, ValueError, OSError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    print(json.dumps({"out_dir": str(runner.out_dir), "summary": summary}, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_list_builtins(args) -> int:
    from .builtins import list_builtins

    cat = list_builtins()
    if args.json:
        print(json.dumps(cat, indent=1))
        return EXIT_OK
    print("surfaces:")
    for s in cat["surfaces"]:
        print(f"  {s['name']:<14} {s['stratum']:<14} genus {s['genus']}  {s['description']}")
    print("test functions:")
    for f in cat["test_functions"]:
        print(f"  {f['name']:<20} {f['description']}")
    return EXIT_OK


def cmd_validate_surface(args) -> int:
    from .surface import area, load_surface

    try:
        S = load_surface(args.path)
    except OSError as exc:
        _err(str(exc))
        return EXIT_INVALID
    except (FlatLabError, ValueError, KeyError, TypeError) as exc:
        _err(f"invalid surface: {type(exc).__name__}: {exc}")
        return EXIT_INVALID
    print(json.dumps({"name": S.name, "stratum": str(S.stratum), "genus": S.genus,
                      "area": float(area(S)), "exact": S.exact, "edges": S.n_edges}, indent=1))
    return EXIT_OK


def _check_builtins() -> str:
    from .builtins import SURFACES

    want = {"torus": "H(0)", "L3": "H(2)", "L4": "H(2)", "wollmilchsau": "H(1, 1, 1, 1)"}
    for name, s in SURFACES.items():
        got = str(s.build().stratum)
        if name in want and got != want[name]:
            raise AssertionError(f"{name} has stratum {got}, expected {want[name]}")
    return f"{len(SURFACES)} surfaces"


def _check_round_trip() -> str:
    from .builtins import SURFACES
    from .surface import surface_from_dict, surface_to_dict

    for s in SURFACES.values():
        S = s.build()
        if not surface_from_dict(json.loads(json.dumps(surface_to_dict(S)))).same_as(S):
            raise AssertionError(f"{s.name} does not survive serialization")
    return "file format"


def _check_symplectic() -> str:
    from .builtins import builtin_surface
    from .flow import GeodesicFlow
    from .linalg import symplectic_defect

    S = builtin_surface("L3")
    j = S.frame.intersection_matrix.tolist()
    flow = GeodesicFlow(S, 0.7, 0.5)
    n = 0
    for _ in range(200):
        m = flow.step()
        if m is not None:
            n += 1
            if symplectic_defect(m, j) != 0:
                raise AssertionError("cocycle matrix breaks the intersection form")
    return f"{n} matrices"


def _check_kernels() -> str:
    from . import _kernels_py, kernels

    lengths = np.array([0.41421356, 0.31830989, 0.26747655])
    top, bottom = np.array([0, 1, 2]), np.array([2, 1, 0])
    a = _kernels_py.rauzy_zorich_run(lengths, top, bottom, 8.0)
    b = kernels.rauzy_zorich_run(lengths, top, bottom, 8.0)
    cps = np.array([10.0, 100.0, 1000.0])
    c = _kernels_py.windtree_run(0.5, 0.5, 0.75, 0.75, math.cos(0.3), math.sin(0.3), cps, 10 ** 7, 0)
    d = kernels.windtree_run(0.5, 0.5, 0.75, 0.75, math.cos(0.3), math.sin(0.3), cps, 10 ** 7, 0)
    for x, y in list(zip(a, b)) + list(zip(c, d)):
        if not np.array_equal(np.asarray(x), np.asarray(y)):
            raise AssertionError("compiled and pure-Python kernels disagree")
    return f"backend {kernels.BACKEND}"


def _check_decomposition() -> str:
    from .group import decomposition_identity

    worst = max(decomposition_identity(x)[3] for x in np.linspace(0.01, math.pi / 2 - 0.01, 200))
    if worst > 1e-12:
        raise AssertionError(f"residual {worst:.3g}")
    return f"residual {worst:.1e}"


SELF_TESTS: List[Tuple[str, Callable[[], str]]] = [
    ("builtins", _check_builtins),
    ("round-trip", _check_round_trip),
    ("symplectic", _check_symplectic),
    ("kernel parity", _check_kernels),
    ("decomposition", _check_decomposition),
]


def cmd_self_test(args) -> int:
    failed = 0
    for name, fn in SELF_TESTS:
        try:
            info = fn()
            print(f"PASS {name}: {info}")
        except Exception as exc:  # report every check, then fail once
            failed += 1
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")
    return EXIT_OK if not failed else EXIT_RUNTIME


def cmd_example_config(args) -> int:
    import yaml
    from .config import EXPERIMENTS, example_config

    if args.experiment not in EXPERIMENTS:
        _err(f"unknown experiment {args.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        return EXIT_INVALID
    print(yaml.safe_dump(example_config(args.experiment), sort_keys=False), end="")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "list-builtins": cmd_list_builtins,
    "validate-surface": cmd_validate_surface,
    "self-test": cmd_self_test,
    "example-config": cmd_example_config,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
