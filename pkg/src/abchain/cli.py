"""Command-line entry point ``simulate``.

Usage::

    simulate [run] <scenario> [--config FILE] [--set key=value]... [--out DIR] [--threads N]
    simulate list
"""

from __future__ import annotations

import argparse
import sys
from typing import Any, Sequence

import yaml

from .dynamics import IntegrationError, PositivityError
from .output import OutputError
from .params import ParameterError
from .scenarios import BUILTIN, OUTPUT_ENV, apply_overrides, builtin, run_scenario
from .spectral import EigenSolverError

__all__ = ["main", "build_parser"]

# shortcut flag -> ChainParams field
SHORTCUTS = {
    "gamma": "gamma",
    "phi": "phi",
    "delta": "delta",
    "kappa": "kappa",
    "j1": "j1",
    "n_cells": "n_cells",
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TRUNCATION = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Run tilted dissipative AB-chain scenarios and write CSV tables and figures.",
    )
    parser.add_argument("scenario", nargs="+", metavar="SCENARIO", help="built-in scenario name, 'run NAME', or 'list'")
    parser.add_argument("--config", help="YAML/JSON config merged onto the scenario defaults")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a parameter or scenario field (value parsed as YAML); repeatable",
    )
    parser.add_argument("--out", help=f"output root directory (default ${OUTPUT_ENV} or ./results)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
    parser.add_argument("--no-figures", action="store_true", help="skip the PNG renderings")
    parser.add_argument("--strict", action="store_true", help="exit non-zero when the truncation guard trips")
    for flag in SHORTCUTS:
        kind = int if flag == "n_cells" else float
        parser.add_argument(f"--{flag.replace('_', '-')}", dest=f"short_{flag}", type=kind, default=None,
                            help=f"shortcut for --set {flag}=VALUE")
    return parser


def _parse_overrides(items: Sequence[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _list_scenarios() -> None:
    for name, cfg in BUILTIN.items():
        p = cfg.params
        print(f"{name:20s} {cfg.kind.value:20s} model={cfg.model.value} n_cells={p.n_cells} "
              f"t={cfg.time.t_final:g}ms gammas={list(cfg.gamma_values())}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    words = list(args.scenario)
    if words[0] == "list":
        _list_scenarios()
        return EXIT_OK
    if words[0] == "run":
        words = words[1:]
    if len(words) != 1:
        parser.error("expected exactly one scenario name")
    name = words[0]
    if args.threads < 1:
        parser.error("--threads must be >= 1")

    try:
        config = builtin(name)
        if args.config:
            data = _file_mapping(args.config)
            named = data.pop("scenario", name)
            if named != name:
                raise ParameterError(f"{args.config} is for scenario {named!r}, not {name!r}")
            config = apply_overrides(config, data)
        overrides = _parse_overrides(args.overrides)
        for flag, key in SHORTCUTS.items():
            value = getattr(args, f"short_{flag}")
            if value is not None:
                overrides[key] = value
        if overrides:
            config = apply_overrides(config, overrides)
    except ParameterError as exc:
        print(f"simulate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_scenario(config, args.out, threads=args.threads, figures=not args.no_figures)
    except ParameterError as exc:
        print(f"simulate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, PositivityError, EigenSolverError) as exc:
        print(f"simulate: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OutputError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    print(result.summary_line())
    print(f"outputs in {result.directory}")
    if args.strict and not result.truncation_ok:
        return EXIT_TRUNCATION
    return EXIT_OK


def _file_mapping(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ParameterError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: expected a mapping at top level")
    return data


if __name__ == "__main__":
    sys.exit(main())
