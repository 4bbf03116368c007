"""``df``: run the bundled scenarios and write their reports.

    df <command> [--config FILE] [--seed N] [--out DIR] [--grid-n N]
                 [--grid-a X] [--grid-b X] [--paths N] [--horizon T] ...

The config file holds flat ``key = value`` lines using the same names as the
long flags (``grid-n = 601``). Flags override the file; ``DF_OUT`` supplies
the default output directory. Exit status: 0 all checks pass, 1 a check
failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import fields

from .experiments import SCENARIOS, ConfigError, ExperimentConfig, run

log = logging.getLogger("dirichlet_forms")

# flag name -> (type, help)
OPTIONS = {
    "seed": (int, "master random seed"),
    "out": (str, "output directory (default: $DF_OUT or ./df-out)"),
    "grid-n": (int, "grid vertex count"),
    "grid-a": (float, "left grid end"),
    "grid-b": (float, "right grid end"),
    "paths": (int, "Monte Carlo paths for autocorrelation"),
    "horizon": (float, "horizon of the long stationary path"),
    "burn-in": (float, "burn-in discarded from the stationary path"),
    "association-paths": (int, "paths per proper-association triple"),
    "circumference": (float, "circle circumference (heat)"),
    "circle-n": (int, "circle vertex count (heat)"),
    "forms": (int, "random forms in the roundtrip suite"),
    "counterexamples": (int, "non-Dirichlet counterexamples (roundtrip)"),
    "workers": (int, "threads for path sampling"),
}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_string("[df]\n" + fh.read(), source=str(path))
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for key, raw in parser["df"].items():
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise UsageError(f"unknown config key {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(raw)
        except ValueError:
            raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="df", description="Dirichlet-form experiments")
    p.add_argument("command", choices=SCENARIOS)
    p.add_argument("--config", metavar="FILE")
    for name, (typ, help_) in OPTIONS.items():
        p.add_argument(f"--{name}", type=typ, default=None, help=help_)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    for name in OPTIONS:
        flag = getattr(args, name.replace("-", "_"))
        if flag is not None:
            values[name] = flag
    values.setdefault("out", os.environ.get("DF_OUT", "df-out"))
    kwargs = {k.replace("-", "_"): v for k, v in values.items()}
    known = {f.name for f in fields(ExperimentConfig)}
    assert set(kwargs) <= known
    return ExperimentConfig(scenario=args.command, **kwargs)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
    except (UsageError, ConfigError) as exc:
        print(f"df: error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    for c in report.checks:
        log.info("%-28s %s  value=%s", c.name, "PASS" if c.passed else "FAIL", c.value)
    summary = {"command": report.command, "status": "PASS" if report.ok else "FAIL",
               "failures": report.failures, "out": cfg.out}
    print(json.dumps(summary))
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
