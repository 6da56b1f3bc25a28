"""Command line entry point: ``poweruct run | grid | checks``."""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_results,
    grid_search,
    increasing_p_search,
    run_experiment,
)

def _order(text: str) -> float:
    return float("inf") if text.strip().lower() in ("inf", "max", "+inf") else float(text)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# flag name -> (ExperimentConfig field, parser)
EXPERIMENT_KEYS = {
    "env": ("env", str),
    "algo": ("algo", str),
    "p": ("p", _order),
    "c": ("c", float),
    "gamma": ("gamma", float),
    "eps": ("eps", float),
    "sims": ("sims", int),
    "runs": ("runs", int),
    "seed": ("seed", int),
    "plan-once": ("plan_once", _bool),
    "ments-temperature": ("ments_temperature", float),
    "ments-exploration": ("ments_exploration", float),
    "belief-capacity": ("belief_capacity", int),
    "max-steps": ("max_steps", int),
    "engine": ("engine", str),
}
OUTPUT_KEYS = {"workers": int, "out": str, "format": str, "timing": _bool}


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys are the long flag names."""
    settings = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lstrip("-").replace("_", "-")
            if key not in EXPERIMENT_KEYS and key not in OUTPUT_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            settings[key] = value
    return settings


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file; command line flags take precedence")
    for flag in EXPERIMENT_KEYS:
        if flag == "plan-once":
            parser.add_argument("--plan-once", dest="plan-once", action="store_const", const="true")
            parser.add_argument("--no-plan-once", dest="plan-once", action="store_const", const="false")
        else:
            parser.add_argument(f"--{flag}", dest=flag)
    parser.add_argument("--workers", dest="workers")
    parser.add_argument("--out", dest="out")
    parser.add_argument("--format", dest="format", choices=("csv", "json"))
    parser.add_argument("--timing", dest="timing", action="store_const", const="true",
                        help="fill the seconds column (makes output run-dependent)")


def _settings(args: argparse.Namespace) -> dict[str, str]:
    settings = read_config_file(args.config) if args.config else {}
    for key in list(EXPERIMENT_KEYS) + list(OUTPUT_KEYS):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def build_config(settings: dict[str, str]) -> ExperimentConfig:
    kwargs = {}
    for key, (field, parse) in EXPERIMENT_KEYS.items():
        if key in settings:
            try:
                kwargs[field] = parse(settings[key])
            except ValueError:
                raise ConfigError(f"bad value for {key}: {settings[key]!r}") from None
    for required in ("env", "algo", "sims", "runs"):
        if required not in kwargs:
            raise ConfigError(f"missing --{required}")
    return ExperimentConfig(**kwargs).validate()


def _output_options(settings: dict[str, str]) -> tuple[int, str | None, str, bool]:
    try:
        workers = int(settings.get("workers", 1))
        timing = _bool(settings.get("timing", "false"))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    fmt = settings.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    return workers, settings.get("out"), fmt, timing


def _parse_axis(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise ConfigError(f"axis must look like name=v1,v2: {text!r}")
    name, values = text.split("=", 1)
    name = name.strip().replace("_", "-")
    if name not in EXPERIMENT_KEYS:
        raise ConfigError(f"unknown grid axis {name!r}")
    field, parse = EXPERIMENT_KEYS[name]
    try:
        return field, [parse(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad values for axis {name!r}") from None


def cmd_run(args) -> int:
    settings = _settings(args)
    config = build_config(settings)
    workers, out, fmt, timing = _output_options(settings)
    row = run_experiment(config, workers=workers, timing=timing)
    text = emit_results([row], out, fmt)
    if out is None:
        sys.stdout.write(text)
    return 0


def cmd_grid(args) -> int:
    settings = _settings(args)
    config = build_config(settings)
    workers, out, fmt, timing = _output_options(settings)
    if args.increasing_p:
        orders = [_order(v) for v in args.increasing_p.split(",") if v.strip()]
        best, rows = increasing_p_search(config, orders, workers, timing)
    else:
        axes = dict(_parse_axis(a) for a in args.axis or [])
        best, rows = grid_search(config, axes, workers, timing)
    text = emit_results(rows, out, fmt)
    if out is None:
        sys.stdout.write(text)
    print(f"best: p={best.p} c={best.c} gamma={best.gamma}", file=sys.stderr)
    return 0


def cmd_checks(args) -> int:
    from . import theory

    checks = {
        "concentration": theory.check_concentration,
        "suboptimal_growth": theory.check_suboptimal_growth,
        "failure_decay": theory.check_failure_decay,
        "tree_bias": theory.check_tree_bias,
    }
    names = args.only or list(checks)
    unknown = [n for n in names if n not in checks]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; choose from {sorted(checks)}")
    reports = [checks[name]() for name in names]
    text = "".join(r.to_json() + "\n" for r in reports)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poweruct", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate one configuration")
    _add_experiment_flags(run)
    run.set_defaults(func=cmd_run)

    grid = sub.add_parser("grid", help="evaluate a grid of configurations")
    _add_experiment_flags(grid)
    grid.add_argument("--axis", action="append", help="name=v1,v2,...; repeat for a Cartesian product")
    grid.add_argument("--increasing-p", help="orders to try in turn, stopping once the mean drops")
    grid.set_defaults(func=cmd_grid)

    checks = sub.add_parser("checks", help="run the statistical check suite (JSON lines)")
    checks.add_argument("--only", action="append", help="check name; repeatable")
    checks.add_argument("--out")
    checks.set_defaults(func=cmd_checks)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"poweruct: config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"poweruct: I/O error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
