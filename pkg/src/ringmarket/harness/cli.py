"""Command line: ``ringmarket {run,sweep,analyze,replay-check}``.

Exit codes: 0 success, 1 replay mismatch, 2 validation error, 3 I/O error,
4 analysis precondition failure.
"""

import argparse
import logging
import sys

from ..analysis import AnalysisError
from ..params import ModelParams
from .analyze import AnalysisSpec, analyze
from .config import ConfigError, load_config, merge
from .experiment import ExperimentSpec, replay_check, run

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID, EXIT_IO, EXIT_ANALYSIS = 0, 1, 2, 3, 4

# flag -> (ModelParams field or None for spec-level, parser, default)
SETTINGS = {
    "n": ("n_sellers", int, 1000),
    "gamma": ("gamma", float, 0.5),
    "delta": ("delta", float, 0.04),
    "overhead": ("overhead", float, 2.0),
    "p_max": ("p_max", float, 2.0),
    "scheme": ("scheme", str, "continuous"),
    "policy": ("price_policy", str, "evolving"),
    "islands": ("island_count", int, 1),
    "coupling": ("coupling", float, 1.0),
    "memory": ("memory_length", int, 1),
    "seed": ("seed", int, 0),
    "overhead_pool": ("overhead_pool", str, "sites"),
    "immediate_refill": ("immediate_refill", None, False),
    "steps": (None, int, 1000),
    "warmup": (None, int, 0),
    "runs": (None, int, 1),
    "out": (None, str, "out"),
    "stride": (None, int, 1),
    "jobs": (None, int, 1),
    "checkpoint": (None, None, False),
    "hist_snapshots": (None, int, 1),
    "hist_spacing": (None, int, 1000),
}
SWEEPABLE = {"gamma": "gamma", "delta": "delta", "coupling": "coupling",
             "memory": "memory", "policy": "policy"}


class UsageError(ValueError):
    pass


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {value!r}")


def _convert(key, value, allow_list):
    _, kind, _ = SETTINGS[key]
    if kind is None:
        return _parse_bool(value)
    if not isinstance(value, str):
        return value
    parts = [p.strip() for p in value.split(",")]
    if len(parts) > 1:
        if not allow_list or key not in SWEEPABLE:
            raise UsageError(f"--{key.replace('_', '-')} takes a single value here")
        try:
            return [kind(p) for p in parts]
        except ValueError:
            raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from None
    try:
        return kind(parts[0])
    except ValueError:
        raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from None


def build_spec(args, allow_sweep: bool) -> tuple:
    """Turn parsed flags (plus an optional config file) into (ExperimentSpec, jobs)."""
    config = load_config(args.config) if args.config else {}
    cli = {k: getattr(args, k) for k in SETTINGS}
    settings = merge({k: v[2] for k, v in SETTINGS.items()}, config, cli)
    values = {k: _convert(k, v, allow_sweep) for k, v in settings.items()}
    sweep = {}
    for key in SWEEPABLE:
        if isinstance(values[key], list):
            sweep[SWEEPABLE[key]] = values[key]
            values[key] = values[key][0]
    params = ModelParams(**{field: values[k] for k, (field, _, _) in SETTINGS.items() if field})
    spec = ExperimentSpec(base=params, runs=values["runs"], steps=values["steps"],
                          warmup=values["warmup"], sweep=sweep, out=values["out"],
                          stride=values["stride"], hist_snapshots=values["hist_snapshots"],
                          hist_spacing=values["hist_spacing"],
                          checkpoint=values["checkpoint"])
    return spec, values["jobs"]


def _add_sim_flags(p: argparse.ArgumentParser, sweep: bool):
    many = " (comma list sweeps it)" if sweep else ""
    p.add_argument("--config", help="key = value file; explicit flags override it")
    p.add_argument("--n", help="number of seller sites")
    p.add_argument("--gamma", help="repopulation probability" + many)
    p.add_argument("--delta", help="mutation half-width" + many)
    p.add_argument("--overhead", help="overhead cost per draw")
    p.add_argument("--p-max", dest="p_max", help="initial prices are uniform on [0, p-max)")
    p.add_argument("--scheme", help="continuous or discrete")
    p.add_argument("--policy", help="evolving or bertrand_fixed" + many)
    p.add_argument("--islands", help="number of islands")
    p.add_argument("--coupling", help="global copy probability" + many)
    p.add_argument("--memory", help="price memory length" + many)
    p.add_argument("--steps", help="timesteps per run")
    p.add_argument("--warmup", help="initial timesteps left out of the outputs")
    p.add_argument("--runs", help="runs per parameter point")
    p.add_argument("--seed", help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--stride", help="record every k-th timestep")
    p.add_argument("--overhead-pool", dest="overhead_pool", help="sites or live")
    p.add_argument("--immediate-refill", dest="immediate_refill", action="store_const",
                   const=True, help="let sites vacated this timestep be refilled at once")
    p.add_argument("--checkpoint", action="store_const", const=True,
                   help="write the end state of each run")
    p.add_argument("--hist-snapshots", dest="hist_snapshots",
                   help="price snapshots averaged into each histogram")
    p.add_argument("--hist-spacing", dest="hist_spacing", help="timesteps between snapshots")
    p.add_argument("--jobs", help="worker processes")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringmarket",
                                     description="Boom-bust ring market simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_sim_flags(sub.add_parser("run", help="run one parameter point"), sweep=False)
    _add_sim_flags(sub.add_parser("sweep", help="run a grid of parameter points"), sweep=True)

    a = sub.add_parser("analyze", help="derive period, census and ensemble tables")
    a.add_argument("inputs", nargs="+", help="run directories, manifests or timeseries CSVs")
    a.add_argument("--out", required=True, help="directory for derived tables")
    a.add_argument("--window", type=int, default=40, help="moving-average window")
    a.add_argument("--column", default="live_fraction", help="series used for periods")
    a.add_argument("--census-cutoff", type=float, default=100.0)
    a.add_argument("--census-threshold", type=float, default=0.9)

    r = sub.add_parser("replay-check", help="rerun a manifest and compare outputs")
    r.add_argument("manifest", help="manifest.json or the directory holding it")
    r.add_argument("--jobs", type=int, default=1)
    return parser


def dispatch(args) -> int:
    if args.command in ("run", "sweep"):
        spec, jobs = build_spec(args, allow_sweep=args.command == "sweep")
        manifest = run(spec, jobs=jobs)
        print(f"wrote {len(manifest['files'])} files and manifest.json to {spec.out}")
        return EXIT_OK
    if args.command == "analyze":
        spec = AnalysisSpec(args.window, args.column, args.census_cutoff,
                            args.census_threshold)
        for name in analyze(args.inputs, args.out, spec):
            print(name)
        return EXIT_OK
    report = replay_check(args.manifest, jobs=args.jobs)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_MISMATCH


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except AnalysisError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (UsageError, ConfigError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
