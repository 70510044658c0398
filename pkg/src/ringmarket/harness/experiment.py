"""Experiment orchestration: runs, sweeps, manifests and replay checks."""

import itertools
import json
import logging
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..analysis import ensemble_stats, price_histogram
from ..lineage import franchise_table
from ..market import COLUMNS, Trajectory, advance, init_state
from ..params import ModelParams
from ..rng import derive_seed
from .io import save_checkpoint, sha256_file, write_table

log = logging.getLogger(__name__)

# sweep axis name -> ModelParams field
SWEEP_AXES = {"gamma": "gamma", "delta": "delta", "coupling": "coupling",
              "memory": "memory_length", "policy": "price_policy"}

CHUNK = 1000
AVERAGED = ("live_fraction", "mean_price", "mean_capital", "unsatisfied_demand")


class SpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    base: ModelParams
    runs: int = 1
    steps: int = 1000
    warmup: int = 0
    sweep: dict = field(default_factory=dict)
    out: Path = Path("out")
    stride: int = 1
    hist_snapshots: int = 1
    hist_spacing: int = 1000
    checkpoint: bool = False

    def __post_init__(self):
        self.out = Path(self.out)
        self.validate()

    def validate(self):
        for name in ("runs", "steps", "stride", "hist_snapshots", "hist_spacing"):
            if getattr(self, name) < 1:
                raise SpecError(f"{name} must be positive")
        if not 0 <= self.warmup < self.steps:
            raise SpecError(f"warmup must lie in [0, steps), got {self.warmup}")
        for axis, values in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise SpecError(f"unknown sweep axis {axis!r}")
            if not values:
                raise SpecError(f"sweep axis {axis!r} is empty")
        for point in self.points():
            point.validate()

    def points(self) -> list:
        """ModelParams for every sweep point, cartesian product in axis order."""
        axes = [a for a in SWEEP_AXES if a in self.sweep]
        combos = itertools.product(*(self.sweep[a] for a in axes)) if axes else [()]
        return [self.base.with_(**{SWEEP_AXES[a]: v for a, v in zip(axes, combo)})
                for combo in combos]

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "runs": self.runs, "steps": self.steps,
                "warmup": self.warmup, "sweep": {k: list(v) for k, v in self.sweep.items()},
                "stride": self.stride, "hist_snapshots": self.hist_snapshots,
                "hist_spacing": self.hist_spacing, "checkpoint": self.checkpoint}

    @classmethod
    def from_dict(cls, d: dict, out) -> "ExperimentSpec":
        d = dict(d)
        base = ModelParams.from_dict(d.pop("base"))
        return cls(base=base, out=out, **d)


@dataclass(frozen=True)
class RunTask:
    params: ModelParams
    sweep_index: int
    run_index: int
    steps: int
    warmup: int
    stride: int
    hist_snapshots: int
    hist_spacing: int
    checkpoint: bool
    out: Path

    @property
    def prefix(self) -> str:
        return f"p{self.sweep_index:03d}_r{self.run_index:03d}"


def timeseries_columns(island_count: int) -> list:
    cols = list(COLUMNS)
    if island_count > 1:
        cols += [f"island_{k}_mean_price" for k in range(island_count)]
    return cols


def simulate(params: ModelParams, steps: int, warmup: int = 0, stride: int = 1,
             snapshot_steps=()):
    """Run one market; returns (recorded Trajectory, final state, snapshot prices)."""
    state = init_state(params)
    snaps = {}
    wanted = sorted(set(snapshot_steps))
    parts = []
    while state.t < steps:
        # stop at every requested snapshot step
        nxt = min([s for s in wanted if s > state.t] + [steps, state.t + CHUNK])
        traj = advance(state, nxt - state.t)
        t = traj["t"]
        keep = (t > warmup) & ((t - warmup) % stride == 0)
        parts.append(Trajectory(traj.table[keep], traj.island_mean_price[keep]))
        if state.t in wanted:
            snaps[state.t] = state.live_prices().copy()
    return Trajectory.concat(parts), state, snaps


def execute_run(task: RunTask) -> dict:
    p = task.params
    snap_at = [task.steps - j * task.hist_spacing for j in range(task.hist_snapshots)]
    snap_at = [s for s in snap_at if s > task.warmup]
    traj, state, snaps = simulate(p, task.steps, task.warmup, task.stride, snap_at)
    out = task.out
    files = []

    name = f"{task.prefix}_timeseries.csv"
    table = np.hstack([traj.table, traj.island_mean_price]) if p.island_count > 1 else traj.table
    write_table(out / name, timeseries_columns(p.island_count), table.tolist())
    files.append(name)

    name = f"{task.prefix}_histogram.csv"
    prices = [snaps[s] for s in sorted(snaps) if snaps[s].size]
    if prices:
        h = price_histogram(prices, time_average=True)
        se = h.stderr if h.stderr is not None else np.full(h.density.size, np.nan)
        rows = zip(h.edges[:-1], h.edges[1:], h.density, se)
    else:
        rows = []
    write_table(out / name, ["bin_lo", "bin_hi", "density", "stderr"], rows)
    files.append(name)

    name = f"{task.prefix}_franchises.csv"
    write_table(out / name, ["label", "size_fraction", "mean_price"],
                [(r.label, r.size_fraction, r.mean_price) for r in franchise_table(state)])
    files.append(name)

    if task.checkpoint:
        name = f"{task.prefix}_state.bbsim"
        save_checkpoint(state, out / name)
        files.append(name)

    averages = {}
    for col in AVERAGED:
        x = traj[col]
        x = x[np.isfinite(x)]
        averages[col] = float(x.mean()) if x.size else float("nan")
    mp = traj["mean_price"]
    mp = mp[np.isfinite(mp)]
    averages["mean_price_std"] = float(mp.std()) if mp.size else float("nan")
    return {"sweep_index": task.sweep_index, "run_index": task.run_index,
            "seed": p.seed, "files": files, "averages": averages}


def plan(spec: ExperimentSpec) -> list:
    master = spec.base.seed
    tasks = []
    for i, point in enumerate(spec.points()):
        for k in range(spec.runs):
            params = point.with_(seed=derive_seed(master, k, i))
            tasks.append(RunTask(params, i, k, spec.steps, spec.warmup, spec.stride,
                                 spec.hist_snapshots, spec.hist_spacing,
                                 spec.checkpoint, spec.out))
    return tasks


def run(spec: ExperimentSpec, jobs: int = 1) -> dict:
    """Execute every run of ``spec`` and write data files plus ``manifest.json``.

    Runs share nothing; with ``jobs > 1`` they execute in worker processes
    and results are merged by (sweep index, run index), so the outputs do
    not depend on ``jobs``.
    """
    spec.out.mkdir(parents=True, exist_ok=True)
    tasks = plan(spec)
    t0 = time.time()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(execute_run, tasks))
    else:
        results = [execute_run(t) for t in tasks]
    results.sort(key=lambda r: (r["sweep_index"], r["run_index"]))
    log.info("%d runs finished in %.1fs", len(results), time.time() - t0)

    points = spec.points()
    files = [f for r in results for f in r["files"]]
    files += write_summaries(spec.out, points, results)

    manifest = {
        "format": "ringmarket-manifest/1",
        "code_version": __version__,
        "spec": spec.to_dict(),
        "master_seed": spec.base.seed,
        "runs": [{"sweep_index": r["sweep_index"], "run_index": r["run_index"],
                  "seed": r["seed"], "files": r["files"]} for r in results],
        "files": {f: sha256_file(spec.out / f) for f in files},
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (spec.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                            encoding="utf-8")
    return manifest


def _axis_columns(point: ModelParams) -> list:
    return [point.gamma, point.delta, point.coupling, point.memory_length,
            point.price_policy.value]


def write_summaries(out: Path, points, results) -> list:
    axis_cols = ["gamma", "delta", "coupling", "memory", "policy"]
    metric_cols = list(AVERAGED) + ["mean_price_std"]
    rows = [[r["sweep_index"], r["run_index"], r["seed"]]
            + _axis_columns(points[r["sweep_index"]])
            + [r["averages"][c] for c in metric_cols] for r in results]
    write_table(out / "runs.csv", ["sweep_index", "run_index", "seed"] + axis_cols + metric_cols,
                rows)

    ens_cols = ["sweep_index"] + axis_cols + ["n"]
    for c in metric_cols:
        ens_cols += [f"{c}_mean", f"{c}_std", f"{c}_se"]
    ens_rows = []
    for i, point in enumerate(points):
        vals = [r["averages"] for r in results if r["sweep_index"] == i]
        row = [i] + _axis_columns(point) + [len(vals)]
        for c in metric_cols:
            if len(vals) >= 2:
                st = ensemble_stats([v[c] for v in vals])
                row += [st.mean, st.std, st.standard_error]
            else:
                row += [vals[0][c], float("nan"), float("nan")]
        ens_rows.append(row)
    write_table(out / "ensemble.csv", ens_cols, ens_rows)
    return ["runs.csv", "ensemble.csv"]


@dataclass
class ReplayReport:
    ok: bool
    checked: int
    mismatches: list
    missing: list

    def summary(self) -> str:
        if self.ok:
            return f"replay OK: {self.checked} files byte-identical"
        parts = []
        if self.mismatches:
            parts.append("differs: " + ", ".join(self.mismatches))
        if self.missing:
            parts.append("missing: " + ", ".join(self.missing))
        return "replay FAILED: " + "; ".join(parts)


def load_manifest(path) -> tuple:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text(encoding="utf-8")), path.parent


def replay_check(manifest_path, jobs: int = 1, workdir: Optional[Path] = None) -> ReplayReport:
    """Re-run the experiment recorded in a manifest and compare every data file."""
    manifest, base_dir = load_manifest(manifest_path)
    missing = [f for f in manifest["files"] if not (base_dir / f).exists()]
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        spec = ExperimentSpec.from_dict(manifest["spec"], out=Path(tmp))
        fresh = run(spec, jobs=jobs)
        mismatches = []
        for name, digest in manifest["files"].items():
            if fresh["files"].get(name) != digest:
                mismatches.append(name)
            elif (base_dir / name).exists() and sha256_file(base_dir / name) != digest:
                mismatches.append(name)
        extra = sorted(set(fresh["files"]) - set(manifest["files"]))
    return ReplayReport(not mismatches and not missing and not extra,
                        len(manifest["files"]), mismatches + extra, missing)
