"""Batch driver: run grids over (model, frequency, initial state, order).

Each run owns a directory named by the hash of its full specification;
re-running a sweep skips completed runs by hash.  Series stream to CSV
row by row and the state checkpoints periodically, so interrupted runs
resume instead of restarting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .hamiltonian import ModelParams, build_static_part, build_drive_part, initial_state
from .krylov import (KrylovConfig, KrylovConvergenceError, default_log_schedule,
                     evolve_stroboscopic, evolve_under_deff, load_checkpoint,
                     save_checkpoint)
from .magnus import assemble_deff
from .observables import make_observables
from .timeseries import SeriesRecorder, TimeSeries

log = logging.getLogger(__name__)

_WORKERS_ENV = "FLOQSIM_WORKERS"

_CONFIG_KEYS = {"model", "omegas", "initial_states", "periods_max", "schedule",
                "orders", "observables", "krylov", "stop", "checkpoint_every",
                "generator", "output_dir"}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def spec_hash(spec: dict) -> str:
    return hashlib.sha256(canonical_json(spec).encode()).hexdigest()[:16]


@dataclass
class RunSpec:
    """Fully resolved specification of one evolution run."""

    model: dict            # ModelParams dict including omega
    domain_walls: int
    periods_max: int
    points_per_decade: int
    orders: list
    observables: list      # subset of {"energy", "entropy", "locals"}
    generator: str         # "floquet" or "deff:<n>"
    krylov: dict
    stop: dict | None = None
    checkpoint_every: int = 0

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "domain_walls": self.domain_walls,
            "periods_max": self.periods_max,
            "points_per_decade": self.points_per_decade,
            "orders": list(self.orders),
            "observables": list(self.observables),
            "generator": self.generator,
            "krylov": self.krylov,
            "stop": self.stop,
        }

    @property
    def hash(self) -> str:
        return spec_hash(self.to_dict())


def expand_observables(spec: RunSpec, D, E, T):
    """Observable callables for the requested kinds, in request order."""
    L = D.L
    maps_by_order = {n: assemble_deff(D, E, T, n) for n in spec.orders}
    obs = []
    for kind in spec.observables:
        if kind == "energy":
            obs.extend(make_observables(maps_by_order, L, entropy=False))
        elif kind == "entropy":
            obs.extend(make_observables({}, L, entropy=True))
        elif kind == "locals":
            obs.extend(make_observables({}, L, entropy=False,
                                        local_kinds=("Z", "X", "ZZ", "XX")))
        else:
            raise ValueError(f"unknown observable kind {kind!r}")
    return obs, maps_by_order


def _make_stop_rule(stop: dict | None, names):
    """Early stop once |observable| dwells below fraction * |initial value|."""
    if not stop:
        return None
    column = stop["observable"]
    if column not in names:
        raise ValueError(f"stop observable {column!r} is not recorded; have {names}")
    fraction = float(stop["fraction"])
    dwell = int(stop.get("dwell", 3))

    def rule(recorder: SeriesRecorder) -> bool:
        recent = recorder.recent_values(column, dwell)
        if len(recent) < dwell:
            return False
        level = fraction * abs(recorder.first_value(column))
        return all(abs(x) <= level for x in recent)

    return rule


def run_one(spec: RunSpec, run_dir: Path) -> dict:
    """Execute (or resume, or hash-skip) a single run; returns its manifest."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / "manifest.json"
    series_path = run_dir / "series.csv"
    ckpt_path = run_dir / "checkpoint.bin"

    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("status") == "completed" and manifest.get("hash") == spec.hash:
            manifest["skipped"] = True
            return manifest

    params = ModelParams.from_dict(spec.model)
    T = params.period
    D = build_static_part(params)
    E = build_drive_part(params)
    v0 = initial_state(params.L, spec.domain_walls)
    schedule = default_log_schedule(spec.periods_max, spec.points_per_decade)
    cfg = KrylovConfig.from_dict(spec.krylov)
    observables, maps = expand_observables(spec, D, E, T)
    names = [name for name, _ in observables]

    start_period = 0
    start_state = None
    resume_rows = None
    if ckpt_path.exists() and series_path.exists():
        state, period, digest = load_checkpoint(ckpt_path)
        if digest == schedule.digest() and state.L == params.L:
            old = TimeSeries.from_csv(series_path)
            keep = old.periods <= period
            resume_rows = list(zip(old.periods[keep], old.times[keep], old.values[keep]))
            start_period = period
            start_state = state.amplitudes
            log.info("resuming run %s at period %d", spec.hash, period)

    metadata = {"spec": spec.to_dict(), "hash": spec.hash,
                "initial_state": {"domain_walls": spec.domain_walls}}
    recorder = SeriesRecorder(names, metadata, stream_path=series_path,
                              resume_rows=resume_rows)
    manifest = {
        "hash": spec.hash,
        "spec": spec.to_dict(),
        "status": "running",
        "schedule_digest": schedule.digest(),
        "floqsim_version": __version__,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1))

    kw = dict(metadata=metadata, recorder=recorder, start_period=start_period,
              start_state=start_state, checkpoint_path=str(ckpt_path),
              checkpoint_every=spec.checkpoint_every,
              stop_rule=_make_stop_rule(spec.stop, names),
              flush_path=str(run_dir / "partial.csv"))
    t0 = time.time()
    try:
        if spec.generator == "floquet":
            series = evolve_stroboscopic(D, E, T, v0, schedule, observables, cfg, **kw)
        elif spec.generator.startswith("deff:"):
            n = int(spec.generator.split(":", 1)[1])
            series = evolve_under_deff(maps.get(n) or assemble_deff(D, E, T, n),
                                       T, v0, schedule, observables, cfg, **kw)
        else:
            raise ValueError(f"unknown generator {spec.generator!r}")
    except KrylovConvergenceError as exc:
        manifest.update(status="failed", error=str(exc),
                        wall_time_s=time.time() - t0)
        manifest_path.write_text(json.dumps(manifest, indent=1))
        return manifest

    series.to_csv(series_path)  # rewrite cleanly (resume may leave duplicates)
    ckpt_path.unlink(missing_ok=True)
    manifest.update(status="completed", wall_time_s=time.time() - t0,
                    n_rows=series.n_rows,
                    final_period=int(series.periods[-1]))
    manifest_path.write_text(json.dumps(manifest, indent=1))
    return manifest


def load_config(path_or_dict) -> dict:
    if isinstance(path_or_dict, (str, Path)):
        cfg = json.loads(Path(path_or_dict).read_text())
    else:
        cfg = dict(path_or_dict)
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
    for key in ("model", "omegas", "initial_states", "periods_max", "output_dir"):
        if key not in cfg:
            raise ValueError(f"sweep config missing required key {key!r}")
    return cfg


def expand_runs(cfg: dict) -> list[RunSpec]:
    """Cartesian product of frequencies and initial states."""
    model_base = dict(cfg["model"])
    if "omega" in model_base:
        raise ValueError("omega belongs in the omegas list, not the model block")
    periods_max = cfg["periods_max"]
    specs = []
    for omega in cfg["omegas"]:
        params = ModelParams.from_dict(model_base, omega=float(omega))
        if isinstance(periods_max, dict):
            pm = int(periods_max[str(omega)])
        else:
            pm = int(periods_max)
        for state in cfg["initial_states"]:
            unknown = set(state) - {"domain_walls"}
            if unknown:
                raise ValueError(f"unknown initial-state keys: {sorted(unknown)}")
            specs.append(RunSpec(
                model=params.to_dict(),
                domain_walls=int(state["domain_walls"]),
                periods_max=pm,
                points_per_decade=int(cfg.get("schedule", {}).get("points_per_decade", 16)),
                orders=list(cfg.get("orders", [0, 2, 4])),
                observables=list(cfg.get("observables", ["energy", "entropy"])),
                generator=cfg.get("generator", "floquet"),
                krylov=KrylovConfig.from_dict(cfg.get("krylov", {})).to_dict(),
                stop=cfg.get("stop"),
                checkpoint_every=int(cfg.get("checkpoint_every", 0)),
            ))
    return specs


def _run_job(args):
    spec, run_dir = args
    return run_one(spec, run_dir)


def run_sweep(config, workers: int | None = None) -> dict:
    """Execute every run of a sweep config; returns the summary dict.

    Completed runs are skipped by hash.  Worker count comes from the
    FLOQSIM_WORKERS environment variable unless given explicitly; each
    run owns its state and output files exclusively.
    """
    cfg = load_config(config)
    out = Path(cfg["output_dir"])
    (out / "runs").mkdir(parents=True, exist_ok=True)
    specs = expand_runs(cfg)
    jobs = [(spec, out / "runs" / spec.hash) for spec in specs]

    if workers is None:
        workers = int(os.environ.get(_WORKERS_ENV, "1"))
    if workers > 1 and len(jobs) > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(workers) as pool:
            manifests = pool.map(_run_job, jobs)
    else:
        manifests = [_run_job(j) for j in jobs]

    summary = {
        "n_runs": len(manifests),
        "completed": sum(m["status"] == "completed" and not m.get("skipped")
                         for m in manifests),
        "skipped": sum(bool(m.get("skipped")) for m in manifests),
        "failed": sum(m["status"] == "failed" for m in manifests),
        "runs": {m["hash"]: m["status"] for m in manifests},
        "config": cfg,
    }
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def load_run(run_dir) -> tuple[dict, TimeSeries]:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    series = TimeSeries.from_csv(run_dir / "series.csv",
                                 metadata={"spec": manifest["spec"],
                                           "hash": manifest["hash"],
                                           "initial_state": {
                                               "domain_walls": manifest["spec"]["domain_walls"]}})
    return manifest, series


def iter_completed_runs(sweep_dir):
    sweep_dir = Path(sweep_dir)
    for mpath in sorted((sweep_dir / "runs").glob("*/manifest.json")):
        manifest = json.loads(mpath.read_text())
        if manifest.get("status") == "completed":
            yield mpath.parent
