"""Run orchestration: trials, workers, artifacts."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .. import _rng
from ..crossbar_parca import precision_sweep
from ..errors import ValidationError
from .config import NetworkConfig, load_config
from .energy import energy_estimate, resolve_profile
from .engines import RUNNERS
from .output import emit_stats, emit_table, format_raster, _atomic_write

_COUNTERS = ("input_events", "synaptic_events", "spikes", "router_hops")


class SimulationError(RuntimeError):
    """An engine failed during a run; the message names engine, trial and seed."""


@dataclass
class RunArtifacts:
    out_dir: Path
    rasters: list[Path]
    stats_path: Path
    timing_path: Path
    stats: dict
    timing: dict
    extra: list[Path] = field(default_factory=list)


def trial_seeds(cfg: NetworkConfig) -> list[int]:
    n = cfg.doc["trials"]
    if n == 1:
        return [cfg.seed]
    return [_rng.trial_seed(cfg.seed, i) for i in range(n)]


def _run_trial(args):
    doc, base_dir, trial, seed = args
    cfg = NetworkConfig(doc, base_dir)
    t0 = time.perf_counter()
    try:
        out = RUNNERS[cfg.engine](cfg, seed)
    except ValidationError:
        raise
    except Exception as exc:
        raise SimulationError(f"{cfg.engine} engine failed in trial {trial} (seed {seed}): {exc}") from exc
    elapsed = time.perf_counter() - t0
    table = resolve_profile(doc["energy_profile"])
    st = out.stats
    stats = {
        "trial": trial,
        "seed": seed,
        **{k: int(st[k]) for k in _COUNTERS},
        "max_backlog": int(st["max_backlog"]),
        "ticks": int(st["ticks"]),
        "energy": energy_estimate(table, st["synaptic_events"], st["spikes"], st["router_hops"]),
        "engine_stats": st.get("engine_stats", {}),
        "raster_records": int(len(out.raster)),
    }
    return format_raster(out.raster, out.with_count), out.extra, stats, elapsed


def execute(cfg: NetworkConfig, workers: int | None = None):
    """Run every trial; results come back in trial order whatever the worker count."""
    seeds = trial_seeds(cfg)
    jobs = [(cfg.doc, cfg.base_dir, i, s) for i, s in enumerate(seeds)]
    workers = workers or cfg.doc["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            return list(ex.map(_run_trial, jobs))
    return [_run_trial(j) for j in jobs]


def run_simulation(config, out_dir=None, *, seed: int | None = None, ticks: int | None = None,
                   workers: int | None = None) -> RunArtifacts:
    """Validate (if needed), run and write ``raster*.csv``, ``stats.json`` and ``timing.json``.

    ``stats.json`` depends only on the config and seed. Wall-clock figures
    go to ``timing.json`` so the deterministic outputs stay byte-stable.
    """
    cfg = config if isinstance(config, NetworkConfig) else load_config(config)
    if seed is not None or ticks is not None:
        cfg = cfg.with_overrides(seed=seed, ticks=ticks)
    out = Path(out_dir or "out")
    t0 = time.perf_counter()
    results = execute(cfg, workers)
    wall = time.perf_counter() - t0

    single = len(results) == 1
    rasters, extras = [], []
    for i, (data, extra, _, _) in enumerate(results):
        suffix = "" if single else f"_trial{i:03d}"
        p = out / f"raster{suffix}.csv"
        _atomic_write(p, data)
        rasters.append(p)
        for name, blob in sorted(extra.items()):
            stem, ext = name.rsplit(".", 1)
            q = out / f"{stem}{suffix}.{ext}"
            _atomic_write(q, blob)
            extras.append(q)
    trial_stats = [r[2] for r in results]
    totals = {k: sum(s[k] for s in trial_stats) for k in _COUNTERS}
    energy = energy_estimate(resolve_profile(cfg.doc["energy_profile"]), totals["synaptic_events"],
                             totals["spikes"], totals["router_hops"])
    stats = {"format_version": cfg.doc["format_version"], "engine": cfg.engine, "seed": cfg.seed,
             "trials": trial_stats, "totals": totals | {"energy": energy}}
    elapsed = [r[3] for r in results]
    timing = {"wall_clock_s": wall, "trial_wall_clock_s": elapsed,
              "events_per_sec": totals["synaptic_events"] / wall if wall > 0 else 0.0,
              "workers": workers or cfg.doc["workers"]}
    sp, tp = out / "stats.json", out / "timing.json"
    emit_stats(stats, sp)
    emit_stats(timing, tp)
    return RunArtifacts(out, rasters, sp, tp, stats, timing, extras)


def bench(config, repeats: int = 3, **kw) -> dict:
    """Run the config in memory ``repeats`` times and report event throughput."""
    cfg = config if isinstance(config, NetworkConfig) else load_config(config)
    if kw.get("seed") is not None or kw.get("ticks") is not None:
        cfg = cfg.with_overrides(seed=kw.get("seed"), ticks=kw.get("ticks"))
    rates, walls = [], []
    events = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = execute(cfg, 1)
        w = time.perf_counter() - t0
        events = sum(r[2]["synaptic_events"] for r in res)
        walls.append(w)
        rates.append(events / w if w > 0 else 0.0)
    return {"engine": cfg.engine, "synaptic_events": events, "wall_clock_s": walls,
            "events_per_sec": rates, "best_events_per_sec": max(rates)}


SWEEP_COLUMNS = ["levels", "bits", "mean_rel_error", "std_rel_error", "max_rel_error"]


def sweep(config, out_dir=None, *, seed: int | None = None) -> tuple[list[dict], Path]:
    """Crossbar precision sweep; writes ``sweep.csv``."""
    cfg = config if isinstance(config, NetworkConfig) else load_config(config)
    if cfg.engine != "crossbar":
        raise ValidationError(f"sweep needs a crossbar config, not {cfg.engine!r}")
    s = cfg.doc["crossbar"]["sweep"]
    records = precision_sweep(tuple(s["levels"]), s["rows"], s["cols"], s["trials"],
                              cfg.seed if seed is None else seed)
    p = Path(out_dir or "out") / "sweep.csv"
    emit_table(records, SWEEP_COLUMNS, p)
    return records, p
