"""Input event streams built from the ``stimulus`` section of a config."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import _rng
from ..errors import ValidationError


def read_event_file(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSV with a ``tick,address[,inhibitory]`` header."""
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            body = fh.read()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read stimulus {path}: {exc.strerror}") from exc
    if header[:2] != ["tick", "address"]:
        raise ValidationError(f"{path}: header must start with 'tick,address'")
    if not body.strip():
        z = np.zeros(0, dtype=np.int64)
        return z, z, z.astype(bool)
    arr = np.loadtxt(body.splitlines(), delimiter=",", dtype=np.int64, ndmin=2)
    inh = arr[:, 2].astype(bool) if arr.shape[1] > 2 else np.zeros(len(arr), dtype=bool)
    return arr[:, 0], arr[:, 1], inh


def generate(gen: dict, addresses: np.ndarray, run_ticks: int | None, tick_seconds: float,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    start = gen.get("start", 0)
    kind = gen["kind"]
    if kind == "uniform":
        k = gen["events_per_address"]
        ticks = np.arange(start, start + k * len(addresses), dtype=np.int64)
        return ticks, np.tile(addresses, k)
    duration = gen.get("duration", (run_ticks or 0) - start)
    duration = max(int(duration), 0)
    if kind == "regular":
        t = np.arange(start, start + duration, gen["period"], dtype=np.int64)
        ticks = np.repeat(t, len(addresses))
        return ticks, np.tile(addresses, len(t))
    p = gen["rate_hz"] * tick_seconds
    if p > 1:
        raise ValidationError(f"rate {gen['rate_hz']} Hz exceeds one event per tick")
    ts, ad = [], []
    for a in addresses.tolist():
        k = int(rng.binomial(duration, p)) if duration else 0
        if k:
            t = np.sort(rng.choice(duration, size=k, replace=False)) + start
            ts.append(t)
            ad.append(np.full(k, a, dtype=np.int64))
    if not ts:
        z = np.zeros(0, dtype=np.int64)
        return z, z
    ticks = np.concatenate(ts)
    addrs = np.concatenate(ad)
    order = np.argsort(ticks, kind="stable")
    return ticks[order].astype(np.int64), addrs[order]


def build_events(cfg, seed: int, limit: int | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge file, inline and generated events into one tick-sorted stream.

    Events on the same tick keep their source order: file, then inline, then
    generators in listed order. Events at or beyond the run length are dropped.
    """
    st = cfg.doc["stimulus"]
    run_ticks = cfg.doc["ticks"]
    T, A, H = [], [], []
    if "file" in st:
        t, a, h = read_event_file(Path(cfg.base_dir) / st["file"])
        T.append(t), A.append(a), H.append(h)
    if st.get("events"):
        ev = st["events"]
        T.append(np.array([e[0] for e in ev], dtype=np.int64))
        A.append(np.array([e[1] for e in ev], dtype=np.int64))
        H.append(np.array([bool(e[2]) if len(e) > 2 else False for e in ev]))
    for gi, g in enumerate(st.get("generators", [])):
        if g["addresses"] == "all":
            if limit is None:
                raise ValidationError("'all' addresses need an engine with a fixed address range")
            addrs = np.arange(limit, dtype=np.int64)
        else:
            addrs = np.asarray(g["addresses"], dtype=np.int64)
        t, a = generate(g, addrs, run_ticks, cfg.doc["tick_seconds"], _rng.stream(seed, _rng.STIMULUS, gi))
        T.append(t), A.append(a), H.append(np.full(len(t), bool(g.get("inhibitory", False))))
    if not T:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z.astype(bool)
    ticks = np.concatenate(T)
    addrs = np.concatenate(A)
    inh = np.concatenate(H)
    order = np.argsort(ticks, kind="stable")
    ticks, addrs, inh = ticks[order], addrs[order], inh[order]
    if run_ticks is not None:
        keep = ticks < run_ticks
        ticks, addrs, inh = ticks[keep], addrs[keep], inh[keep]
    if limit is not None and len(addrs) and (addrs.min() < 0 or addrs.max() >= limit):
        raise ValidationError(f"stimulus address outside 0..{limit - 1}")
    return ticks, addrs, inh
