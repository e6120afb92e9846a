"""Engine adapters: semantic checks and runners for each config engine.

Every runner takes a validated config and a seed and returns an
:class:`EngineOutput` holding the raster (an integer array), its column
layout and the engine's counters in a common vocabulary
(``input_events``, ``synaptic_events``, ``spikes``, ``router_hops``,
``max_backlog``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _rng
from ..aer_ifat import IfatArray, Lut, LutEntry, MismatchModel, run_ifat
from ..cortex_fabric import (NEURONS_PER_MINICOLUMN, ConnectionRule, ConnectionTarget, Cortex,
                             HypercolumnSpec, MinicolumnSpec, SomaParams, neuron_destination_count)
from ..crossbar_parca import (POT, DeviceModel, MitigationConfig, apply_device_update,
                              crossbar_read_ideal, crossbar_read_nonideal, device_bounds, quantize,
                              smart_program)
from ..errors import ValidationError
from ..hiaer_router import (CORES_PER_CHIP, MAX_COPIES, NEURONS_PER_CORE, SYNAPSES_PER_NEURON,
                            DestEntry, DynapGrid, SourceId, SynapseCam)
from ..neuron_core import MnDiscreteParams, WtaNeuronParams
from .presets import build_wta_preset, run_wta
from .stimulus import build_events


@dataclass
class EngineOutput:
    raster: np.ndarray
    with_count: bool
    stats: dict
    extra: dict = field(default_factory=dict)     # file name -> bytes


def _try(errs: list, where: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ValidationError, TypeError, ValueError) as exc:
        errs.append(f"{where}: {exc}")
        return None


# ---------------------------------------------------------------------------
# ifat


def _ifat_parts(cfg, errs: list):
    s = cfg.doc["ifat"]
    array = _try(errs, "ifat", IfatArray, s["rows"], s["cols"], s["mode"])
    params = _try(errs, "ifat.neuron", MnDiscreteParams, mode=s["mode"], **s["neuron"])
    mismatch = _try(errs, "ifat.mismatch_sigma", MismatchModel, s["mismatch_sigma"], cfg.seed)
    entries = []
    for i, e in enumerate(s["lut"]):
        ent = _try(errs, f"ifat.lut[{i}]", LutEntry, **e)
        if ent is None:
            continue
        if array is not None and not 0 <= ent.dst < array.n_neurons:
            errs.append(f"ifat.lut[{i}].dst: destination {ent.dst} outside array of {array.n_neurons} neurons")
            continue
        entries.append(ent)
    return array, params, mismatch, (Lut(entries) if s["lut"] else None)


def check_ifat(cfg) -> list[str]:
    errs: list[str] = []
    _ifat_parts(cfg, errs)
    return errs


def run_ifat_engine(cfg, seed: int) -> EngineOutput:
    errs: list[str] = []
    array, params, _, lut = _ifat_parts(cfg, errs)
    if errs:
        raise ValidationError("; ".join(errs))
    s = cfg.doc["ifat"]
    mismatch = MismatchModel(s["mismatch_sigma"], seed)
    ticks, addrs, inh = build_events(cfg, seed, address_limit(cfg))
    res = run_ifat((ticks, addrs, inh), array, params, lut, mismatch, service_rate=s["service_rate"],
                   leak_divisor_m=s["leak_divisor_m"], leak_divisor_t=s["leak_divisor_t"], seed=seed,
                   max_ticks=cfg.doc["ticks"])
    raster = np.column_stack([res.raster_ticks, res.raster_addresses]) if len(res.raster_ticks) \
        else np.zeros((0, 2), dtype=np.int64)
    st = res.stats
    stats = {"input_events": st["input_events"], "synaptic_events": st["synaptic_updates"],
             "spikes": st["output_spikes"], "router_hops": 0, "max_backlog": st["max_backlog"],
             "ticks": st["last_tick"] + 1 if st["input_events"] else 0, "engine_stats": st}
    return EngineOutput(raster, False, stats)


# ---------------------------------------------------------------------------
# hiaer


def _hiaer_grid(cfg, errs: list):
    s = cfg.doc["hiaer"]
    grid = _try(errs, "hiaer", DynapGrid, s["width"], s["height"])
    if grid is None:
        return None
    W, H = grid.shape

    def loc_ok(where, chip, core, neuron):
        ok = True
        if not (0 <= chip[0] < W and 0 <= chip[1] < H):
            errs.append(f"{where}.chip: {chip} outside the {W}x{H} grid")
            ok = False
        if not 0 <= core < CORES_PER_CHIP:
            errs.append(f"{where}.core: {core} not in 0..{CORES_PER_CHIP - 1}")
            ok = False
        if not 0 <= neuron < NEURONS_PER_CORE:
            errs.append(f"{where}.neuron: {neuron} not in 0..{NEURONS_PER_CORE - 1}")
            ok = False
        return ok

    seen = set()
    for i, sy in enumerate(s["synapses"]):
        where = f"hiaer.synapses[{i}]"
        ok = loc_ok(where, sy["chip"], sy["core"], sy["neuron"])
        if not 0 <= sy["slot"] < SYNAPSES_PER_NEURON:
            errs.append(f"{where}.slot: {sy['slot']} not in 0..{SYNAPSES_PER_NEURON - 1}")
            ok = False
        cam = _try(errs, where, SynapseCam, sy["tag"], sy["weight"], sy["type"])
        key = (tuple(sy["chip"]), sy["core"], sy["neuron"], sy["slot"])
        if key in seen:
            errs.append(f"{where}: slot already programmed by an earlier entry")
            ok = False
        seen.add(key)
        if ok and cam is not None:
            grid.chips[key[0]].cores[sy["core"]].program(sy["neuron"], sy["slot"], cam)
    srcs = set()
    for i, f in enumerate(s["fanout"]):
        where = f"hiaer.fanout[{i}]"
        ok = loc_ok(where, f["chip"], f["core"], f["neuron"])
        if len(f["dests"]) > MAX_COPIES:
            errs.append(f"{where}.dests: {len(f['dests'])} destinations; at most {MAX_COPIES}")
            ok = False
        src = SourceId(tuple(f["chip"]), f["core"], f["neuron"])
        if src in srcs:
            errs.append(f"{where}: source already has a fan-out entry")
            ok = False
        srcs.add(src)
        dests = []
        for j, d in enumerate(f["dests"]):
            de = _try(errs, f"{where}.dests[{j}]", DestEntry, tuple(d["dchip"]), d["core_mask"], d["tag"])
            if de is None:
                ok = False
            dests.append(de)
        if ok:
            grid.lut[src] = dests
    return grid


def check_hiaer(cfg) -> list[str]:
    errs: list[str] = []
    _hiaer_grid(cfg, errs)
    return errs


def run_hiaer_engine(cfg, seed: int) -> EngineOutput:
    errs: list[str] = []
    grid = _hiaer_grid(cfg, errs)
    if errs:
        raise ValidationError("; ".join(errs))
    ticks, addrs, _ = build_events(cfg, seed, address_limit(cfg))
    # routing is static, so each distinct source is routed once and replayed
    cache: dict[int, tuple[np.ndarray, np.ndarray, dict]] = {}
    totals = dict.fromkeys(grid.stats.as_dict(), 0)
    rows_t, rows_a, rows_c = [], [], []
    uniq_t, starts = np.unique(ticks, return_index=True)
    bounds = list(starts) + [len(ticks)]
    for k, t in enumerate(uniq_t.tolist()):
        acc: dict[int, int] = {}
        for s in addrs[bounds[k]:bounds[k + 1]].tolist():
            hit = cache.get(s)
            if hit is None:
                before = grid.stats.as_dict()
                acts = grid.route_spike(grid.source_from_index(s))
                after = grid.stats.as_dict()
                neurons = np.array([grid.neuron_index(a.chip, a.core, a.neuron) for a in acts], dtype=np.int64)
                u, c = np.unique(neurons, return_counts=True)
                hit = cache[s] = (u, c, {key: after[key] - before[key] for key in after})
            u, c, delta = hit
            for key, v in delta.items():
                totals[key] += v
            for n_, c_ in zip(u.tolist(), c.tolist()):
                acc[n_] = acc.get(n_, 0) + c_
        for n_ in sorted(acc):
            rows_t.append(t)
            rows_a.append(n_)
            rows_c.append(acc[n_])
    raster = np.column_stack([rows_t, rows_a, rows_c]).astype(np.int64) if rows_t \
        else np.zeros((0, 3), dtype=np.int64)
    stats = {"input_events": int(len(ticks)), "synaptic_events": totals["activations"],
             "spikes": totals["spikes"], "router_hops": totals["hops"], "max_backlog": 0,
             "ticks": int(ticks[-1]) + 1 if len(ticks) else 0, "engine_stats": totals}
    return EngineOutput(raster, True, stats)


# ---------------------------------------------------------------------------
# cortex


def _mc_map(m):
    return ("offset", m["offset"]) if isinstance(m, dict) else m


def _cortex_parts(cfg, errs: list):
    s = cfg.doc["cortex"]
    somas = [_try(errs, f"cortex.types[{i}]", SomaParams, t["leak"], t["threshold"], t["refractory"], t["tau_psc"])
             for i, t in enumerate(s["types"])]
    n_types = len(s["types"])
    mc = _try(errs, "cortex.types", MinicolumnSpec, tuple(t["count"] for t in s["types"]), tuple(somas)) \
        if None not in somas else None
    hc = _try(errs, "cortex.n_minicolumns", HypercolumnSpec, s["n_minicolumns"], mc) if mc else None
    if len(s["rules"]) > n_types:
        errs.append(f"cortex.rules: {len(s['rules'])} source types listed but only {n_types} types defined")
    targets = []
    for i, tl in enumerate(s["rules"]):
        row = []
        for j, tg in enumerate(tl):
            where = f"cortex.rules[{i}][{j}]"
            if len(tg["weights"]) != n_types:
                errs.append(f"{where}.weights: need {n_types} weights, one per type")
                continue
            if not s["stochastic_delays"] and tg["delay"] != int(tg["delay"]):
                errs.append(f"{where}.delay: fractional delays need stochastic_delays")
                continue
            t = _try(errs, where, ConnectionTarget, tg["hc_offset"], tg["delay"], _mc_map(tg["mc_map"]),
                     tuple(tg["weights"]))
            if t is not None:
                row.append(t)
        targets.append(tuple(row))
    rule = _try(errs, "cortex.rules", ConnectionRule, tuple(targets) or ((),))
    for i, e in enumerate(s["external"]):
        where = f"cortex.external[{i}]"
        if not 0 <= e["hc"] < s["n_hypercolumns"]:
            errs.append(f"{where}.hc: {e['hc']} outside 0..{s['n_hypercolumns'] - 1}")
        if not 0 <= e["mc"] < s["n_minicolumns"]:
            errs.append(f"{where}.mc: {e['mc']} outside 0..{s['n_minicolumns'] - 1}")
        if len(e["weights"]) != n_types:
            errs.append(f"{where}.weights: need {n_types} weights, one per type")
        if not 1 <= e["delay"] <= 16 or (not s["stochastic_delays"] and e["delay"] != int(e["delay"])):
            errs.append(f"{where}.delay: must be an integer in 1..16 (fractional only with stochastic_delays)")
    ew = s.get("external_weights")
    if ew is not None and len(ew) != n_types:
        errs.append(f"cortex.external_weights: need {n_types} weights, one per type")
    return hc, rule


def check_cortex(cfg) -> list[str]:
    errs: list[str] = []
    _cortex_parts(cfg, errs)
    return errs


def run_cortex_engine(cfg, seed: int) -> EngineOutput:
    errs: list[str] = []
    hc_spec, rule = _cortex_parts(cfg, errs)
    if errs:
        raise ValidationError("; ".join(errs))
    s = cfg.doc["cortex"]
    n_hc, n_mc = s["n_hypercolumns"], s["n_minicolumns"]
    n_types = len(s["types"])
    ext_w = tuple(s.get("external_weights") or [1.0] * n_types)
    external: dict[int, list] = {}
    for e in s["external"]:
        external.setdefault(e["tick"], []).append((e["hc"], e["mc"], e["count"], tuple(e["weights"]), e["delay"]))
    ticks, addrs, _ = build_events(cfg, seed, address_limit(cfg))
    if len(ticks):
        pairs, cnt = np.unique(np.column_stack([ticks, addrs]), axis=0, return_counts=True)
        for (t, a), c in zip(pairs.tolist(), cnt.tolist()):
            hc, mc = divmod(a, n_mc)
            external.setdefault(t, []).append((hc, mc, c, ext_w, 1))
    n_ticks = cfg.doc["ticks"]
    if n_ticks is None:
        n_ticks = max(external) + 1 if external else 0
    cx = Cortex(n_hc, hc_spec, rule, s["stochastic_delays"], seed, s["record_neurons"])
    cx.run(n_ticks, external)
    cx.flush()
    st = cx.stats.as_dict()
    fan: dict[tuple, int] = {}
    syn = 0
    for _, h, m, ty, c in cx.count_trace:
        key = (h, m, ty)
        if key not in fan:
            fan[key] = neuron_destination_count(h, m, ty, rule, n_hc, n_mc)
        syn += c * fan[key]
    ext_counts = sum(c for lst in external.values() for (_, _, c, _, _) in lst)
    syn += ext_counts * NEURONS_PER_MINICOLUMN
    trace = [(t, (h * n_mc + m) * n_types + ty, c) for t, h, m, ty, c in cx.count_trace]
    raster = np.asarray(trace, dtype=np.int64).reshape(-1, 3)
    extra = {}
    if s["record_neurons"]:
        lines = ["tick,hc,mc,mask"] + [f"{t},{h},{m},{mask}" for t, h, m, mask in cx.neuron_trace]
        extra["neurons.csv"] = ("\n".join(lines) + "\n").encode()
    stats = {"input_events": int(st["external_events"]), "synaptic_events": int(syn),
             "spikes": int(st["spikes"]), "router_hops": 0, "max_backlog": int(st["max_backlog"]),
             "ticks": n_ticks, "engine_stats": st | {"tm_ratio": cx.tm_ratio}}
    return EngineOutput(raster, True, stats, extra)


# ---------------------------------------------------------------------------
# crossbar


def _crossbar_parts(cfg, errs: list):
    s = cfg.doc["crossbar"]
    dev = _try(errs, "crossbar.device", DeviceModel, **s["device"])
    mit = _try(errs, "crossbar.mitigation", MitigationConfig, **s["mitigation"])
    R, C = s["rows"], s["cols"]
    if "weights" in s:
        W = np.asarray(s["weights"], dtype=float) if len({len(r) for r in s["weights"]}) <= 1 else None
        if W is None or W.shape != (R, C):
            errs.append(f"crossbar.weights: expected a {R}x{C} matrix")
        elif np.any(W < 0) or np.any(W > 1):
            errs.append("crossbar.weights: values must lie in [0, 1]")
    for i, x in enumerate(s.get("inputs", [])):
        if len(x) != R:
            errs.append(f"crossbar.inputs[{i}]: expected {R} entries, got {len(x)}")
    return dev, mit


def check_crossbar(cfg) -> list[str]:
    errs: list[str] = []
    _crossbar_parts(cfg, errs)
    return errs


def program_array(W: np.ndarray, dev: DeviceModel, mit: MitigationConfig, rng: np.random.Generator) -> np.ndarray:
    """Realized conductances for target weights in [0, 1].

    Each weight is written into ``cells_per_weight`` devices starting from
    their off state. Open loop, the pulse count assumes a linear device;
    with smart programming each cell runs the program-and-verify loop.
    The weight's conductance is the mean of its cells.
    """
    M = mit.cells_per_weight
    acc = np.zeros_like(W)
    K = dev.pulses_full_swing
    for _ in range(M):
        g_on, g_off = device_bounds(W.shape, dev, rng) if dev.sigma_spatial > 0 else (None, None)
        lo = dev.G_off if g_off is None else g_off
        hi = dev.G_on if g_on is None else g_on
        if mit.smart_programming:
            target = quantize(lo + W * (hi - lo), dev, g_on=g_on, g_off=g_off)
            # the loop verifies against the nominal device, so clip to its range
            target = np.clip(target, dev.G_off, dev.G_on)
            G = np.array([smart_program(dev.G_off, float(t), dev, rng).g for t in target.ravel()]).reshape(W.shape)
            G = np.clip(G, lo, hi)
        else:
            G = np.asarray(apply_device_update(np.broadcast_to(lo, W.shape).astype(float), np.rint(W * K), POT,
                                               dev, rng, g_on=g_on, g_off=g_off))
        acc += G
    return acc / M


def run_crossbar_engine(cfg, seed: int) -> EngineOutput:
    errs: list[str] = []
    dev, mit = _crossbar_parts(cfg, errs)
    if errs:
        raise ValidationError("; ".join(errs))
    s = cfg.doc["crossbar"]
    R, C = s["rows"], s["cols"]
    rng = _rng.stream(seed, _rng.DEVICE)
    W = np.asarray(s["weights"], dtype=float) if "weights" in s else rng.random((R, C))
    G = program_array(W, dev, mit, rng)
    if "inputs" in s:
        X = np.asarray(s["inputs"], dtype=float).reshape(-1, R)
    else:
        X = (_rng.stream(seed, _rng.STIMULUS).random((s["reads"], R)) < 0.5).astype(float)
    G_ideal = dev.G_off + W * (dev.G_on - dev.G_off)
    rows, errs_rel = [], []
    syn = 0
    for k, x in enumerate(X):
        res = crossbar_read_nonideal(G, x, dev, mit, V_read=s["V_read"], wire_r=s["wire_r"],
                                     adc_bits=s["adc_bits"], threshold=s["threshold"])
        ref = crossbar_read_ideal(G_ideal, x, s["V_read"]) - s["V_read"] * dev.G_off * x.sum()
        norm = np.linalg.norm(ref)
        if norm > 0:
            errs_rel.append(float(np.linalg.norm(res.currents - ref) / norm))
        syn += int(x.sum()) * C * mit.cells_per_weight
        for j, d in enumerate(res.digital.tolist()):
            rows.append((k, j, d))
    raster = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    spikes = int(raster[:, 2].sum()) if s["threshold"] is not None and len(raster) else 0
    e = np.asarray(errs_rel) if errs_rel else np.zeros(1)
    stats = {"input_events": int(X.sum()), "synaptic_events": syn, "spikes": spikes, "router_hops": 0,
             "max_backlog": 0, "ticks": len(X),
             "engine_stats": {"reads": len(X), "mean_rel_error": float(e.mean()),
                              "max_rel_error": float(e.max()), "on_off_ratio": dev.on_off_ratio}}
    return EngineOutput(raster, True, stats)


# ---------------------------------------------------------------------------
# wta


def _wta_parts(cfg, errs: list):
    s = cfg.doc["wta"]
    net = _try(errs, "wta", build_wta_preset, s["rows"], s["cols"], tuple(s["flags"]), s["weights"],
               s["inhibition"], s["wrap"])
    p = _try(errs, "wta.neuron", WtaNeuronParams, **s["neuron"])
    ip = _try(errs, "wta.interneuron", WtaNeuronParams, **s["interneuron"]) if s["interneuron"] else p
    return net, p, ip


def check_wta(cfg) -> list[str]:
    errs: list[str] = []
    _wta_parts(cfg, errs)
    return errs


def run_wta_engine(cfg, seed: int) -> EngineOutput:
    errs: list[str] = []
    net, p, ip = _wta_parts(cfg, errs)
    if errs:
        raise ValidationError("; ".join(errs))
    ticks, addrs, _ = build_events(cfg, seed, net.n_neurons)
    n_ticks = cfg.doc["ticks"]
    if n_ticks is None:
        n_ticks = int(ticks[-1]) + 1 if len(ticks) else 0
    res = run_wta(net, p, (ticks, addrs), n_ticks, ip, cfg.doc["wta"]["input_weight"])
    stats = dict(res.stats, router_hops=0, max_backlog=0,
                 engine_stats={"spike_counts": res.spike_counts.tolist(), "n_neurons": net.n_neurons})
    return EngineOutput(res.raster, False, stats)


# ---------------------------------------------------------------------------


CHECKERS = {"ifat": check_ifat, "hiaer": check_hiaer, "cortex": check_cortex,
            "crossbar": check_crossbar, "wta": check_wta}
RUNNERS = {"ifat": run_ifat_engine, "hiaer": run_hiaer_engine, "cortex": run_cortex_engine,
           "crossbar": run_crossbar_engine, "wta": run_wta_engine}


def address_limit(cfg) -> int | None:
    """Exclusive upper bound on stimulus addresses, or None when unbounded."""
    e = cfg.engine
    s = cfg.doc[e]
    if e == "ifat":
        if s["lut"]:
            return None
        try:
            return IfatArray(s["rows"], s["cols"], s["mode"]).n_neurons
        except ValidationError:
            return None
    if e == "hiaer":
        return s["width"] * s["height"] * CORES_PER_CHIP * NEURONS_PER_CORE
    if e == "cortex":
        return s["n_hypercolumns"] * s["n_minicolumns"]
    if e == "wta":
        return s["rows"] * s["cols"] + (1 if s["inhibition"] else 0)
    return None
