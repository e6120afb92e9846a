"""Minicolumn/hypercolumn cortex emulator (DeepSouth style).

Neurons are grouped into minicolumns of 100 cells of up to eight types, and
minicolumns into hypercolumns of up to 128. Instead of point-to-point spikes
the fabric moves *count events*: the number of spikes one neuron type of one
minicolumn produced in a 1 ms step. Destinations are not stored; they are
generated from a per-type :class:`ConnectionRule` at delivery time, so the
configuration size depends only on the number of types and targets.

One simulation step (``Cortex.advance``) runs, in order: soma update,
transmission of the new counts into the axonal delay store, reception of the
events due next step, and linear synaptic accumulation of those events.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _rng
from .errors import ValidationError

NEURONS_PER_MINICOLUMN = 100
MAX_TYPES = 8
MAX_MINICOLUMNS = 128
MAX_TARGETS = 16
MIN_DELAY = 1
MAX_DELAY = 16


@dataclass(frozen=True)
class SomaParams:
    leak: float = 0.0          # fraction of V lost per step
    threshold: float = 1.0
    refractory: int = 0        # steps during which the soma ignores input after a spike
    tau_psc: float = 5.0       # PSC time constant in steps (ms)

    def __post_init__(self):
        if not 0.0 <= self.leak < 1.0:
            raise ValidationError("leak must be in [0, 1)")
        if not self.threshold > 0:
            raise ValidationError("threshold must be > 0")
        if self.refractory < 0:
            raise ValidationError("refractory must be >= 0")
        if not self.tau_psc > 0:
            raise ValidationError("tau_psc must be > 0")

    @property
    def psc_decay(self) -> float:
        return math.exp(-1.0 / self.tau_psc)


@dataclass(frozen=True)
class MinicolumnSpec:
    counts: tuple[int, ...] = (NEURONS_PER_MINICOLUMN,)
    soma: tuple[SomaParams, ...] = (SomaParams(),)

    def __post_init__(self):
        if not 1 <= len(self.counts) <= MAX_TYPES:
            raise ValidationError(f"a minicolumn has 1..{MAX_TYPES} neuron types")
        if sum(self.counts) != NEURONS_PER_MINICOLUMN or min(self.counts) < 0:
            raise ValidationError(f"type counts must be non-negative and sum to {NEURONS_PER_MINICOLUMN}")
        if len(self.soma) != len(self.counts):
            raise ValidationError("one SomaParams per neuron type is required")

    @property
    def n_types(self) -> int:
        return len(self.counts)

    def type_of_neuron(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_types), self.counts)


@dataclass(frozen=True)
class HypercolumnSpec:
    n_minicolumns: int = MAX_MINICOLUMNS
    minicolumn: MinicolumnSpec = MinicolumnSpec()

    def __post_init__(self):
        if not 1 <= self.n_minicolumns <= MAX_MINICOLUMNS:
            raise ValidationError(f"a hypercolumn holds 1..{MAX_MINICOLUMNS} minicolumns")


@dataclass(frozen=True)
class ConnectionTarget:
    """One axonal projection of a source neuron type.

    ``mc_map`` is ``"all"``, ``"identity"`` or ``("offset", k)``;
    ``weights[dst_type]`` is the synaptic weight onto each destination type
    (negative for inhibition). ``delay`` is in steps; fractional values are
    only meaningful with a stochastic axon store.
    """

    hc_offset: int = 0
    delay: float = 1
    mc_map: object = "all"
    weights: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not MIN_DELAY <= self.delay <= MAX_DELAY:
            raise ValidationError(f"delay must be in [{MIN_DELAY}, {MAX_DELAY}]")
        m = self.mc_map
        if not (m in ("all", "identity") or (isinstance(m, tuple) and len(m) == 2 and m[0] == "offset")):
            raise ValidationError(f"unsupported mc_map {m!r}")


@dataclass(frozen=True)
class ConnectionRule:
    """Projections per source type: ``targets[src_type]`` lists up to 16 targets."""

    targets: tuple[tuple[ConnectionTarget, ...], ...] = ((),)

    def __post_init__(self):
        for t, tl in enumerate(self.targets):
            if len(tl) > MAX_TARGETS:
                raise ValidationError(f"type {t} has {len(tl)} targets; at most {MAX_TARGETS}")

    def storage_words(self) -> int:
        """Configuration words needed: per target an offset, delay, map and one weight per type."""
        return sum(3 + len(tg.weights) for tl in self.targets for tg in tl)


class CountEvent(NamedTuple):
    src_hc: int
    src_mc: int
    src_type: int
    count: int
    delay: float
    target: int = 0             # index into the source type's target list
    created: int = 0
    # explicit destination for external input: (hc, mc, weights) or None
    external: tuple | None = None


class Destination(NamedTuple):
    hc: int
    mc: int
    delay: float
    weights: tuple[float, ...]


def _mc_targets(mc_map, src_mc: int, n_mc: int) -> range | list[int]:
    if mc_map == "all":
        return range(n_mc)
    if mc_map == "identity":
        return [src_mc] if src_mc < n_mc else []
    k = (src_mc + mc_map[1]) % n_mc
    return [k]


def generate_destinations(src_hc: int, src_mc: int, src_type: int, rule: ConnectionRule,
                          n_hypercolumns: int, n_minicolumns: int, target: int | None = None
                          ) -> tuple[list[Destination], int]:
    """Enumerate destination minicolumns for a source, on the fly.

    Returns ``(destinations, skipped)`` where ``skipped`` counts targets whose
    hypercolumn offset falls outside ``[0, n_hypercolumns)``. ``target``
    restricts the enumeration to one projection.
    """
    out: list[Destination] = []
    skipped = 0
    tl = rule.targets[src_type] if src_type < len(rule.targets) else ()
    idx = range(len(tl)) if target is None else [target]
    for i in idx:
        tg = tl[i]
        hc = src_hc + tg.hc_offset
        if not 0 <= hc < n_hypercolumns:
            skipped += 1
            continue
        for mc in _mc_targets(tg.mc_map, src_mc, n_minicolumns):
            out.append(Destination(hc, mc, tg.delay, tg.weights))
    return out, skipped


class AxonBuffer:
    """Two-phase delay store with one FIFO region per integer delay value.

    ``tx`` files an event under ``floor(delay)`` with its due step. ``rx``
    drains each region in delay order. In stochastic mode an event whose
    desired delay ``d`` is fractional is held one extra step with probability
    ``d - floor(d)``, so the realized delay is ``floor(d)`` or ``floor(d)+1``
    with mean exactly ``d``.
    """

    def __init__(self, stochastic: bool = False):
        self.stochastic = stochastic
        self.bins: list[deque] = [deque() for _ in range(MAX_DELAY + 1)]
        self.held: deque = deque()
        self.enqueued = 0
        self.dequeued = 0

    def __len__(self):
        return sum(len(b) for b in self.bins) + len(self.held)


def axon_tx(ev: CountEvent, buf: AxonBuffer, now: int) -> None:
    d = ev.delay
    if not MIN_DELAY <= d <= MAX_DELAY:
        raise ValidationError(f"axonal delay {d} outside [{MIN_DELAY}, {MAX_DELAY}]")
    if not buf.stochastic and d != int(d):
        raise ValidationError("fractional delays need a stochastic axon store")
    base = int(math.floor(d))
    buf.bins[base].append((now + base, ev))
    buf.enqueued += 1


def axon_rx(buf: AxonBuffer, now: int, rng: np.random.Generator | None = None
            ) -> list[tuple[CountEvent, int]]:
    """Events due at ``now`` with their realized delay, in region order."""
    out = []
    held_next = deque()
    while buf.held and buf.held[0][0] <= now:
        due, ev, realized = buf.held.popleft()
        out.append((ev, realized))
    for base in range(MIN_DELAY, MAX_DELAY + 1):
        q = buf.bins[base]
        while q and q[0][0] <= now:
            due, ev = q.popleft()
            frac = ev.delay - base
            if buf.stochastic and frac > 0:
                if rng is None:
                    raise ValidationError("stochastic axon store needs an rng")
                if rng.random() < frac:
                    held_next.append((due + 1, ev, base + 1))
                    continue
            out.append((ev, base))
    buf.held.extend(held_next)
    buf.dequeued += len(out)
    return out


def synapse_accumulate(due: Sequence[CountEvent], rule: ConnectionRule, n_hypercolumns: int,
                       n_minicolumns: int, n_types: int) -> np.ndarray:
    """Weighted input per ``(hc, mc, dst_type)`` from the events due this step.

    Events are summed in canonical source order, so the result does not
    depend on the order they were received in.
    """
    acc = np.zeros((n_hypercolumns, n_minicolumns, n_types))
    for ev in sorted(due, key=_canonical):
        if ev.external is not None:
            hc, mc, w = ev.external
            acc[hc, mc, :] += ev.count * np.asarray(w, dtype=float)
            continue
        tg = rule.targets[ev.src_type][ev.target]
        hc = ev.src_hc + tg.hc_offset
        if not 0 <= hc < n_hypercolumns:
            continue
        w = ev.count * np.asarray(tg.weights, dtype=float)
        if tg.mc_map == "all":
            acc[hc, :, :] += w
        else:
            for mc in _mc_targets(tg.mc_map, ev.src_mc, n_minicolumns):
                acc[hc, mc, :] += w
    return acc


def _canonical(ev: CountEvent):
    ext = ev.external
    return (ext is not None, ev.src_hc, ev.src_mc, ev.src_type, ev.target,
            ev.created, ev.count, () if ext is None else (ext[0], ext[1], tuple(ext[2])))


@dataclass
class MinicolumnState:
    V: np.ndarray
    psc: np.ndarray
    refrac_until: np.ndarray


def minicolumn_update(state: MinicolumnState, spec: MinicolumnSpec, inputs: np.ndarray,
                      tick: int) -> tuple[np.ndarray, np.ndarray]:
    """Advance the somas of a block of minicolumns by one step, in place.

    ``state`` arrays have shape ``(..., 100)`` and ``inputs`` shape
    ``(..., n_types)``. Per neuron: ``psc <- psc * exp(-1/tau) + input``;
    outside refractoriness ``V <- V * (1 - leak) + psc``; reaching threshold
    emits a spike, resets ``V`` to 0 and blocks integration for
    ``refractory`` steps. Returns the spike counts per type, shape
    ``(..., n_types)``, and the boolean spike mask, shape ``(..., 100)``.
    """
    types = spec.type_of_neuron()
    decay = np.array([s.psc_decay for s in spec.soma])[types]
    keep = 1.0 - np.array([s.leak for s in spec.soma])[types]
    thr = np.array([s.threshold for s in spec.soma])[types]
    refr = np.array([s.refractory for s in spec.soma])[types]

    state.psc *= decay
    state.psc += np.take(inputs, types, axis=-1)
    active = tick >= state.refrac_until
    V = np.where(active, state.V * keep + state.psc, state.V)
    spk = active & (V >= thr)
    V[spk] = 0.0
    state.V = V
    state.refrac_until = np.where(spk, tick + refr + 1, state.refrac_until)
    counts = np.zeros(inputs.shape[:-1] + (spec.n_types,), dtype=np.int64)
    for t in range(spec.n_types):
        counts[..., t] = spk[..., types == t].sum(axis=-1)
    return counts, spk


@dataclass
class CortexStats:
    ticks: int = 0
    spikes: int = 0
    source_events: int = 0
    source_event_counts: int = 0
    enqueued: int = 0
    dequeued: int = 0
    skipped_targets: int = 0
    max_backlog: int = 0
    external_events: int = 0
    delay_histogram: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["delay_histogram"] = {str(k): v for k, v in sorted(self.delay_histogram.items())}
        return d


class Cortex:
    """The neural engine plus its Master: a tick-barrier scheduler.

    ``external`` maps a step to a list of ``(hc, mc, count, weights, delay)``
    tuples fed through the axon store as external input.
    """

    def __init__(self, n_hypercolumns: int, hc_spec: HypercolumnSpec, rule: ConnectionRule,
                 stochastic_delays: bool = False, seed: int = 0, record_neurons: bool = False):
        if n_hypercolumns < 1:
            raise ValidationError("need at least one hypercolumn")
        self.n_hc = n_hypercolumns
        self.spec = hc_spec
        self.mc_spec = hc_spec.minicolumn
        self.n_mc = hc_spec.n_minicolumns
        self.n_types = self.mc_spec.n_types
        if len(rule.targets) > self.n_types:
            raise ValidationError("rule defines targets for more types than the minicolumn has")
        for tl in rule.targets:
            for tg in tl:
                if len(tg.weights) != self.n_types:
                    raise ValidationError("each target needs one weight per destination type")
                if not stochastic_delays and tg.delay != int(tg.delay):
                    raise ValidationError("fractional delays need stochastic_delays=True")
        self.rule = rule
        shape = (n_hypercolumns, self.n_mc, NEURONS_PER_MINICOLUMN)
        self.state = MinicolumnState(np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=np.int64))
        self.axon = AxonBuffer(stochastic_delays)
        self.rng = _rng.stream(seed, _rng.AXON)
        self.inputs = np.zeros((n_hypercolumns, self.n_mc, self.n_types))
        self.tick = 0
        self.stats = CortexStats()
        self.record_neurons = record_neurons
        self.count_trace: list[tuple[int, int, int, int, int]] = []
        self.neuron_trace: list[tuple[int, int, int, str]] = []

    @property
    def tm_ratio(self) -> int:
        """Logical minicolumns served by the one physical minicolumn."""
        return self.n_hc * self.n_mc

    def inject(self, hc: int, mc: int, count: int, weights: Sequence[float], delay: float = 1) -> None:
        """Queue external input for delivery ``delay`` steps after the current step."""
        if not (0 <= hc < self.n_hc and 0 <= mc < self.n_mc):
            raise ValidationError(f"external input to ({hc}, {mc}) outside the network")
        if len(weights) != self.n_types:
            raise ValidationError("external input needs one weight per type")
        ev = CountEvent(-1, -1, -1, int(count), delay, 0, self.tick, (hc, mc, tuple(float(w) for w in weights)))
        axon_tx(ev, self.axon, self.tick)
        self.stats.enqueued += 1
        self.stats.external_events += 1

    def advance(self) -> int:
        """One barrier-synchronized step; returns the new step index."""
        t = self.tick
        st = self.stats
        counts, spk = minicolumn_update(self.state, self.mc_spec, self.inputs, t)
        st.spikes += int(counts.sum())
        if self.record_neurons:
            for hc, mc in zip(*np.nonzero(spk.any(axis=-1))):
                bits = int("".join("1" if b else "0" for b in spk[hc, mc][::-1]), 2)
                self.neuron_trace.append((t, int(hc), int(mc), f"{bits:025x}"))
        nz = np.argwhere(counts > 0)
        for hc, mc, ty in nz.tolist():
            c = int(counts[hc, mc, ty])
            self.count_trace.append((t, hc, mc, ty, c))
            st.source_events += 1
            st.source_event_counts += c
            tl = self.rule.targets[ty] if ty < len(self.rule.targets) else ()
            for i, tg in enumerate(tl):
                ev = CountEvent(hc, mc, ty, c, tg.delay, i, t)
                axon_tx(ev, self.axon, t)
                st.enqueued += 1
        st.max_backlog = max(st.max_backlog, len(self.axon))
        due = axon_rx(self.axon, t + 1, self.rng)
        st.dequeued += len(due)
        for _, realized in due:
            st.delay_histogram[realized] = st.delay_histogram.get(realized, 0) + 1
        self.inputs = synapse_accumulate([ev for ev, _ in due], self.rule, self.n_hc, self.n_mc, self.n_types)
        for ev, _ in due:
            if ev.external is None:
                tg = self.rule.targets[ev.src_type][ev.target]
                if not 0 <= ev.src_hc + tg.hc_offset < self.n_hc:
                    st.skipped_targets += 1
        self.tick = t + 1
        st.ticks += 1
        return self.tick

    def run(self, n_ticks: int, external: dict | None = None) -> CortexStats:
        for _ in range(n_ticks):
            for hc, mc, count, weights, delay in (external or {}).get(self.tick, ()):
                self.inject(hc, mc, count, weights, delay)
            self.advance()
        return self.stats

    def flush(self) -> int:
        """Deliver everything still in the axon store without stepping the somas.

        Returns the number of events delivered. Used at the end of a run so
        every transmitted event is accounted for.
        """
        n = 0
        t = self.tick
        while len(self.axon):
            t += 1
            due = axon_rx(self.axon, t, self.rng)
            self.stats.dequeued += len(due)
            for _, realized in due:
                self.stats.delay_histogram[realized] = self.stats.delay_histogram.get(realized, 0) + 1
            n += len(due)
        return n


def master_advance(engine: Cortex, tick: int) -> int:
    if tick != engine.tick:
        raise ValidationError(f"engine is at step {engine.tick}, not {tick}")
    return engine.advance()


def neuron_destination_count(src_hc: int, src_mc: int, src_type: int, rule: ConnectionRule,
                             n_hypercolumns: int, n_minicolumns: int) -> int:
    dests, _ = generate_destinations(src_hc, src_mc, src_type, rule, n_hypercolumns, n_minicolumns)
    return len(dests) * NEURONS_PER_MINICOLUMN
