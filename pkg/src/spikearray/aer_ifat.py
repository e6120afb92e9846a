"""Event-driven IFAT array.

The array is a grid of supercells; each supercell holds four cells
(Am, At, Bm, Bt). In LIF mode every cell is an independent leaky I&F neuron,
in MN mode a membrane/threshold cell pair forms one M-N neuron, so a
supercell hosts four or two addressable neurons respectively. All neurons
share one synapse and one comparator, so the chip services a bounded number
of post-synaptic events per tick; the rest wait in a FIFO.

Connectivity lives off-array in a look-up table (:class:`Lut`) mapping a
source address to weighted or probabilistic post-synaptic entries.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _rng
from .errors import ValidationError
from .neuron_core import (EXC, INH, MODE_LIF, MODE_MN, MnDiscreteParams, NeuronState,
                          mn_event_update, threshold_check_and_reset)

CONDUCTANCE = "conductance"
PROBABILISTIC = "probabilistic"

CELLS_PER_SUPERCELL = 4


class NeuronAddr(NamedTuple):
    row: int
    col: int
    cell: int


@dataclass(frozen=True)
class IfatArray:
    """Array geometry. The default 30x34 supercell grid gives 4080 I&F neurons."""

    rows: int = 30
    cols: int = 34
    mode: str = MODE_LIF

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("array needs at least one row and column")
        if self.mode not in (MODE_LIF, MODE_MN):
            raise ValidationError(f"unknown array mode {self.mode!r}")

    @property
    def cells_per_site(self) -> int:
        return CELLS_PER_SUPERCELL if self.mode == MODE_LIF else CELLS_PER_SUPERCELL // 2

    @property
    def n_neurons(self) -> int:
        return self.rows * self.cols * self.cells_per_site

    def encode(self, addr: NeuronAddr) -> int:
        r, c, k = addr
        if not (0 <= r < self.rows and 0 <= c < self.cols and 0 <= k < self.cells_per_site):
            raise ValidationError(f"address {tuple(addr)} outside array")
        return (r * self.cols + c) * self.cells_per_site + k

    def decode(self, flat: int) -> NeuronAddr:
        if not 0 <= flat < self.n_neurons:
            raise ValidationError(f"address {flat} outside array")
        site, k = divmod(flat, self.cells_per_site)
        r, c = divmod(site, self.cols)
        return NeuronAddr(r, c, k)


@dataclass(frozen=True)
class AddressEvent:
    tick: int
    address: int
    polarity: str = EXC


@dataclass(frozen=True)
class LutEntry:
    src: int
    dst: int
    kind: str = CONDUCTANCE
    weight: float = 1.0
    polarity: str = EXC
    delay: int = 0

    def __post_init__(self):
        if self.kind == PROBABILISTIC:
            if not 0.0 <= self.weight <= 1.0:
                raise ValidationError("probabilistic entries need p in [0, 1]")
        elif self.kind == CONDUCTANCE:
            if not self.weight > 0:
                raise ValidationError("conductance entries need weight > 0")
        else:
            raise ValidationError(f"unknown LUT entry kind {self.kind!r}")
        if self.polarity not in (EXC, INH):
            raise ValidationError(f"unknown polarity {self.polarity!r}")
        if self.delay < 0:
            raise ValidationError("delay must be >= 0")


class Lut:
    """Source-indexed connectivity table. Lookup preserves insertion order."""

    def __init__(self, entries: Iterable[LutEntry] = ()):
        self.entries: list[LutEntry] = []
        self._index: dict[int, list[LutEntry]] = {}
        for e in entries:
            self.add(e)

    def add(self, entry: LutEntry) -> None:
        self.entries.append(entry)
        self._index.setdefault(entry.src, []).append(entry)

    def lookup(self, src: int) -> list[LutEntry]:
        return self._index.get(src, [])

    def sources(self):
        return self._index.keys()

    def __len__(self):
        return len(self.entries)

    def check_bounds(self, n_neurons: int) -> None:
        for i, e in enumerate(self.entries):
            if not 0 <= e.dst < n_neurons:
                raise ValidationError(f"LUT entry {i}: dst {e.dst} outside array of {n_neurons}")


def lut_lookup(src: int, lut: Lut) -> list[LutEntry]:
    """All entries whose source is ``src``, in insertion order (may be empty)."""
    return lut.lookup(src)


@dataclass(frozen=True)
class MismatchModel:
    """Per-neuron multiplicative spread of ``alpha_m``.

    Factors are ``1 + sigma_alpha * z`` with ``z`` standard normal truncated
    at +/-3. They are spatial: drawn once per run from the model's seed.
    """

    sigma_alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_alpha < 0:
            raise ValidationError("sigma_alpha must be >= 0")

    def factors(self, n: int) -> np.ndarray:
        if self.sigma_alpha == 0:
            return np.ones(n)
        gen = _rng.stream(self.seed, _rng.MISMATCH)
        z = gen.standard_normal(n)
        bad = np.abs(z) > 3.0
        while bad.any():
            z[bad] = gen.standard_normal(int(bad.sum()))
            bad = np.abs(z) > 3.0
        return 1.0 + self.sigma_alpha * z


def deliver_event(entry: LutEntry, neuron: NeuronState, params: MnDiscreteParams,
                  mismatch_factor: float = 1.0, rng: np.random.Generator | None = None
                  ) -> tuple[NeuronState, bool]:
    """Apply one post-synaptic event described by ``entry`` to its neuron.

    Probabilistic entries deliver a unit-weight event with probability
    ``entry.weight`` (drawing from ``rng``); conductance entries scale the
    synaptic ratio by ``weight * mismatch_factor``. The comparator is only
    consulted when an update was applied.
    """
    if entry.kind == PROBABILISTIC:
        if rng is None:
            raise ValidationError("probabilistic delivery needs an rng")
        if not rng.random() < entry.weight:
            return neuron, False
        scale = mismatch_factor
    else:
        scale = entry.weight * mismatch_factor
    neuron = mn_event_update(neuron, params, entry.polarity, scale)
    return threshold_check_and_reset(neuron, params)


@dataclass
class IfatResult:
    raster_ticks: np.ndarray
    raster_addresses: np.ndarray
    input_counts: np.ndarray
    output_counts: np.ndarray
    stats: dict = field(default_factory=dict)
    final_states: list | None = None

    @property
    def ratios(self) -> np.ndarray:
        """Output events per input event; neurons with no input report 0."""
        out = np.zeros(len(self.input_counts))
        nz = self.input_counts > 0
        out[nz] = self.output_counts[nz] / self.input_counts[nz]
        return out


def _as_stream(events) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalize an event stream to (ticks, addresses, inhibitory flags) arrays."""
    if isinstance(events, tuple) and len(events) in (2, 3):
        ticks = np.asarray(events[0], dtype=np.int64)
        addrs = np.asarray(events[1], dtype=np.int64)
        inh = (np.asarray(events[2], dtype=bool) if len(events) == 3
               else np.zeros(len(ticks), dtype=bool))
    else:
        evs = list(events)
        ticks = np.fromiter((e.tick for e in evs), dtype=np.int64, count=len(evs))
        addrs = np.fromiter((e.address for e in evs), dtype=np.int64, count=len(evs))
        inh = np.fromiter((e.polarity == INH for e in evs), dtype=bool, count=len(evs))
    if not (len(ticks) == len(addrs) == len(inh)):
        raise ValidationError("event stream columns differ in length")
    if len(ticks) and (np.any(np.diff(ticks) < 0) or ticks[0] < 0):
        raise ValidationError("event stream must be sorted by non-negative tick")
    return ticks, addrs, inh


def run_ifat(events, array: IfatArray, params: MnDiscreteParams, lut: Lut | None = None,
             mismatch: MismatchModel | None = None, *, service_rate: int | None = 1,
             leak_divisor_m: int = 0, leak_divisor_t: int = 0, seed: int = 0,
             max_ticks: int | None = None, keep_states: bool = False) -> IfatResult:
    """Run the shared-soma array over an event stream.

    ``events`` is a sequence of :class:`AddressEvent` or a ``(ticks,
    addresses[, inhibitory])`` tuple of arrays, sorted by tick. Without a LUT
    each event addresses a neuron directly with unit conductance weight. With
    a LUT, event addresses are source addresses; every matching entry becomes
    a post-synaptic event that enters the chip FIFO ``entry.delay`` ticks
    later. Spikes of array neurons re-enter the LUT on the following tick.

    At most ``service_rate`` post-synaptic events are applied per tick
    (``None`` for unlimited); the remainder are queued, never dropped.
    Leak clocks fire every ``leak_divisor_*`` ticks (0 disables leak) and are
    applied lazily in closed form when a neuron is next touched.
    """
    ticks, addrs, inh_flags = _as_stream(events)
    n = array.n_neurons
    if lut is not None:
        lut.check_bounds(n)
    elif len(addrs) and (addrs.min() < 0 or addrs.max() >= n):
        raise ValidationError("direct events must address neurons inside the array")
    if service_rate is not None and service_rate < 1:
        raise ValidationError("service_rate must be >= 1 or None")

    p = params
    mn_mode = p.mode == MODE_MN
    fac = (mismatch or MismatchModel()).factors(n).tolist()
    V = [p.V_r] * n
    th0 = p.theta_r if mn_mode else p.V_th_fixed
    TH = [th0] * n
    last_m = [0] * n
    last_t = [0] * n
    in_cnt = [0] * n
    out_cnt = [0] * n
    alpha_m, alpha_t = p.alpha_m, p.alpha_t
    E_m, E_inh, V_r, theta_r, V_fix = p.E_m, p.E_inh, p.V_r, p.theta_r, p.V_th_fixed
    keep_m = 1.0 - p.lambda_m
    keep_t = 1.0 - p.lambda_t
    dm = leak_divisor_m if p.lambda_m > 0 else 0
    dt_ = leak_divisor_t if (p.lambda_t > 0 and mn_mode) else 0
    bufs: dict[int, _rng.UniformBuffer] = {}

    # postsynaptic delivery: (dst, kind_is_prob, weight, inhibitory)
    fifo: deque = deque()
    delayed: list = []
    seq = 0
    raster_t: list[int] = []
    raster_a: list[int] = []
    recurrent: list[int] = []
    n_in_events = len(ticks)
    n_post = 0
    n_applied = 0
    n_dropped_prob = 0
    max_backlog = 0
    cap = service_rate if service_rate is not None else math.inf
    tick_list = ticks.tolist()
    addr_list = addrs.tolist()
    inh_list = inh_flags.tolist()
    i = 0
    now = tick_list[0] if n_in_events else 0
    last_tick = now

    def route(src: int, inhibit: bool, t: int):
        nonlocal seq, n_post
        if lut is None:
            fifo.append((src, False, 1.0, inhibit))
            n_post += 1
            return
        for e in lut.lookup(src):
            item = (e.dst, e.kind == PROBABILISTIC, e.weight, e.polarity == INH)
            n_post += 1
            if e.delay:
                heapq.heappush(delayed, (t + e.delay, seq, item))
                seq += 1
            else:
                fifo.append(item)

    while True:
        if max_ticks is not None and now >= max_ticks:
            break
        # presynaptic arrivals: recurrent spikes from the previous tick, then the stream
        if recurrent:
            for src in recurrent:
                route(src, False, now)
            recurrent = []
        if lut is None:
            j = i
            while j < n_in_events and tick_list[j] == now:
                fifo.append((addr_list[j], False, 1.0, inh_list[j]))
                j += 1
            n_post += j - i
            i = j
        else:
            while i < n_in_events and tick_list[i] == now:
                route(addr_list[i], inh_list[i], now)
                i += 1
        while delayed and delayed[0][0] <= now:
            fifo.append(heapq.heappop(delayed)[2])
        if len(fifo) > max_backlog:
            max_backlog = len(fifo)

        served = 0
        while fifo and served < cap:
            dst, is_prob, w, inhibit = fifo.popleft()
            served += 1
            in_cnt[dst] += 1
            if is_prob:
                b = bufs.get(dst)
                if b is None:
                    b = bufs[dst] = _rng.UniformBuffer(_rng.stream(seed, _rng.SYNAPSE, dst))
                if not b.next() < w:
                    n_dropped_prob += 1
                    continue
                step = alpha_m * fac[dst]
            else:
                step = alpha_m * w * fac[dst]
            if step > 1.0:
                step = 1.0
            n_applied += 1
            v = V[dst]
            if dm:
                k = now // dm - last_m[dst] // dm
                if k:
                    v = V_r + (v - V_r) * keep_m ** k
                last_m[dst] = now
            v_new = v + step * ((E_inh if inhibit else E_m) - v)
            if mn_mode:
                th = TH[dst]
                if dt_:
                    k = now // dt_ - last_t[dst] // dt_
                    if k:
                        th = theta_r + (th - theta_r) * keep_t ** k
                    last_t[dst] = now
                th = th + alpha_t * (v - V_r)
                if v_new >= th:
                    v_new = V_r
                    if not th > V_r:
                        th = theta_r
                    out_cnt[dst] += 1
                    raster_t.append(now)
                    raster_a.append(dst)
                    if lut is not None:
                        recurrent.append(dst)
                TH[dst] = th
            elif v_new >= V_fix:
                v_new = V_r
                out_cnt[dst] += 1
                raster_t.append(now)
                raster_a.append(dst)
                if lut is not None:
                    recurrent.append(dst)
            V[dst] = v_new
        last_tick = now

        if fifo or recurrent:
            now += 1
            continue
        if i < n_in_events:
            nxt = tick_list[i]
            if delayed and delayed[0][0] < nxt:
                nxt = delayed[0][0]
        elif delayed:
            nxt = delayed[0][0]
        else:
            break
        now = nxt if nxt > now else now + 1

    stats = {
        "input_events": n_in_events,
        "postsynaptic_events": n_post,
        "synaptic_updates": n_applied,
        "probabilistic_misses": n_dropped_prob,
        "output_spikes": len(raster_t),
        "max_backlog": max_backlog,
        "pending_events": len(fifo) + len(delayed) + (n_in_events - i),
        "last_tick": last_tick,
    }
    states = None
    if keep_states:
        # bring lazily leaked neurons up to the last processed tick
        states = []
        for j in range(n):
            v, th = V[j], TH[j]
            if dm:
                v = V_r + (v - V_r) * keep_m ** (last_tick // dm - last_m[j] // dm)
            if dt_:
                th = theta_r + (th - theta_r) * keep_t ** (last_tick // dt_ - last_t[j] // dt_)
            states.append(NeuronState(V_m=v, theta=th))
    return IfatResult(
        raster_ticks=np.asarray(raster_t, dtype=np.int64),
        raster_addresses=np.asarray(raster_a, dtype=np.int64),
        input_counts=np.asarray(in_cnt, dtype=np.int64),
        output_counts=np.asarray(out_cnt, dtype=np.int64),
        stats=stats,
        final_states=states,
    )


def uniform_drive(n_neurons: int, events_per_neuron: int, start_tick: int = 0
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Round-robin stream hitting every neuron ``events_per_neuron`` times, one event per tick."""
    total = n_neurons * events_per_neuron
    ticks = np.arange(start_tick, start_tick + total, dtype=np.int64)
    addrs = np.tile(np.arange(n_neurons, dtype=np.int64), events_per_neuron)
    return ticks, addrs


def closed_form_ratios(factors: Sequence[float], alpha: float, V_th: float, E_m: float,
                       events_per_neuron: int, V_r: float = 0.0) -> np.ndarray:
    """Per-neuron output/input ratio for leak-free LIF cells under repeated unit events."""
    from .neuron_core import events_per_spike

    out = np.empty(len(factors))
    cache: dict[float, int] = {}
    for j, f in enumerate(factors):
        a = min(alpha * f, 1.0)
        n = cache.get(a)
        if n is None:
            n = cache[a] = events_per_spike(a, V_th, E_m, V_r)
        out[j] = (events_per_neuron // n) / events_per_neuron
    return out
