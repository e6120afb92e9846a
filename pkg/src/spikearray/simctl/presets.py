"""Winner-take-all array preset and its vectorized simulator.

Excitatory neurons sit on a ``rows × cols`` grid, addressed ``r * cols + c``.
Local recurrent excitation is selected by flags:

* ``LAT``   horizontal first neighbors (c ± 1)
* ``VERT1`` vertical first neighbors (r ± 1)
* ``VERT2`` vertical second neighbors (r ± 2)
* ``SELF``  self-excitation

LAT with VERT1 gives a 2-D cooperative sheet; VERT1 with VERT2 gives one
1-D network per column. Global inhibition uses one interneuron (address
``rows * cols``): every excitatory neuron excites it, and it inhibits every
excitatory neuron. Edges stop at the array boundary unless ``wrap`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError
from ..neuron_core import WtaNeuronParams

FLAGS = ("LAT", "VERT1", "VERT2", "SELF")
_OFFSETS = {"LAT": ((0, -1), (0, 1)), "VERT1": ((-1, 0), (1, 0)), "VERT2": ((-2, 0), (2, 0)),
            "SELF": ((0, 0),)}
DEFAULT_WEIGHTS = {"LAT": 0.3, "VERT1": 0.3, "VERT2": 0.2, "SELF": 0.3,
                   "EXC_TO_INH": 0.5, "INH_TO_EXC": -1.0}


@dataclass
class WtaNetwork:
    rows: int
    cols: int
    flags: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    inhibitory: int | None
    weights: dict = field(default_factory=dict)

    @property
    def n_exc(self) -> int:
        return self.rows * self.cols

    @property
    def n_neurons(self) -> int:
        return self.n_exc + (1 if self.inhibitory is not None else 0)

    def matrix(self) -> sp.csr_matrix:
        """``W[i, j]`` is the charge neuron ``j`` receives when ``i`` spikes."""
        n = self.n_neurons
        return sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(n, n))

    def local_targets(self, addr: int) -> list[int]:
        """Excitatory grid targets of ``addr`` (interneuron edges excluded)."""
        m = (self.src == addr) & (self.dst < self.n_exc)
        return sorted(self.dst[m].tolist())

    def address(self, r: int, c: int) -> int:
        return r * self.cols + c


def build_wta_preset(rows: int = 32, cols: int = 64, flags=("LAT", "VERT1"), weights: dict | None = None,
                     inhibition: bool = True, wrap: bool = False) -> WtaNetwork:
    if rows < 1 or cols < 1:
        raise ValidationError("rows and cols must be >= 1")
    flags = tuple(sorted(set(flags), key=FLAGS.index)) if set(flags) <= set(FLAGS) else None
    if flags is None:
        raise ValidationError(f"flags must be drawn from {FLAGS}")
    w = dict(DEFAULT_WEIGHTS)
    if weights:
        unknown = set(weights) - set(w)
        if unknown:
            raise ValidationError(f"unknown weight keys {sorted(unknown)}")
        w.update(weights)
    rr, cc = np.divmod(np.arange(rows * cols), cols)
    src, dst, wt = [], [], []
    for f in flags:
        for dr, dc in _OFFSETS[f]:
            r2, c2 = rr + dr, cc + dc
            if wrap:
                r2, c2 = r2 % rows, c2 % cols
                ok = np.ones(rr.shape, dtype=bool)
                if f != "SELF":
                    # a wrapped offset that lands back on the source is not a neighbor
                    ok = (r2 != rr) | (c2 != cc)
            else:
                ok = (r2 >= 0) & (r2 < rows) & (c2 >= 0) & (c2 < cols)
            s = (rr * cols + cc)[ok]
            src.append(s)
            dst.append((r2 * cols + c2)[ok])
            wt.append(np.full(s.size, float(w[f])))
    inh = None
    n = rows * cols
    if inhibition:
        inh = n
        allx = np.arange(n)
        src += [allx, np.full(n, inh)]
        dst += [np.full(n, inh), allx]
        wt += [np.full(n, float(w["EXC_TO_INH"])), np.full(n, float(w["INH_TO_EXC"]))]
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
    return WtaNetwork(rows, cols, flags, cat(src, np.int64), cat(dst, np.int64), cat(wt, float), inh, w)


@dataclass
class WtaResult:
    raster: np.ndarray          # (n, 2) tick, address
    spike_counts: np.ndarray
    stats: dict


def run_wta(net: WtaNetwork, params: WtaNeuronParams, events, n_ticks: int,
            inh_params: WtaNeuronParams | None = None, input_weight: float = 1.0) -> WtaResult:
    """Synchronous simulation; each neuron follows the behavioral WTA neuron rule.

    ``events`` is ``(ticks, addresses)``; each event adds ``input_weight`` of
    charge to its neuron on that tick. A spike on tick ``t`` delivers its
    recurrent charge on tick ``t + 1``. Inhibitory charge is negative, and the
    membrane is floored at 0.
    """
    n = net.n_neurons
    ticks = np.asarray(events[0], dtype=np.int64)
    addrs = np.asarray(events[1], dtype=np.int64)
    if len(addrs) and (addrs.min() < 0 or addrs.max() >= n):
        raise ValidationError("stimulus address outside the network")
    if len(ticks) and np.any(np.diff(ticks) < 0):
        raise ValidationError("stimulus must be sorted by tick")
    ip = inh_params or params
    per = [params] * net.n_exc + ([ip] if net.inhibitory is not None else [])
    leak = np.array([p.leak_rate for p in per])
    thr = np.array([p.threshold for p in per])
    refr = np.array([p.refractory_period for p in per], dtype=np.int64)
    inc = np.array([p.adapt_increment for p in per])
    keep = np.array([1.0 - p.adapt_decay for p in per])
    WT = net.matrix().T.tocsr()
    out_degree = np.diff(net.matrix().indptr)

    V = np.zeros(n)
    adapt = np.zeros(n)
    refrac_until = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    prev = np.zeros(n)
    raster_t, raster_a = [], []
    bounds = np.searchsorted(ticks, np.arange(n_ticks + 1), side="left")
    syn = 0
    n_in = int(bounds[-1])
    for t in range(n_ticks):
        charge = WT @ prev if prev.any() else np.zeros(n)
        a, b = bounds[t], bounds[t + 1]
        if b > a:
            charge += input_weight * np.bincount(addrs[a:b], minlength=n)
        active = t >= refrac_until
        V = np.where(active, np.maximum(0.0, V + charge - leak - adapt), V)
        spk = active & (V >= thr)
        if spk.any():
            idx = np.flatnonzero(spk)
            V[idx] = 0.0
            refrac_until[idx] = t + refr[idx]
            adapt[idx] += inc[idx]
            counts[idx] += 1
            raster_t.append(np.full(idx.size, t))
            raster_a.append(idx)
            syn += int(out_degree[idx].sum())
        adapt *= keep
        prev = spk.astype(float)
    raster = (np.column_stack([np.concatenate(raster_t), np.concatenate(raster_a)])
              if raster_t else np.zeros((0, 2), dtype=np.int64))
    stats = {"input_events": n_in, "synaptic_events": n_in + syn, "spikes": int(counts.sum()),
             "ticks": n_ticks}
    return WtaResult(raster.astype(np.int64), counts, stats)
