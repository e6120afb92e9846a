"""Resistive crosspoint array (PARCA) compute model.

Read mode applies a small voltage on every row whose input bit is set and
senses column currents, giving a parallel weighted sum. Write mode lets each
row emit a number of evenly spread pulses proportional to its value while
each column opens a write window proportional to its value; a cell is
programmed once per pulse that falls inside its column window, so the
conductance change tracks the outer product ``x_i * y_j``.

Non-ideal effects modeled: limited precision (uniform conductance levels),
nonlinear/asymmetric update curves, finite on/off ratio, spatial and
temporal device variation, and IR drop along row/column wires. Mitigations:
dummy-column differential read-out, program-and-verify, multi-cell
redundancy and wider (lower resistance) wires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ValidationError

POT = "pot"
DEP = "dep"
_LINEAR_NU = 1e-6


@dataclass(frozen=True)
class DeviceModel:
    """Behavioral synaptic device.

    ``levels=None`` models an analog device with no state quantization.
    ``nu_pot``/``nu_dep`` shape the saturating update curve for each
    direction; 0 gives a linear update. ``pulses_full_swing`` is the number
    of full-strength pulses that drive the device from one bound to the other.
    """

    levels: int | None = 64
    G_on: float = 1.0
    G_off: float = 0.01
    nu_pot: float = 0.0
    nu_dep: float = 0.0
    sigma_spatial: float = 0.0
    sigma_temporal: float = 0.0
    pulses_full_swing: int = 100
    pulses_per_period: int = 16

    def __post_init__(self):
        if self.levels is not None and self.levels < 2:
            raise ValidationError("levels must be >= 2")
        if not self.G_on > self.G_off > 0:
            raise ValidationError("need G_on > G_off > 0")
        if self.pulses_per_period < 1 or self.pulses_full_swing < 1:
            raise ValidationError("pulse counts must be >= 1")
        if self.nu_pot < 0 or self.nu_dep < 0:
            raise ValidationError("nonlinearity must be >= 0")
        if self.sigma_spatial < 0 or self.sigma_temporal < 0:
            raise ValidationError("variation must be >= 0")

    @property
    def on_off_ratio(self) -> float:
        return self.G_on / self.G_off

    def level_spacing(self) -> float:
        levels = self.levels if self.levels is not None else 64
        return (self.G_on - self.G_off) / (levels - 1)


@dataclass(frozen=True)
class MitigationConfig:
    dummy_column: bool = False
    smart_programming: bool = False
    cells_per_weight: int = 1
    wire_width_relax: float = 1.0

    def __post_init__(self):
        if self.cells_per_weight < 1:
            raise ValidationError("cells_per_weight must be >= 1")
        if not self.wire_width_relax > 0:
            raise ValidationError("wire_width_relax must be > 0")


@dataclass
class CrossbarArray:
    G: np.ndarray
    device: DeviceModel = field(default_factory=DeviceModel)
    wire_r: float = 0.0

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        d = self.device
        if self.G.ndim != 2:
            raise ValidationError("G must be a 2-D matrix")
        if np.any(self.G < d.G_off) or np.any(self.G > d.G_on):
            raise ValidationError("conductances must lie within [G_off, G_on]")
        if self.wire_r < 0:
            raise ValidationError("wire_r must be >= 0")

    @classmethod
    def from_weights(cls, W, device: DeviceModel | None = None, wire_r: float = 0.0) -> "CrossbarArray":
        """Map weights in [0, 1] linearly onto [G_off, G_on]."""
        device = device or DeviceModel()
        W = np.clip(np.asarray(W, dtype=float), 0.0, 1.0)
        return cls(device.G_off + W * (device.G_on - device.G_off), device, wire_r)


def quantize(g, device: DeviceModel, g_on=None, g_off=None):
    """Snap to uniform levels between the bounds; round to nearest, ties toward ``G_off``."""
    g = np.asarray(g, dtype=float)
    if device.levels is None:
        return g
    lo = device.G_off if g_off is None else g_off
    hi = device.G_on if g_on is None else g_on
    step = (hi - lo) / (device.levels - 1)
    idx = np.ceil((g - lo) / step - 0.5)
    idx = np.clip(idx, 0, device.levels - 1)
    return lo + idx * step


# ---------------------------------------------------------------------------
# read mode


def _check_read(G, x):
    G = np.asarray(G, dtype=float)
    x = np.asarray(x)
    if G.ndim != 2 or x.ndim != 1 or x.shape[0] != G.shape[0]:
        raise ValidationError(f"input of length {x.shape} does not match array of shape {G.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ValidationError("read inputs must be binary")
    return G, x.astype(float)


def crossbar_read_ideal(G, x, V_read: float = 0.1) -> np.ndarray:
    """Column currents ``V_read * sum_i x_i G_ij``."""
    G, x = _check_read(G, x)
    return V_read * (x @ G)


def ir_drop_solve(G, x, V_read: float = 0.1, wire_r: float = 0.0) -> np.ndarray:
    """Column currents of the full resistive network by nodal analysis.

    Each row is driven at ``V_read * x_i`` from its left edge and each column
    is sensed into a virtual ground at its bottom edge. Every span between
    adjacent cross-points, and the span from the last cross-point to the
    driver or sense amplifier, is a wire segment of resistance ``wire_r``.
    """
    G, x = _check_read(G, x)
    if wire_r < 0:
        raise ValidationError("wire_r must be >= 0")
    if wire_r == 0:
        if not np.any(G):
            raise ValidationError("all-zero array with ideal wires leaves the network singular")
        return V_read * (x @ G)
    R, C = G.shape
    n = R * C
    gw = 1.0 / wire_r
    rows, cols, vals = [], [], []
    b = np.zeros(2 * n)

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for i in range(R):
        for j in range(C):
            r = i * C + j
            c = n + r
            g = G[i, j]
            # row node
            diag = g + gw
            if j == 0:
                b[r] += gw * V_read * x[i]
            else:
                add(r, r - 1, -gw)
            if j < C - 1:
                diag += gw
                add(r, r + 1, -gw)
            add(r, r, diag)
            add(r, c, -g)
            # column node; the bottom cell's lower segment goes to the sense ground
            diag = g + gw
            if i > 0:
                diag += gw
                add(c, c - C, -gw)
            if i < R - 1:
                add(c, c + C, -gw)
            add(c, c, diag)
            add(c, r, -g)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))
    v = spla.spsolve(A, b)
    return v[n + (R - 1) * C: n + R * C] * gw


@dataclass
class ReadResult:
    currents: np.ndarray
    digital: np.ndarray


def crossbar_read_nonideal(G, x, device: DeviceModel, mitig: MitigationConfig | None = None,
                           V_read: float = 0.1, wire_r: float = 0.0, adc_bits: int = 6,
                           full_scale: float | None = None, threshold: float | None = None) -> ReadResult:
    """Weighted sum through the non-ideal read path.

    IR drop is solved when the (width-relaxed) wire resistance is non-zero;
    the off-state current is whatever ``G`` carries at ``G_off``; the dummy
    column, when enabled, is a column of ``G_off`` cells read alongside the
    array and subtracted from every column. The analog result is then either
    thresholded (``threshold``) or converted by an ``adc_bits`` uniform ADC
    spanning ``[0, full_scale]``.
    """
    mitig = mitig or MitigationConfig()
    G, xv = _check_read(G, x)
    r_eff = wire_r / mitig.wire_width_relax
    if mitig.dummy_column:
        G = np.hstack([G, np.full((G.shape[0], 1), device.G_off)])
    I = ir_drop_solve(G, xv, V_read, r_eff) if r_eff > 0 else crossbar_read_ideal(G, xv, V_read)
    if mitig.dummy_column:
        I = I[:-1] - I[-1]
    if threshold is not None:
        digital = (I >= threshold).astype(np.int64)
    else:
        fs = full_scale if full_scale is not None else V_read * G.shape[0] * device.G_on
        top = (1 << adc_bits) - 1
        digital = np.clip(np.floor(I / fs * top + 0.5), 0, top).astype(np.int64)
    return ReadResult(I, digital)


# ---------------------------------------------------------------------------
# device update


def _curve(k, nu, K):
    if nu < _LINEAR_NU:
        return k / K
    return (1.0 - np.exp(-nu * k / K)) / (1.0 - math.exp(-nu))


def _curve_inverse(f, nu, K):
    if nu < _LINEAR_NU:
        return f * K
    return -K / nu * np.log1p(-f * (1.0 - math.exp(-nu)))


def _advance(g, n, direction, device, g_on, g_off):
    span = g_on - g_off
    K = device.pulses_full_swing
    if direction == POT:
        f = np.clip((g - g_off) / span, 0.0, 1.0)
        k = np.minimum(_curve_inverse(f, device.nu_pot, K) + n, K)
        return g_off + span * _curve(k, device.nu_pot, K)
    f = np.clip((g_on - g) / span, 0.0, 1.0)
    k = np.minimum(_curve_inverse(f, device.nu_dep, K) + n, K)
    return g_on - span * _curve(k, device.nu_dep, K)


def apply_device_update(g, n_pulses, direction: str, device: DeviceModel,
                        rng: np.random.Generator | None = None, g_on=None, g_off=None,
                        quantize_result: bool = True):
    """Move conductance ``n_pulses`` steps along the device's update curve.

    Potentiation follows ``G_off + (G_on - G_off) * (1 - exp(-nu k/K)) /
    (1 - exp(-nu))`` from the device's current position ``k``; depression
    mirrors it down from ``G_on`` with its own ``nu``. Fractional pulse counts
    (shortened pulses) advance the position fractionally. With temporal
    variation each pulse's step is scaled by ``1 + sigma_temporal * z``.
    Per-device bounds ``g_on``/``g_off`` (spatial variation) default to the
    nominal ones. Works elementwise on arrays.
    """
    if direction not in (POT, DEP):
        raise ValidationError(f"direction must be {POT!r} or {DEP!r}")
    lo = device.G_off if g_off is None else np.asarray(g_off, dtype=float)
    hi = device.G_on if g_on is None else np.asarray(g_on, dtype=float)
    g = np.asarray(g, dtype=float)
    n = np.asarray(n_pulses, dtype=float)
    if np.any(n < 0):
        raise ValidationError("pulse count must be >= 0")
    if device.sigma_temporal == 0:
        out = np.where(n > 0, _advance(g, n, direction, device, hi, lo), g)
    else:
        if rng is None:
            raise ValidationError("temporal variation needs an rng")
        out = g.copy()
        remaining = n.copy()
        while np.any(remaining > 0):
            step_n = np.minimum(remaining, 1.0)
            nxt = _advance(out, step_n, direction, device, hi, lo)
            z = rng.standard_normal(np.shape(out))
            moved = out + (nxt - out) * (1.0 + device.sigma_temporal * z)
            out = np.where(remaining > 0, np.clip(moved, lo, hi), out)
            remaining = remaining - step_n
    out = np.clip(out, lo, hi)
    if quantize_result:
        out = quantize(out, device, g_on=g_on, g_off=g_off)
    return out if out.ndim else float(out)


def device_bounds(shape, device: DeviceModel, rng: np.random.Generator):
    """Per-device ``(g_on, g_off)`` drawn once from the spatial variation."""
    s = device.sigma_spatial
    g_on = device.G_on * (1.0 + s * rng.standard_normal(shape))
    g_off = device.G_off * (1.0 + s * rng.standard_normal(shape))
    g_off = np.clip(g_off, 1e-12, None)
    g_on = np.maximum(g_on, g_off * (1 + 1e-9))
    return g_on, g_off


# ---------------------------------------------------------------------------
# write mode


def pulse_slots(value: float, P: int) -> np.ndarray:
    """Slots (0..P-1) occupied by ``round(value * P)`` evenly spread row pulses."""
    n = int(math.floor(value * P + 0.5))
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    return np.floor((np.arange(n) + 0.5) * P / n).astype(np.int64)


def window_slots(value: float, P: int) -> int:
    """Length in slots of a column window with duty cycle ``value``."""
    return int(math.floor(value * P + 0.5))


def overlap_counts(x, y, P: int) -> np.ndarray:
    """Row pulses landing inside each column window, shape ``(len(x), len(y))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any((y < 0) | (y > 1)):
        raise ValidationError("write values must be normalized to [0, 1]")
    m = np.array([window_slots(v, P) for v in y], dtype=np.int64)
    out = np.zeros((len(x), len(y)), dtype=np.int64)
    for i, v in enumerate(x):
        out[i] = np.searchsorted(pulse_slots(v, P), m, side="left")
    return out


def pulse_overlap_write(G, x, y, device: DeviceModel, direction: str = POT,
                        rng: np.random.Generator | None = None, g_on=None, g_off=None):
    """Parallel outer-product update; returns ``(G_new, overlap_counts)``."""
    G = np.asarray(G, dtype=float)
    n = overlap_counts(x, y, device.pulses_per_period)
    if n.shape != G.shape:
        raise ValidationError(f"write vectors {n.shape} do not match array {G.shape}")
    G_new = apply_device_update(G, n, direction, device, rng, g_on=g_on, g_off=g_off)
    return np.asarray(G_new), n


# ---------------------------------------------------------------------------
# mitigations


@dataclass
class ProgramResult:
    g: float
    pulses: list = field(default_factory=list)
    converged: bool = True

    @property
    def n_pulses(self) -> int:
        return len(self.pulses)


def smart_program(g: float, g_target: float, device: DeviceModel,
                  rng: np.random.Generator | None = None, budget: int = 400) -> ProgramResult:
    """Program-and-verify loop.

    Applies one pulse at a time toward the target, reading back after each.
    Every change of direction halves the pulse strength (a shorter pulse), so
    overshoot on a steep part of the curve shrinks instead of oscillating.
    Stops within half a level spacing of the target or when the pulse budget
    runs out (``converged=False``, best state kept).
    """
    if not device.G_off <= g_target <= device.G_on:
        raise ValidationError("target conductance outside [G_off, G_on]")
    tol = device.level_spacing() / 2
    pulses: list[tuple[str, float]] = []
    strength = 1.0
    last = None
    best = g
    while abs(g - g_target) > tol:
        if len(pulses) >= budget:
            return ProgramResult(best, pulses, False)
        d = POT if g < g_target else DEP
        if last is not None and d != last:
            strength /= 2
        g = float(apply_device_update(g, strength, d, device, rng, quantize_result=False))
        pulses.append((d, strength))
        last = d
        if abs(g - g_target) < abs(best - g_target):
            best = g
    return ProgramResult(g, pulses, True)


@dataclass
class RedundancyStats:
    mean: np.ndarray
    rel_std: np.ndarray

    @property
    def pooled_rel_std(self) -> float:
        return float(np.sqrt(np.mean(self.rel_std ** 2)))


def redundancy_average(weights, M: int, device: DeviceModel, rng: np.random.Generator,
                       trials: int = 10_000) -> RedundancyStats:
    """Effective conductance when each weight is the mean of ``M`` varied cells."""
    if M < 1:
        raise ValidationError("M must be >= 1")
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(w <= 0):
        raise ValidationError("weights must be positive conductances")
    z = rng.standard_normal((trials, w.size, M))
    cells = w[None, :, None] * (1.0 + device.sigma_spatial * z)
    eff = cells.mean(axis=2)
    return RedundancyStats(eff.mean(axis=0), (eff / w).std(axis=0))


# ---------------------------------------------------------------------------
# precision sweep


def weighted_sum_error(levels: int | None, rows: int, cols: int, trials: int,
                       rng: np.random.Generator, device: DeviceModel | None = None) -> np.ndarray:
    """Relative error of the read-out when weights are quantized to ``levels`` states."""
    base = device or DeviceModel()
    dev = DeviceModel(levels=levels, G_on=base.G_on, G_off=base.G_off)
    errs = np.empty(trials)
    for t in range(trials):
        W = rng.random((rows, cols))
        x = (rng.random(rows) < 0.5).astype(float)
        if not x.any():
            x[0] = 1.0
        span = dev.G_on - dev.G_off
        G = dev.G_off + W * span
        ideal = crossbar_read_ideal(G, x) - 0.1 * dev.G_off * x.sum()
        quant = crossbar_read_ideal(quantize(G, dev), x) - 0.1 * dev.G_off * x.sum()
        errs[t] = np.linalg.norm(quant - ideal) / np.linalg.norm(ideal)
    return errs


def precision_sweep(levels=(4, 16, 64, 256), rows: int = 64, cols: int = 32, trials: int = 50,
                    seed: int = 0) -> list[dict]:
    """Error statistics per level count; the same random draws are reused for every level."""
    records = []
    for L in levels:
        rng = np.random.default_rng(seed)
        e = weighted_sum_error(L, rows, cols, trials, rng)
        records.append({"levels": int(L), "bits": math.log2(L), "mean_rel_error": float(e.mean()),
                        "std_rel_error": float(e.std()), "max_rel_error": float(e.max())})
    return records
