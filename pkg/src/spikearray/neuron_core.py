"""Neuron update rules.

Three models live here:

* the continuous Mihalas-Niebur (M-N) generalized integrate-and-fire neuron,
  integrated with explicit Euler;
* the event-driven switch-capacitor variant used by the IFAT array, where the
  membrane and threshold move by a fixed fraction of their driving potential
  per synaptic event and leak once per leak-clock tick;
* a behavioral adaptive/refractory I&F neuron used by the WTA preset.

All functions are pure: they take a :class:`NeuronState` and return a new one.
Voltages are normalized (reset at 0, thresholds of order 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import NumericalOverflowError, ValidationError

EXC = "exc"
INH = "inh"
MODE_MN = "MN"
MODE_LIF = "LIF"


@dataclass(frozen=True)
class MnReferenceParams:
    C: float = 1.0
    G: float = 50.0
    E_L: float = 0.0
    a: float = 0.0
    b: float = 10.0
    theta_inf: float = 1.0
    V_r: float = 0.0
    theta_r: float = 1.0
    k: tuple[float, ...] = ()
    R: tuple[float, ...] = ()
    A: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError("C must be > 0")
        if self.G < 0 or self.b < 0:
            raise ValidationError("G and b must be >= 0")
        if not (len(self.k) == len(self.R) == len(self.A)):
            raise ValidationError("k, R, A must have one entry per internal current")
        if any(kj <= 0 for kj in self.k):
            raise ValidationError("every k_j must be > 0")
        if self.theta_inf < self.V_r:
            raise ValidationError("theta_inf must be >= V_r")


@dataclass(frozen=True)
class MnDiscreteParams:
    """Parameters of the switch-capacitor M-N cell.

    ``alpha_m``/``alpha_t`` are the synapse/threshold capacitor ratios
    (C_s/C), ``lambda_m``/``lambda_t`` the leak capacitor ratios (C_l/C)
    applied once per leak clock. ``E_inh`` is the driving potential for
    inhibitory events and must sit below ``V_r``.
    """

    alpha_m: float = 0.1
    alpha_t: float = 0.0
    lambda_m: float = 0.0
    lambda_t: float = 0.0
    f_l_m: float = 1.0e5
    f_l_t: float = 1.0e5
    E_m: float = 5.0
    V_r: float = 0.0
    theta_r: float = 1.0
    mode: str = MODE_LIF
    V_th_fixed: float = 1.0
    E_inh: float = -1.0

    def __post_init__(self):
        errs = []
        if not 0 < self.alpha_m < 1:
            errs.append("alpha_m must be in (0, 1)")
        if not 0 <= self.alpha_t < 1:
            errs.append("alpha_t must be in [0, 1)")
        if not 0 <= self.lambda_m < 1 or not 0 <= self.lambda_t < 1:
            errs.append("lambda_m and lambda_t must be in [0, 1)")
        if not self.f_l_m > 0 or not self.f_l_t > 0:
            errs.append("leak clock frequencies must be > 0")
        if self.mode not in (MODE_MN, MODE_LIF):
            errs.append(f"mode must be {MODE_MN!r} or {MODE_LIF!r}")
        if not self.E_inh < self.V_r:
            errs.append("E_inh must be below V_r")
        if errs:
            raise ValidationError("; ".join(errs))

    def leak_conductance(self, C_l: float = 1.0) -> tuple[float, float]:
        """Equivalent leak conductances ``f_l * C_l`` for membrane and threshold."""
        return self.f_l_m * C_l, self.f_l_t * C_l


@dataclass(frozen=True)
class WtaNeuronParams:
    leak_rate: float = 0.0
    threshold: float = 1.0
    refractory_period: int = 0
    adapt_increment: float = 0.0
    adapt_decay: float = 0.0
    self_excitation_weight: float = 0.0

    def __post_init__(self):
        if self.refractory_period < 0:
            raise ValidationError("refractory_period must be >= 0")
        if not 0 <= self.adapt_decay < 1:
            raise ValidationError("adapt_decay must be in [0, 1)")
        if not self.threshold > 0:
            raise ValidationError("threshold must be > 0")


@dataclass(frozen=True)
class NeuronState:
    V_m: float = 0.0
    theta: float = 1.0
    I: tuple[float, ...] = field(default_factory=tuple)
    refrac_until: int = 0
    adapt_current: float = 0.0


def _finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise NumericalOverflowError(name, value)


# ---------------------------------------------------------------------------
# continuous reference model


def mn_reference_step(state: NeuronState, params: MnReferenceParams, I_ext: float,
                      dt: float) -> tuple[NeuronState, bool]:
    """Advance the reference M-N neuron by one explicit Euler step.

    Derivatives are evaluated at the start of the step. If the updated
    membrane reaches the updated threshold the spike rules are applied:
    ``I_j <- R_j I_j + A_j``, ``V_m <- V_r`` and ``theta <- max(theta_r, theta)``.
    """
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    p = params
    I = state.I if state.I else (0.0,) * len(p.k)
    if len(I) != len(p.k):
        raise ValidationError("state carries a different number of internal currents than params")
    V, th = state.V_m, state.theta
    I_sum = math.fsum(I)
    dV = (I_ext + I_sum - p.G * (V - p.E_L)) / p.C
    dth = p.a * (V - p.E_L) - p.b * (th - p.theta_inf)
    I_new = tuple(Ij - dt * kj * Ij for Ij, kj in zip(I, p.k))
    V_new = V + dt * dV
    th_new = th + dt * dth
    _finite("V_m", V_new)
    _finite("theta", th_new)
    for j, Ij in enumerate(I_new):
        _finite(f"I[{j}]", Ij)
    spiked = V_new >= th_new
    if spiked:
        I_new = tuple(Rj * Ij + Aj for Ij, Rj, Aj in zip(I_new, p.R, p.A))
        V_new = p.V_r
        th_new = max(p.theta_r, th_new)
    return replace(state, V_m=V_new, theta=th_new, I=I_new), spiked


# ---------------------------------------------------------------------------
# discrete switch-capacitor model


def mn_event_update(state: NeuronState, params: MnDiscreteParams, polarity: str = EXC,
                    weight_scale: float = 1.0) -> NeuronState:
    """Apply one synaptic event to the membrane (and threshold in MN mode).

    The membrane moves a fraction ``alpha_m * weight_scale`` of the way to the
    driving potential (``E_m`` for excitatory, ``E_inh`` for inhibitory
    events). The fraction is capped at 1 so the membrane never overshoots its
    driving potential. In MN mode the threshold rises by
    ``alpha_t * (V_m_pre - V_r)``.
    """
    if not weight_scale > 0:
        raise ValidationError("weight_scale must be > 0")
    step = min(params.alpha_m * weight_scale, 1.0)
    V_pre = state.V_m
    E = params.E_m if polarity == EXC else params.E_inh
    V = V_pre + step * (E - V_pre)
    if params.mode == MODE_MN:
        th = state.theta + params.alpha_t * (V_pre - params.V_r)
        return replace(state, V_m=V, theta=th)
    return replace(state, V_m=V)


def leak_tick(state: NeuronState, params: MnDiscreteParams, which: str = "membrane") -> NeuronState:
    """One leak-clock period of the switch-capacitor leak toward reset."""
    if which == "membrane":
        return replace(state, V_m=state.V_m + params.lambda_m * (params.V_r - state.V_m))
    if which == "threshold":
        return replace(state, theta=state.theta + params.lambda_t * (params.theta_r - state.theta))
    raise ValidationError(f"unknown leak target {which!r}")


def leak_closed_form(v0: float, rest: float, lam: float, k: int) -> float:
    """Value after ``k`` leak ticks: ``rest + (v0 - rest) * (1 - lam)**k``."""
    return rest + (v0 - rest) * (1.0 - lam) ** k


def threshold_check_and_reset(state: NeuronState, params: MnDiscreteParams) -> tuple[NeuronState, bool]:
    """Comparator + reset, called right after an event update.

    The membrane reset is applied first; the threshold rule then compares
    against the reset membrane, keeping an elevated threshold and falling
    back to ``theta_r`` only when the threshold sits at or below the reset
    level.
    """
    th_eff = state.theta if params.mode == MODE_MN else params.V_th_fixed
    if state.V_m < th_eff:
        return state, False
    V = params.V_r
    if params.mode == MODE_MN:
        th = state.theta if state.theta > V else params.theta_r
        return replace(state, V_m=V, theta=th), True
    return replace(state, V_m=V), True


def events_per_spike(alpha: float, V_th: float, E_m: float, V_r: float = 0.0) -> int:
    """Excitatory events needed to cross a fixed threshold from reset, no leak.

    Smallest ``n`` with ``E_m + (V_r - E_m)(1 - alpha)**n >= V_th``. The
    logarithmic estimate is corrected against the same recurrence the
    simulator uses so floating-point ties resolve identically.
    """
    if not (V_r < V_th < E_m):
        raise ValidationError("need V_r < V_th < E_m for a finite event count")
    n = max(1, math.ceil(math.log((E_m - V_th) / (E_m - V_r)) / math.log(1.0 - alpha)))
    while n > 1 and _iterate_exc(V_r, E_m, alpha, n - 1) >= V_th:
        n -= 1
    while _iterate_exc(V_r, E_m, alpha, n) < V_th:
        n += 1
    return n


def _iterate_exc(v: float, E: float, alpha: float, n: int) -> float:
    for _ in range(n):
        v = v + alpha * (E - v)
    return v


def alpha_for_event_count(n: int, V_th: float, E_m: float, V_r: float = 0.0,
                          position: float = 0.5) -> float:
    """Synaptic ratio whose closed-form events-per-spike equals ``n``.

    ``position`` in (0, 1) places the continuous crossing point inside
    ``(n - 1, n]``; 0.5 is the centre, values near 1 sit close to the edge
    where a small upward perturbation of alpha lowers the count.
    """
    x = (n - 1) + position
    a = 1.0 - math.exp(math.log((E_m - V_th) / (E_m - V_r)) / x)
    if events_per_spike(a, V_th, E_m, V_r) != n:
        raise ValidationError("position too close to an interval edge")
    return a


# ---------------------------------------------------------------------------
# behavioral WTA neuron


def wta_neuron_step(state: NeuronState, params: WtaNeuronParams, input_charge: float,
                    now: int) -> tuple[NeuronState, bool]:
    """One tick of the adaptive, refractory I&F neuron.

    Input arriving while ``now < refrac_until`` is discarded. Otherwise the
    membrane integrates ``input - leak - adapt_current`` (floored at 0) and
    fires at threshold, resetting to 0. The adaptation current grows by
    ``adapt_increment`` per spike and decays by a factor ``1 - adapt_decay``
    every tick.
    """
    adapt = state.adapt_current
    spiked = False
    V = state.V_m
    refrac = state.refrac_until
    if now >= refrac:
        V = max(0.0, V + input_charge - params.leak_rate - adapt)
        if V >= params.threshold:
            spiked = True
            V = 0.0
            refrac = now + params.refractory_period
            adapt += params.adapt_increment
    adapt *= 1.0 - params.adapt_decay
    return replace(state, V_m=V, refrac_until=refrac, adapt_current=adapt), spiked


# ---------------------------------------------------------------------------
# drivers for regular input trains (used by the model-agreement checks)


def run_discrete_train(params: MnDiscreteParams, event_ticks: Sequence[int], n_ticks: int,
                       leak_divisor: int, theta0: float | None = None) -> list[int]:
    """Drive the discrete cell with excitatory events; return spike ticks.

    The membrane leak clock fires on every tick divisible by ``leak_divisor``
    (before events of that tick are applied). Leak is applied tick by tick
    through :func:`leak_tick`.
    """
    if leak_divisor < 1:
        raise ValidationError("leak_divisor must be >= 1")
    th = params.theta_r if theta0 is None else theta0
    if params.mode == MODE_LIF:
        th = params.V_th_fixed
    st = NeuronState(V_m=params.V_r, theta=th)
    events = sorted(event_ticks)
    spikes = []
    ei = 0
    for t in range(n_ticks):
        if t % leak_divisor == 0 and t > 0:
            st = leak_tick(st, params, "membrane")
            if params.mode == MODE_MN:
                st = leak_tick(st, params, "threshold")
        while ei < len(events) and events[ei] == t:
            st = mn_event_update(st, params, EXC)
            st, s = threshold_check_and_reset(st, params)
            if s:
                spikes.append(t)
            ei += 1
    return spikes


def run_reference_train(params: MnReferenceParams, event_ticks: Sequence[int], n_ticks: int,
                        dt: float, alpha: float, E_syn: float) -> list[int]:
    """Drive the reference neuron with conductance pulses; return spike ticks.

    Each event injects, for one Euler step, the current
    ``C * alpha * (E_syn - V_m) / dt``, i.e. the charge that moves the
    membrane a fraction ``alpha`` toward ``E_syn``.
    """
    ev = set(event_ticks)
    st = NeuronState(V_m=params.E_L, theta=params.theta_inf, I=(0.0,) * len(params.k))
    spikes = []
    for t in range(n_ticks):
        I_ext = params.C * alpha * (E_syn - st.V_m) / dt if t in ev else 0.0
        st, s = mn_reference_step(st, params, I_ext, dt)
        if s:
            spikes.append(t)
    return spikes
