"""Three-level hierarchical address-event routing (Dynap-SEL style).

A spike leaves its neuron through a small fan-out table (up to eight copies,
each naming a relative destination chip, a mask of target cores and the tag
to broadcast). Copies travel across the chip mesh in x-then-y order (level 3),
are dispatched to every masked core on the destination chip (level 2) and are
finally broadcast inside each core, where every synapse whose stored tag
equals the copy's tag fires (level 1).

Cores are held as dense ``(256, 64)`` tag/weight/type arrays; an unprogrammed
CAM slot carries tag ``-1`` and never matches.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import RoutingError, ValidationError

TAG_BITS = 11
N_TAGS = 1 << TAG_BITS
NEURONS_PER_CORE = 256
SYNAPSES_PER_NEURON = 64
CORES_PER_CHIP = 4
MAX_COPIES = 8
MAX_GRID = 16
WEIGHT_MAX = 15

PLASTIC_NEURONS = 64
PLASTIC_SYNAPSES_PER_ROW = 128
NONPLASTIC_SYNAPSES_PER_ROW = 64
MAX_MERGED_ROWS = 8

UP = "up"
DOWN = "down"


def check_tag(value: int) -> int:
    if not 0 <= value < N_TAGS:
        raise ValidationError(f"tag {value} does not fit in {TAG_BITS} bits")
    return value


@dataclass(frozen=True)
class SynapseCam:
    tag: int
    weight: int = 1
    syn_type: str = "exc"
    plastic: bool = False

    def __post_init__(self):
        check_tag(self.tag)
        if not 0 <= self.weight <= WEIGHT_MAX:
            raise ValidationError("synapse weight must fit in 4 bits")
        if self.syn_type not in ("exc", "inh"):
            raise ValidationError(f"unknown synapse type {self.syn_type!r}")


@dataclass(frozen=True)
class DestEntry:
    dchip: tuple[int, int]
    core_mask: int
    out_tag: int

    def __post_init__(self):
        dx, dy = self.dchip
        if not (-MAX_GRID < dx < MAX_GRID and -MAX_GRID < dy < MAX_GRID):
            raise ValidationError(f"chip offset {self.dchip} exceeds a {MAX_GRID}x{MAX_GRID} array")
        if not 0 <= self.core_mask < (1 << CORES_PER_CHIP):
            raise ValidationError("core_mask must be a 4-bit mask")
        check_tag(self.out_tag)


class SourceId(NamedTuple):
    chip: tuple[int, int]
    core: int
    neuron: int


class RoutedCopy(NamedTuple):
    src_chip: tuple[int, int]
    dchip: tuple[int, int]
    core_mask: int
    out_tag: int


class CoreTable:
    """CAM contents of one non-plastic core."""

    def __init__(self, tags=None, weights=None, types=None):
        shape = (NEURONS_PER_CORE, SYNAPSES_PER_NEURON)
        self.tags = np.full(shape, -1, dtype=np.int16) if tags is None else np.asarray(tags, dtype=np.int16)
        self.weights = np.zeros(shape, dtype=np.int8) if weights is None else np.asarray(weights, dtype=np.int8)
        # 0 = excitatory, 1 = inhibitory
        self.types = np.zeros(shape, dtype=np.int8) if types is None else np.asarray(types, dtype=np.int8)
        if self.tags.shape != shape or self.weights.shape != shape or self.types.shape != shape:
            raise ValidationError(f"core tables must be {shape}")
        if self.tags.max(initial=-1) >= N_TAGS or self.tags.min(initial=-1) < -1:
            raise ValidationError("tag out of range")
        if self.weights.min(initial=0) < 0 or self.weights.max(initial=0) > WEIGHT_MAX:
            raise ValidationError("weight out of range")
        self._index = None

    def program(self, neuron: int, slot: int, syn: SynapseCam) -> None:
        self.tags[neuron, slot] = syn.tag
        self.weights[neuron, slot] = syn.weight
        self.types[neuron, slot] = 0 if syn.syn_type == "exc" else 1
        self._index = None

    def synapse(self, neuron: int, slot: int) -> SynapseCam | None:
        t = int(self.tags[neuron, slot])
        if t < 0:
            return None
        return SynapseCam(t, int(self.weights[neuron, slot]),
                          "exc" if self.types[neuron, slot] == 0 else "inh")

    def match(self, tag: int) -> np.ndarray:
        """Flat synapse indices (neuron * 64 + slot) holding ``tag``, ascending."""
        if self._index is None:
            self._index = {}
        hit = self._index.get(tag)
        if hit is None:
            hit = self._index[tag] = np.flatnonzero(self.tags.ravel() == tag)
        return hit


@dataclass
class Chip:
    cores: list[CoreTable] = field(default_factory=lambda: [CoreTable() for _ in range(CORES_PER_CHIP)])


class Activation(NamedTuple):
    chip: tuple[int, int]
    core: int
    neuron: int
    slot: int


@dataclass
class RouterStats:
    spikes: int = 0
    copies: int = 0
    hops: int = 0
    drops: int = 0
    empty_masks: int = 0
    core_deliveries: int = 0
    activations: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# routing stages


def fanout_expand(src: SourceId, lut: dict) -> list[RoutedCopy]:
    """One routed copy per destination entry of ``src`` (at most eight)."""
    dests = lut.get(src, ())
    if len(dests) > MAX_COPIES:
        raise ValidationError(f"neuron {src} has {len(dests)} destinations; at most {MAX_COPIES} allowed")
    return [RoutedCopy(src.chip, d.dchip, d.core_mask, d.out_tag) for d in dests]


def r3_mesh_route(copy: RoutedCopy, grid: tuple[int, int]) -> tuple[tuple[int, int], int]:
    """Dimension-ordered mesh route. Returns the target chip and the hop count.

    Raises :class:`RoutingError` if the target lies outside the grid.
    """
    (x, y), (dx, dy) = copy.src_chip, copy.dchip
    tx, ty = x + dx, y + dy
    if not (0 <= tx < grid[0] and 0 <= ty < grid[1]):
        raise RoutingError(f"target chip ({tx}, {ty}) outside {grid[0]}x{grid[1]} grid")
    return (tx, ty), abs(dx) + abs(dy)


def mesh_path(src: tuple[int, int], dst: tuple[int, int]) -> list[tuple[int, int]]:
    """Chips visited by an x-first, then y, route (both ends included)."""
    path = [src]
    x, y = src
    sx = 1 if dst[0] > x else -1
    while x != dst[0]:
        x += sx
        path.append((x, y))
    sy = 1 if dst[1] > y else -1
    while y != dst[1]:
        y += sy
        path.append((x, y))
    return path


def r2_dispatch(core_mask: int) -> list[int]:
    return [c for c in range(CORES_PER_CHIP) if core_mask >> c & 1]


def r1_broadcast_and_match(out_tag: int, core: CoreTable) -> list[tuple[int, int]]:
    """(neuron, slot) pairs of every synapse in the core storing ``out_tag``."""
    return [divmod(int(i), SYNAPSES_PER_NEURON) for i in core.match(out_tag)]


# ---------------------------------------------------------------------------
# the multi-chip fabric


class DynapGrid:
    """A rectangular array of chips sharing one fan-out table.

    ``lut`` maps :class:`SourceId` to a list of :class:`DestEntry`.
    """

    def __init__(self, width: int, height: int, chips: dict | None = None, lut: dict | None = None):
        if not (1 <= width <= MAX_GRID and 1 <= height <= MAX_GRID):
            raise ValidationError(f"grid must be between 1x1 and {MAX_GRID}x{MAX_GRID}")
        self.shape = (width, height)
        self.chips = chips if chips is not None else {
            (x, y): Chip() for y in range(height) for x in range(width)}
        self.lut = lut if lut is not None else {}
        self.stats = RouterStats()
        for src, dests in self.lut.items():
            if len(dests) > MAX_COPIES:
                raise ValidationError(f"neuron {src} has {len(dests)} destinations; at most {MAX_COPIES}")

    @property
    def n_synapses(self) -> int:
        return len(self.chips) * CORES_PER_CHIP * NEURONS_PER_CORE * SYNAPSES_PER_NEURON

    def synapse_index(self, chip: tuple[int, int], core: int, neuron: int, slot: int) -> int:
        x, y = chip
        return ((((y * self.shape[0] + x) * CORES_PER_CHIP + core) * NEURONS_PER_CORE + neuron)
                * SYNAPSES_PER_NEURON + slot)

    def neuron_index(self, chip: tuple[int, int], core: int, neuron: int) -> int:
        x, y = chip
        return ((y * self.shape[0] + x) * CORES_PER_CHIP + core) * NEURONS_PER_CORE + neuron

    def source_from_index(self, idx: int) -> SourceId:
        chip_core, neuron = divmod(idx, NEURONS_PER_CORE)
        chip, core = divmod(chip_core, CORES_PER_CHIP)
        y, x = divmod(chip, self.shape[0])
        return SourceId((x, y), core, neuron)

    def route_spike(self, src: SourceId) -> list[Activation]:
        """Route one spike through all three levels, updating ``stats``."""
        st = self.stats
        st.spikes += 1
        out: list[Activation] = []
        for copy in fanout_expand(src, self.lut):
            st.copies += 1
            try:
                target, hops = r3_mesh_route(copy, self.shape)
            except RoutingError:
                st.drops += 1
                continue
            st.hops += hops
            cores = r2_dispatch(copy.core_mask)
            if not cores:
                st.empty_masks += 1
                continue
            chip = self.chips[target]
            for c in cores:
                st.core_deliveries += 1
                for neuron, slot in r1_broadcast_and_match(copy.out_tag, chip.cores[c]):
                    out.append(Activation(target, c, neuron, slot))
        st.activations += len(out)
        return out

    def route_counts(self, sources: Sequence[int]) -> np.ndarray:
        """Activation count per global synapse index for a batch of spikes.

        ``sources`` are global neuron indices (see :meth:`neuron_index`).
        Identical sources route identically, so each distinct source is routed
        once and its activations weighted by its multiplicity.
        """
        counts = np.zeros(self.n_synapses, dtype=np.int64)
        uniq, mult = np.unique(np.asarray(sources, dtype=np.int64), return_counts=True)
        st = self.stats
        for s, m in zip(uniq.tolist(), mult.tolist()):
            src = self.source_from_index(s)
            dests = self.lut.get(src, ())
            st.spikes += m
            for d in dests:
                st.copies += m
                try:
                    target, hops = r3_mesh_route(RoutedCopy(src.chip, d.dchip, d.core_mask, d.out_tag),
                                                 self.shape)
                except RoutingError:
                    st.drops += m
                    continue
                st.hops += hops * m
                cores = r2_dispatch(d.core_mask)
                if not cores:
                    st.empty_masks += m
                    continue
                chip = self.chips[target]
                for c in cores:
                    st.core_deliveries += m
                    idx = chip.cores[c].match(d.out_tag)
                    if len(idx):
                        base = self.synapse_index(target, c, 0, 0)
                        counts[base + idx] += m
                        st.activations += m * len(idx)
        return counts


def activation_multiset(acts: Iterable[Activation]) -> Counter:
    return Counter(acts)


# ---------------------------------------------------------------------------
# plastic core


@dataclass(frozen=True)
class SynapseLatches:
    syn_type: str = "exc"
    learning_enabled: bool = True
    broadcast_enabled: bool = True
    forced_weight: int | None = None


@dataclass(frozen=True)
class PlasticSynapse:
    counter: int = 0
    latches: SynapseLatches = SynapseLatches()

    def __post_init__(self):
        if not 0 <= self.counter <= WEIGHT_MAX:
            raise ValidationError("plastic counter must be in [0, 15]")
        fw = self.latches.forced_weight
        if fw is not None and not 0 <= fw <= WEIGHT_MAX:
            raise ValidationError("forced weight must be in [0, 15]")


def plastic_counter_update(s: PlasticSynapse, direction: str) -> PlasticSynapse:
    """Saturating 4-bit up/down step.

    A forced weight pins the counter regardless of direction; with learning
    disabled the synapse is returned unchanged.
    """
    if direction not in (UP, DOWN):
        raise ValidationError(f"direction must be {UP!r} or {DOWN!r}")
    fw = s.latches.forced_weight
    if fw is not None:
        return s if s.counter == fw else replace(s, counter=fw)
    if not s.latches.learning_enabled:
        return s
    c = s.counter + (1 if direction == UP else -1)
    c = min(WEIGHT_MAX, max(0, c))
    return s if c == s.counter else replace(s, counter=c)


class CommandPolicy:
    """Learning direction taken from an external command stream.

    ``commands`` maps ``(neuron, synapse)`` to an iterable of directions; each
    call to :meth:`next_direction` consumes one.
    """

    def __init__(self, commands: dict):
        self._it = {k: iter(v) for k, v in commands.items()}

    def next_direction(self, neuron: int, synapse: int) -> str | None:
        it = self._it.get((neuron, synapse))
        return None if it is None else next(it, None)


class PlasticCore:
    """64 neurons x 128 plastic synapses (plus 64 non-plastic per row)."""

    def __init__(self):
        self.synapses = [[PlasticSynapse() for _ in range(PLASTIC_SYNAPSES_PER_ROW)]
                         for _ in range(PLASTIC_NEURONS)]

    def apply(self, policy, pairs: Iterable[tuple[int, int]]) -> int:
        """Ask ``policy`` for a direction for each (neuron, synapse); return updates applied."""
        n = 0
        for neuron, syn in pairs:
            d = policy.next_direction(neuron, syn)
            if d is None:
                continue
            self.synapses[neuron][syn] = plastic_counter_update(self.synapses[neuron][syn], d)
            n += 1
        return n

    def counters(self) -> np.ndarray:
        return np.array([[s.counter for s in row] for row in self.synapses], dtype=np.int8)


@dataclass(frozen=True)
class MergedCoreView:
    rows_per_neuron: int
    active_neurons: int
    plastic_fan_in: int
    nonplastic_fan_in: int
    row_map: tuple[tuple[int, ...], ...]

    @property
    def total_plastic(self) -> int:
        return self.active_neurons * self.plastic_fan_in


def merge_synapse_rows(rows_per_neuron: int, n_rows: int = PLASTIC_NEURONS) -> MergedCoreView:
    """Assign consecutive synapse rows to each neuron of the plastic core."""
    if rows_per_neuron not in (1, 2, 4, 8) or n_rows % rows_per_neuron:
        raise ValidationError("rows_per_neuron must be 1, 2, 4 or 8")
    active = n_rows // rows_per_neuron
    row_map = tuple(tuple(range(i * rows_per_neuron, (i + 1) * rows_per_neuron)) for i in range(active))
    return MergedCoreView(
        rows_per_neuron=rows_per_neuron,
        active_neurons=active,
        plastic_fan_in=PLASTIC_SYNAPSES_PER_ROW * rows_per_neuron,
        nonplastic_fan_in=NONPLASTIC_SYNAPSES_PER_ROW * rows_per_neuron,
        row_map=row_map,
    )


# ---------------------------------------------------------------------------
# random configurations


def random_grid(rng: np.random.Generator, width: int = 2, height: int = 2, n_sources: int = 64,
                fill: float = 1.0, max_offset: int | None = None) -> DynapGrid:
    """Random CAM contents and fan-out tables; some copies may leave the grid."""
    chips = {}
    shape = (NEURONS_PER_CORE, SYNAPSES_PER_NEURON)
    for y in range(height):
        for x in range(width):
            cores = []
            for _ in range(CORES_PER_CHIP):
                tags = rng.integers(0, N_TAGS, size=shape, dtype=np.int16)
                if fill < 1.0:
                    tags[rng.random(shape) >= fill] = -1
                cores.append(CoreTable(tags, rng.integers(0, WEIGHT_MAX + 1, size=shape, dtype=np.int8),
                                       rng.integers(0, 2, size=shape, dtype=np.int8)))
            chips[(x, y)] = Chip(cores)
    grid = DynapGrid(width, height, chips)
    n_total = width * height * CORES_PER_CHIP * NEURONS_PER_CORE
    m = max_offset if max_offset is not None else max(width, height)
    for s in rng.choice(n_total, size=min(n_sources, n_total), replace=False).tolist():
        k = int(rng.integers(0, MAX_COPIES + 1))
        grid.lut[grid.source_from_index(s)] = [
            DestEntry((int(rng.integers(-m, m + 1)), int(rng.integers(-m, m + 1))),
                      int(rng.integers(0, 1 << CORES_PER_CHIP)), int(rng.integers(0, N_TAGS)))
            for _ in range(k)]
    return grid
