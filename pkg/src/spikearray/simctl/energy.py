"""Per-event energy tables and energy accounting."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ValidationError


@dataclass(frozen=True)
class EnergyTable:
    pJ_per_synaptic_event: float
    pJ_per_spike: float = 0.0
    pJ_per_router_hop: float = 0.0

    def __post_init__(self):
        for name in ("pJ_per_synaptic_event", "pJ_per_spike", "pJ_per_router_hop"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    def as_dict(self) -> dict:
        return {"pJ_per_synaptic_event": self.pJ_per_synaptic_event,
                "pJ_per_spike": self.pJ_per_spike,
                "pJ_per_router_hop": self.pJ_per_router_hop}


# published energy per synaptic event of several event-based processors
PROFILES = {
    "MNIFAT": EnergyTable(360.0),
    "HiAER-IFAT": EnergyTable(22.0),
    "Dynap-SEL": EnergyTable(2.8),
    "Neurogrid": EnergyTable(31.2),
    "TrueNorth": EnergyTable(45.0),
    "SpiNNaker": EnergyTable(43_000.0),
    "BrainScaleS": EnergyTable(100.0),
}


def resolve_profile(profile) -> EnergyTable:
    """A profile name, a mapping of the three pJ fields, or an EnergyTable."""
    if isinstance(profile, EnergyTable):
        return profile
    if isinstance(profile, str):
        try:
            return PROFILES[profile]
        except KeyError:
            raise ValidationError(f"unknown energy profile {profile!r}; known: {sorted(PROFILES)}") from None
    if isinstance(profile, dict):
        return EnergyTable(**profile)
    raise ValidationError(f"cannot interpret energy profile {profile!r}")


def energy_estimate(table: EnergyTable, synaptic_events: int, spikes: int = 0, hops: int = 0) -> dict:
    """Energy in pJ and µJ; each term is count × per-event cost."""
    syn = synaptic_events * table.pJ_per_synaptic_event
    spk = spikes * table.pJ_per_spike
    hop = hops * table.pJ_per_router_hop
    total = syn + spk + hop
    return {
        "synaptic_pJ": syn,
        "spike_pJ": spk,
        "router_pJ": hop,
        "total_pJ": total,
        "total_uJ": total / 1e6,
        **table.as_dict(),
    }
