import math
from collections import Counter

import numpy as np
import pytest

from spikearray.cortex_fabric import (AxonBuffer, ConnectionRule, ConnectionTarget, Cortex, CountEvent,
                                      HypercolumnSpec, MinicolumnSpec, MinicolumnState, SomaParams,
                                      axon_rx, axon_tx, generate_destinations, master_advance,
                                      minicolumn_update, neuron_destination_count, synapse_accumulate)
from spikearray.errors import ValidationError


def one_type(n_mc=1, **soma):
    return HypercolumnSpec(n_mc, MinicolumnSpec((100,), (SomaParams(**soma),)))


def counts_by_tick(cx):
    out = Counter()
    for t, _, _, _, c in cx.count_trace:
        out[t] += c
    return out


def test_hand_trace_self_excitation():
    # decay 0.5, no leak; self-loop delivers 100 * 0.0025 = 0.25 per burst
    spec = one_type(threshold=1.0, tau_psc=1 / math.log(2))
    rule = ConnectionRule(((ConnectionTarget(0, 1, "identity", (0.0025,)),),))
    cx = Cortex(1, spec, rule)
    cx.inject(0, 0, 1, [1.0], 1)
    for _ in range(6):
        cx.advance()
    per_tick = counts_by_tick(cx)
    assert [per_tick.get(t, 0) for t in range(6)] == [0, 100, 0, 100, 0, 0]


def test_psc_and_membrane_arithmetic():
    spec = MinicolumnSpec((100,), (SomaParams(leak=0.1, threshold=10.0, tau_psc=2.0),))
    st = MinicolumnState(np.zeros((1, 100)), np.zeros((1, 100)), np.zeros((1, 100), dtype=np.int64))
    V = psc = 0.0
    d = math.exp(-0.5)
    for t, x in enumerate([1.0, 0.0, 0.5, 0.0]):
        minicolumn_update(st, spec, np.array([[x]]), t)
        psc = psc * d + x
        V = V * 0.9 + psc
        assert np.allclose(st.V, V) and np.allclose(st.psc, psc)


def test_refractory_blocks_integration():
    spec = MinicolumnSpec((100,), (SomaParams(threshold=1.0, refractory=2, tau_psc=1e-9),))
    st = MinicolumnState(np.zeros((1, 100)), np.zeros((1, 100)), np.zeros((1, 100), dtype=np.int64))
    spikes = [int(minicolumn_update(st, spec, np.array([[2.0]]), t)[0].sum()) for t in range(7)]
    assert spikes == [100, 0, 0, 100, 0, 0, 100]


def test_types_get_own_params_and_counts():
    spec = MinicolumnSpec((60, 40), (SomaParams(threshold=1.0), SomaParams(threshold=5.0)))
    st = MinicolumnState(np.zeros((1, 100)), np.zeros((1, 100)), np.zeros((1, 100), dtype=np.int64))
    counts, spk = minicolumn_update(st, spec, np.array([[1.5, 1.5]]), 0)
    assert counts.tolist() == [[60, 0]] and spk.sum() == 60


def test_spec_validation():
    with pytest.raises(ValidationError):
        MinicolumnSpec((50, 40), (SomaParams(), SomaParams()))
    with pytest.raises(ValidationError):
        MinicolumnSpec((10,) * 10, (SomaParams(),) * 10)
    with pytest.raises(ValidationError):
        HypercolumnSpec(129)
    with pytest.raises(ValidationError):
        ConnectionTarget(delay=17)
    with pytest.raises(ValidationError):
        ConnectionTarget(mc_map="random")
    with pytest.raises(ValidationError):
        ConnectionRule(((ConnectionTarget(),) * 17,))


def test_destinations_all_map():
    rule = ConnectionRule(((ConnectionTarget(-1, 1, "all", (0.1,)), ConnectionTarget(0, 1, "all", (0.1,)),
                            ConnectionTarget(1, 1, "all", (0.1,))),))
    dests, skipped = generate_destinations(0, 0, 0, rule, 2, 4)
    assert skipped == 1 and len(dests) == 8
    assert {(d.hc, d.mc) for d in dests} == {(h, m) for h in (0, 1) for m in range(4)}
    assert neuron_destination_count(1, 2, 0, rule, 2, 4) == 800


def test_destinations_offset_wraps():
    rule = ConnectionRule(((ConnectionTarget(0, 1, ("offset", 3), (1.0,)),),))
    dests, _ = generate_destinations(0, 2, 0, rule, 1, 4)
    assert [(d.hc, d.mc) for d in dests] == [(0, 1)]


def test_full_rule_fanout():
    rule = ConnectionRule((tuple(ConnectionTarget(k, 1, "all", (0.0,)) for k in range(16)),))
    assert neuron_destination_count(0, 0, 0, rule, 16, 128) == 16 * 128 * 100
    assert rule.storage_words() == 16 * 4


def test_axon_fixed_delays_fifo():
    buf = AxonBuffer()
    for i, d in enumerate([3, 1, 3, 2]):
        axon_tx(CountEvent(0, i, 0, 1, d), buf, 0)
    got = {t: [ev.src_mc for ev, _ in axon_rx(buf, t)] for t in range(1, 5)}
    assert got == {1: [1], 2: [3], 3: [0, 2], 4: []}
    assert buf.enqueued == buf.dequeued == 4


def test_axon_rejects_bad_delays():
    with pytest.raises(ValidationError):
        axon_tx(CountEvent(0, 0, 0, 1, 2.5), AxonBuffer(), 0)
    with pytest.raises(ValidationError):
        axon_tx(CountEvent(0, 0, 0, 1, 0), AxonBuffer(True), 0)


def test_stochastic_delay_mean():
    buf = AxonBuffer(stochastic=True)
    rng = np.random.default_rng(0)
    n = 20000
    for _ in range(n):
        axon_tx(CountEvent(0, 0, 0, 1, 3.4), buf, 0)
    realized = [r for t in range(1, 6) for _, r in axon_rx(buf, t, rng)]
    assert len(realized) == n and set(realized) == {3, 4}
    assert abs(np.mean(realized) - 3.4) < 0.02


def test_accumulate_order_invariant():
    rule = ConnectionRule(((ConnectionTarget(0, 1, "all", (0.1, -0.3)), ConnectionTarget(1, 2, "identity", (0.2, 0.7))),
                           (ConnectionTarget(0, 1, ("offset", 1), (1e-9, 1e9)),)))
    rng = np.random.default_rng(5)
    evs = [CountEvent(int(rng.integers(2)), int(rng.integers(3)), ty, int(rng.integers(1, 50)), 1,
                      0 if ty else int(rng.integers(2))) for ty in rng.integers(0, 2, 60).tolist()]
    a = synapse_accumulate(evs, rule, 2, 3, 2)
    for _ in range(5):
        rng.shuffle(evs)
        assert np.array_equal(synapse_accumulate(evs, rule, 2, 3, 2), a)


def test_external_input_and_event_conservation():
    rule = ConnectionRule(((ConnectionTarget(0, 2, "all", (0.004,)), ConnectionTarget(1, 1, "all", (0.003,))),))
    cx = Cortex(3, one_type(4, threshold=1.0, leak=0.05, refractory=1), rule)
    external = {0: [(0, 0, 1, [1.5], 1)], 10: [(2, 3, 1, [1.5], 1)]}
    cx.run(40, external)
    cx.flush()
    st = cx.stats
    assert st.enqueued == st.dequeued
    assert st.external_events == 2 and st.spikes > 0
    assert st.skipped_targets > 0


def test_inject_out_of_range():
    cx = Cortex(1, one_type(), ConnectionRule(((),)))
    with pytest.raises(ValidationError):
        cx.inject(1, 0, 1, [1.0])
    with pytest.raises(ValidationError):
        cx.inject(0, 0, 1, [1.0, 2.0])


def test_master_barrier():
    cx = Cortex(1, one_type(), ConnectionRule(((),)))
    assert master_advance(cx, 0) == 1
    with pytest.raises(ValidationError):
        master_advance(cx, 0)


def test_cortex_determinism_with_stochastic_delays():
    rule = ConnectionRule(((ConnectionTarget(0, 1.5, "all", (0.01,)),),))

    def run(seed):
        cx = Cortex(1, one_type(2, threshold=1.0, leak=0.02), rule, stochastic_delays=True, seed=seed)
        cx.run(60, {0: [(0, 0, 1, [1.2], 1)]})
        return cx.count_trace

    assert run(3) == run(3)


def test_tm_ratio():
    assert Cortex(4, one_type(8), ConnectionRule(((),))).tm_ratio == 32


def test_neuron_trace_recorded():
    cx = Cortex(1, one_type(threshold=1.0, refractory=5), ConnectionRule(((),)), record_neurons=True)
    cx.inject(0, 0, 1, [2.0], 1)
    cx.run(3)
    assert cx.neuron_trace == [(1, 0, 0, f"{(1 << 100) - 1:025x}")]
