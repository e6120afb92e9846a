"""Any document that load_config accepts must run without configuration-class errors."""

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from spikearray.errors import ConfigError
from spikearray.simctl import load_config
from spikearray.simctl.runner import execute

unit = st.floats(min_value=0.01, max_value=0.9)
BAD = [-1, 0, 1.5, 17, "x", None, [], 2.5]


@st.composite
def corrupt(draw, doc, paths):
    """Leave ``doc`` valid-looking, or overwrite one field with a likely bad value."""
    if draw(st.integers(0, 2)) == 0:
        path = draw(st.sampled_from(paths))
        node = doc
        try:
            for p in path[:-1]:
                node = node[p]
            node[path[-1]] = draw(st.sampled_from(BAD))
        except (KeyError, IndexError, TypeError):
            pass
    return doc


@st.composite
def ifat_docs(draw):
    rows, cols = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    n = rows * cols * 4
    use_lut = draw(st.booleans())
    lut = draw(st.lists(st.fixed_dictionaries({
        "src": st.integers(0, n + 3), "dst": st.integers(0, n - 1),
        "kind": st.sampled_from(["conductance", "probabilistic"]), "weight": unit,
        "polarity": st.sampled_from(["exc", "inh"]), "delay": st.integers(0, 4)}), min_size=1, max_size=5))
    ifat = {"rows": rows, "cols": cols, "mode": draw(st.sampled_from(["LIF", "MN"])),
            "neuron": {"alpha_m": draw(unit), "alpha_t": draw(st.floats(0, 0.1)),
                       "lambda_m": draw(st.floats(0, 0.1))},
            "leak_divisor_m": draw(st.integers(0, 5)), "service_rate": draw(st.integers(1, 3)),
            "mismatch_sigma": draw(st.floats(0, 0.1))}
    if use_lut:
        ifat["lut"] = lut
    limit = n + 4 if use_lut else n
    doc = {"format_version": 1, "engine": "ifat", "ticks": draw(st.integers(1, 40)), "ifat": ifat,
           "stimulus": {"events": draw(st.lists(st.tuples(st.integers(0, 30), st.integers(0, limit - 1))
                                                .map(list), max_size=8))}}
    return draw(corrupt(doc, [("ticks",), ("ifat", "rows"), ("ifat", "mode"), ("ifat", "neuron", "alpha_m"),
                              ("ifat", "service_rate"), ("ifat", "lut", 0, "dst"), ("ifat", "lut", 0, "delay"),
                              ("stimulus", "events", 0, 1)]))


@st.composite
def wta_docs(draw):
    wta = {"rows": draw(st.integers(1, 4)), "cols": draw(st.integers(1, 4)),
           "flags": draw(st.lists(st.sampled_from(["LAT", "VERT1", "VERT2", "SELF"]), max_size=3, unique=True)),
           "wrap": draw(st.booleans()), "inhibition": draw(st.booleans()),
           "neuron": {"threshold": draw(st.floats(0.2, 2)), "refractory_period": draw(st.integers(0, 3)),
                      "adapt_decay": draw(st.floats(0, 0.5))}}
    kind = draw(st.sampled_from(["poisson", "regular", "uniform"]))
    gen = {"kind": kind, "addresses": "all"}
    gen.update({"poisson": {"rate_hz": draw(st.floats(0, 900))}, "regular": {"period": draw(st.integers(1, 5))},
                "uniform": {"events_per_address": draw(st.integers(0, 3))}}[kind])
    doc = {"format_version": 1, "engine": "wta", "ticks": draw(st.integers(1, 30)), "wta": wta,
           "stimulus": {"generators": [gen]}}
    return draw(corrupt(doc, [("wta", "rows"), ("wta", "flags"), ("wta", "neuron", "threshold"),
                              ("wta", "neuron", "adapt_decay"), ("stimulus", "generators", 0, "kind"),
                              ("tick_seconds",)]))


@st.composite
def cortex_docs(draw):
    n_types = draw(st.integers(1, 3))
    cuts = sorted(draw(st.lists(st.integers(0, 100), min_size=n_types - 1, max_size=n_types - 1)))
    counts = [b - a for a, b in zip([0] + cuts, cuts + [100])]
    target = st.fixed_dictionaries({
        "hc_offset": st.integers(-2, 2), "delay": st.integers(1, 16),
        "mc_map": st.sampled_from(["all", "identity", {"offset": 1}]),
        "weights": st.lists(st.floats(-0.05, 0.05), min_size=n_types, max_size=n_types)})
    cortex = {"n_hypercolumns": draw(st.integers(1, 3)), "n_minicolumns": draw(st.integers(1, 4)),
              "types": [{"count": c, "threshold": draw(st.floats(0.5, 2)), "leak": draw(st.floats(0, 0.5))}
                        for c in counts],
              "rules": draw(st.lists(st.lists(target, max_size=2), min_size=n_types, max_size=n_types)),
              "external": [{"tick": 0, "hc": 0, "mc": 0, "count": 100, "weights": [1.5] * n_types}]}
    doc = {"format_version": 1, "engine": "cortex", "ticks": draw(st.integers(1, 10)), "cortex": cortex}
    return draw(corrupt(doc, [("cortex", "n_minicolumns"), ("cortex", "types", 0, "count"),
                              ("cortex", "types", 0, "leak"), ("cortex", "rules", 0),
                              ("cortex", "external", 0, "hc"), ("cortex", "external", 0, "weights")]))


def accepted_runs(doc):
    try:
        cfg = load_config(doc)
    except ConfigError as exc:
        assert exc.errors and all(":" in e for e in exc.errors)
        return False
    execute(cfg, 1)
    return True


FUZZ = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FUZZ
@given(ifat_docs())
def test_ifat_documents(doc):
    accepted_runs(doc)


@FUZZ
@given(wta_docs())
def test_wta_documents(doc):
    accepted_runs(doc)


@FUZZ
@given(cortex_docs())
def test_cortex_documents(doc):
    accepted_runs(doc)
