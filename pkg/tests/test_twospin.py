import math

import numpy as np
import pytest

from conftest import random_regular
from spinlab.errors import InvalidInput
from spinlab.exact import log_Z_bruteforce, log_Z_spec
from spinlab.graphs import MultiGraph, complete_graph, cycle_graph
from spinlab.twospin import (DEG_AGREE, DEG_DISAGREE, HARDCORE, ISING, TwoSpinSpec,
                             absorb_vertex_weights, canonicalize, classify,
                             degenerate_free_energy, parse_model)


def test_absorb_identity():
    spec = TwoSpinSpec(0.3, 1.7, 2.2)
    assert absorb_vertex_weights(spec, 3) == spec


def test_absorb_hardcore_lambda8():
    out = absorb_vertex_weights(TwoSpinSpec.hardcore(8.0), 3)
    assert out.pp == 0.0
    assert out.pm == pytest.approx(2.0, abs=1e-14)
    assert out.mm == 1.0
    assert (out.bar_p, out.bar_m) == (1.0, 1.0)


def test_absorb_ising_field_split():
    out = absorb_vertex_weights(TwoSpinSpec.ising(1.0, 0.3), 3)
    for s in (1, -1):
        for t in (1, -1):
            assert out.psi(s, t) == pytest.approx(math.exp(s * t + 0.1 * s + 0.1 * t), rel=1e-14)


def test_classify_examples():
    m = classify(TwoSpinSpec(math.exp(0.4), math.exp(-0.4), math.exp(0.4)), 3)
    assert m.kind == ISING
    assert m.beta == pytest.approx(0.4, abs=1e-14)
    assert abs(m.B) < 1e-14 and abs(m.B0) < 1e-14

    m = classify(TwoSpinSpec(0.0, 2.0, 1.0), 3)
    assert m.kind == HARDCORE and m.lam == pytest.approx(8.0) and m.B0 == 0.0

    m = classify(TwoSpinSpec(1.0, 0.0, 1.0), 3)
    assert m.kind == DEG_AGREE and m.B == 0.0 and m.B0 == 0.0

    m = classify(TwoSpinSpec(0.0, 2.0, 0.0), 3)
    assert m.kind == DEG_DISAGREE and m.B0 == pytest.approx(math.log(2))


def test_classify_relabels_plus_unconstrained():
    m = classify(TwoSpinSpec(1.0, 2.0, 0.0), 3)
    assert m.kind == HARDCORE and m.relabeled and m.lam == pytest.approx(8.0)


def test_invalid_specs():
    with pytest.raises(InvalidInput):
        TwoSpinSpec(0.0, 0.0, 0.0)
    with pytest.raises(InvalidInput):
        TwoSpinSpec(1.0, 1.0, 1.0, 0.0, 1.0)
    with pytest.raises(InvalidInput):
        classify(TwoSpinSpec(1.0, 1.0, 1.0, 2.0, 1.0), 3)
    with pytest.raises(InvalidInput):
        parse_model("potts:3", 3)


def test_json_round_trip():
    spec = TwoSpinSpec(0.5, 1.25, 2.0, 3.0, 0.75)
    assert TwoSpinSpec.from_json(spec.to_json()) == spec
    lit = '{"psi": {"++": 0, "+-": 1, "--": 1}, "psi_bar": {"+": 5, "-": 1}}'
    assert TwoSpinSpec.from_json(lit) == TwoSpinSpec.hardcore(5.0)


def test_canonical_ising_recovered(rng):
    for _ in range(100):
        beta, B = rng.uniform(-2, 2), rng.uniform(-2, 2)
        d = int(rng.integers(3, 9))
        m = canonicalize(TwoSpinSpec.ising(beta, B), d)
        assert m.kind == ISING
        assert abs(m.beta - beta) < 1e-12 and abs(m.B - B) < 1e-12


def test_spin_flip_commutes(rng):
    for _ in range(50):
        spec = TwoSpinSpec(*rng.uniform(0.1, 3.0, size=5))
        d = int(rng.integers(3, 7))
        a, b = canonicalize(spec, d), canonicalize(spec.flipped(), d)
        assert b.beta == pytest.approx(a.beta, abs=1e-12)
        assert b.B == pytest.approx(-a.B, abs=1e-12)
        assert b.B0 == pytest.approx(a.B0, abs=1e-12)


def test_spec_log_z_matches_canonical(rng):
    # brute force under the raw spec vs canonical enumeration plus offset
    graphs = [complete_graph(4), cycle_graph(6), random_regular(8, 3, rng),
              random_regular(10, 3, rng), random_regular(12, 3, rng)]
    specs = [TwoSpinSpec(*rng.uniform(0.2, 2.5, size=5)) for _ in range(3)]
    specs += [TwoSpinSpec(0.0, 1.3, 0.7, 2.5, 0.8), TwoSpinSpec(0.9, 1.3, 0.0, 1.0, 1.5)]
    for g in graphs:
        for spec in specs:
            assert log_Z_spec(g, spec) == pytest.approx(log_Z_bruteforce(g, spec), abs=1e-9)


def test_degenerate_specs_match_bruteforce():
    g = MultiGraph(8, ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4)))
    for spec in (TwoSpinSpec(1.5, 0.0, 0.5, 1.2, 1.0), TwoSpinSpec(0.0, 1.7, 0.0, 2.0, 0.5)):
        assert log_Z_spec(g, spec) == pytest.approx(log_Z_bruteforce(g, spec), abs=1e-12)


def test_degenerate_free_energy_examples():
    agree = classify(TwoSpinSpec(1.0, 0.0, 1.0), 3)
    assert degenerate_free_energy(agree, complete_graph(4)) == pytest.approx(0.25 * math.log(2))
    dis = classify(TwoSpinSpec(0.0, 1.0, 0.0), 2)
    assert degenerate_free_energy(dis, cycle_graph(4)) == pytest.approx(0.25 * math.log(2))
    assert degenerate_free_energy(dis, cycle_graph(3)) == -math.inf


def test_degenerate_agree_field_formula():
    # d-regular closed form B0|E|/n + B + (1/n) sum log(1 + exp(-2B|C|))
    model = classify(absorb_vertex_weights(TwoSpinSpec(2.0, 0.0, 0.5, 1.0, 1.0), 3), 3)
    g = complete_graph(4)
    want = model.B0 * 6 / 4 + model.B + math.log1p(math.exp(-2 * model.B * 4)) / 4
    assert degenerate_free_energy(model, g) == pytest.approx(want, abs=1e-14)
