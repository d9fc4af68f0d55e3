import math

import numpy as np
import pytest

from conftest import random_graph
from spinlab import exact
from spinlab.errors import CapacityError, EmptyEventError, InvalidInput
from spinlab.exact import (PhaseVector, conditional_marginals, free_energy_density, joint_law,
                           log_Z, log_Z_phase_vector, logsumexp, phase_vector_table)
from spinlab.bethe import bethe_free_energy
from spinlab.graphs import MultiGraph, configuration_model, double_cover
from spinlab.twospin import hardcore, ising


def naive(graph, model, phase=None, copy_of=None, Y=None):
    """All configurations as a 0/1 matrix, weights from explicit edge loops."""
    n = graph.n
    conf = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.int64)
    spin = 2 * conf - 1
    if model.is_hardcore:
        logw = conf.sum(axis=1) * math.log(model.lam)
        for u, v in graph.edges:
            logw = np.where((conf[:, u] == 1) & (conf[:, v] == 1), -np.inf, logw)
    else:
        logw = model.B * spin.sum(axis=1).astype(float)
        for u, v in graph.edges:
            logw = logw + model.beta * spin[:, u] * spin[:, v]
    keep = np.ones(len(conf), dtype=bool)
    if phase is not None:
        s = spin @ np.asarray(graph.coloring)
        keep &= np.where(s >= 0, 1, -1) == phase
    if Y is not None:
        tau = np.asarray(graph.coloring)
        for c, tag in enumerate(Y):
            mask = np.asarray(copy_of) == c
            s = spin[:, mask] @ tau[mask]
            keep &= np.where(s >= 0, 1, -1) == tag
    vals = logw[keep]
    return logsumexp(vals) if len(vals) else -math.inf


def _random_multigraph(rng):
    n = int(rng.integers(1, 13))
    g = random_graph(n, rng.uniform(0.1, 0.7), rng, colored=True)
    extra = []
    for _ in range(int(rng.integers(0, 3))):
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        extra.append((u, v))
    return MultiGraph(n, g.edges + tuple(extra), g.coloring)


def _random_model(rng):
    if rng.random() < 0.5:
        return hardcore(float(np.exp(rng.uniform(-2, 3))), 3)
    return ising(float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1, 1)), 3)


def test_examples_hardcore():
    edge = MultiGraph(2, ((0, 1),))
    assert log_Z(edge, hardcore(1.0, 3)).log_z == pytest.approx(math.log(3), abs=1e-14)


def test_c4_values(c4):
    s = log_Z(c4, hardcore(1.0, 3), marginals=(0,))
    assert (round(math.exp(s.log_z)), round(math.exp(s.log_z_plus)),
            round(math.exp(s.log_z_minus))) == (7, 4, 3)
    assert s.marginals[0] == pytest.approx(2 / 7, abs=1e-14)
    assert math.exp(log_Z(c4, hardcore(2.0, 3)).log_z) == pytest.approx(17, abs=1e-10)


def test_ising_k2():
    k2 = MultiGraph(2, ((0, 1),))
    assert log_Z(k2, ising(0.5, 0.0, 3)).log_z == pytest.approx(math.log(4 * math.cosh(0.5)), abs=1e-14)


def test_single_vertex_closed_forms():
    v = MultiGraph(1, ())
    assert conditional_marginals(v, hardcore(3.0, 3), (0,))[0] == pytest.approx(0.75)
    assert free_energy_density(v, ising(0.3, 0.8, 3)) == pytest.approx(math.log(2 * math.cosh(0.8)))


def test_phase_conditioned_marginal(c4):
    assert conditional_marginals(c4, hardcore(1.0, 3), (0,), phase=1)[0] == pytest.approx(0.5)


def test_empty_event():
    # a looped vertex is never occupied, so its phase is always -
    v = MultiGraph(1, ((0, 0),), (1,))
    assert joint_law(v, hardcore(1.0, 3), (0,), phase=-1).prob[0] == 1.0
    with pytest.raises(EmptyEventError):
        joint_law(v, hardcore(1.0, 3), (0,), phase=1)


def test_engine_vs_naive_oracle(rng):
    for _ in range(1000):
        g = _random_multigraph(rng)
        m = _random_model(rng)
        s = log_Z(g, m)
        assert s.log_z == pytest.approx(naive(g, m), abs=1e-10)
        assert s.log_z_plus == pytest.approx(naive(g, m, phase=1), abs=1e-10)
        if s.log_z_minus == -math.inf:
            assert naive(g, m, phase=-1) == -math.inf
        else:
            assert s.log_z_minus == pytest.approx(naive(g, m, phase=-1), abs=1e-10)
        assert abs(np.logaddexp(s.log_z_plus, s.log_z_minus) - s.log_z) <= 1e-10


def test_loops_and_multi_edges():
    g = MultiGraph(2, ((0, 1), (0, 1), (1, 1)))
    m = ising(0.4, 0.0, 3)
    want = math.log(sum(math.exp(0.4 * (2 * a * b + b * b)) for a in (1, -1) for b in (1, -1)))
    assert log_Z(g, m).log_z == pytest.approx(want, abs=1e-14)
    # a loop forbids occupation under the hard-core constraint
    assert log_Z(MultiGraph(1, ((0, 0),)), hardcore(9.0, 3)).log_z == 0.0


def test_phase_vectors(rng):
    g1 = random_graph(4, 0.6, rng, colored=True)
    g2 = random_graph(5, 0.5, rng, colored=True)
    edges = g1.edges + tuple((u + 4, v + 4) for u, v in g2.edges)
    union = MultiGraph(9, edges, g1.coloring + g2.coloring)
    copy_of = (0,) * 4 + (1,) * 5
    m = hardcore(2.0, 3)
    table = phase_vector_table(union, copy_of, m)
    assert logsumexp(table) == pytest.approx(log_Z(union, m).log_z, abs=1e-9)
    s1, s2 = log_Z(g1, m), log_Z(g2, m)
    for y1, a in ((1, s1.log_z_plus), (-1, s1.log_z_minus)):
        for y2, b in ((1, s2.log_z_plus), (-1, s2.log_z_minus)):
            val = log_Z_phase_vector(union, copy_of, m, PhaseVector((y1, y2)))
            assert val == pytest.approx(a + b, abs=1e-12)
    # with coupling edges the table still partitions Z and matches the oracle
    coupled = union.with_edges(union.edges + ((0, 4), (1, 5)))
    table = phase_vector_table(coupled, copy_of, m)
    assert logsumexp(table) == pytest.approx(log_Z(coupled, m).log_z, abs=1e-9)
    for idx in range(4):
        Y = PhaseVector.from_index(idx, 2)
        assert table[idx] == pytest.approx(naive(coupled, m, copy_of=copy_of, Y=Y.tags), abs=1e-10)
    with pytest.raises(InvalidInput):
        log_Z_phase_vector(coupled, copy_of, m, PhaseVector((1, 1, 1)))


def test_phase_vector_parse():
    Y = PhaseVector.parse("+-+-")
    assert str(Y) == "+-+-" and PhaseVector.from_index(Y.index, 4) == Y


def test_joint_law_ratio(c4):
    law = joint_law(c4, hardcore(1.0, 3), (0, 1))
    assert law.prob.sum() == pytest.approx(1.0)
    p = law.marginals()
    r = law.ratio_to_product(p)
    # vertices 0 and 1 are adjacent: both occupied has zero mass
    assert r[3] == 0.0


def test_capacity_errors():
    big = MultiGraph(40, ())
    with pytest.raises(CapacityError):
        log_Z(big, ising(0.1, 0.0, 3))
    with pytest.raises(CapacityError):
        log_Z(MultiGraph(70, ()), hardcore(1.0, 3))


def test_threads_bit_identical(rng):
    g = double_cover(configuration_model(10, 3, seed=4))
    m = ising(-0.6, 0.1, 3)
    exact.set_threads(1)
    a = log_Z(g, m)
    exact.set_threads(4)
    b = log_Z(g, m)
    exact.set_threads(None)
    assert (a.log_z, a.log_z_plus, a.log_z_minus) == (b.log_z, b.log_z_plus, b.log_z_minus)
    h = hardcore(5.0, 3)
    exact.set_threads(1)
    a = log_Z(g, h).log_z
    exact.set_threads(4)
    assert log_Z(g, h).log_z == a


@pytest.mark.parametrize("lam,tol", [(1.0, 0.1), (5.0, 0.12)])
def test_free_energy_near_bethe(lam, tol):
    m = hardcore(lam, 3)
    phi = bethe_free_energy(m).phi
    for seed in range(3):
        g = double_cover(configuration_model(12, 3, seed=seed))
        assert abs(free_energy_density(g, m) - phi) <= tol
