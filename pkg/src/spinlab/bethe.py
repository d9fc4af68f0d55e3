"""Bethe free energy at BP fixed points, local tree observables and the
pairing constants Gamma, Theta used by the max-cut reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidInput
from .tree import FixedPoints, Message, find_fixed_points
from .twospin import CanonicalModel, HARDCORE

SPINS = (1, -1)
LOG_FLOOR = 1e-300


def _log(x):
    if not x >= LOG_FLOOR:
        raise DomainError(f"log argument {x!r} below {LOG_FLOOR}")
    return math.log(x)


@dataclass(frozen=True)
class BetheResult:
    phi_vx: float
    phi_e: float
    phi: float
    maximizer: str          # "star", "pm" (alternating pair), "plus" or "minus"
    phi_star: float         # value at the symmetric fixed point
    phi_pair: float | None  # value at the alternating (h+, h-) pair
    tie: bool = False


@dataclass(frozen=True)
class PairConstants:
    gamma: float
    theta: float

    @property
    def ratio(self):
        return self.theta / self.gamma


@dataclass(frozen=True)
class LocalExpectation:
    a_vx: float
    a_e: float


def z_pair(model: CanonicalModel, h: Message, h2: Message) -> float:
    """z(h ⊗_psi h') = sum_{s,t} h(s) psi(s,t) h'(t) with the raw edge weight."""
    return sum(h.prob(s) * model.edge_weight(s, t) * h2.prob(t) for s in SPINS for t in SPINS)


def phi_vertex(model: CanonicalModel, h_in: Message) -> float:
    """log sum_s psi_bar(s) prod_j (sum_t psi(s,t) h(t)) with d equal messages."""
    d = model.d
    total = 0.0
    for s in SPINS:
        inner = sum(model.edge_weight(s, t) * h_in.prob(t) for t in SPINS)
        total += model.vertex_weight(s) * inner ** d
    return _log(total)


def phi_generic(model: CanonicalModel, h_a: Message, h_b: Message):
    """Bethe functional averaged over the two colorings of the tree, for the
    message pair (h_a sent by one color class, h_b by the other). Returns
    (phi_vx, phi_e)."""
    vx = 0.5 * (phi_vertex(model, h_a) + phi_vertex(model, h_b))
    e = 0.5 * model.d * _log(z_pair(model, h_a, h_b))
    return vx, e


def phi_hardcore(lam: float, d: int, q_a: float, q_b: float):
    """Closed forms for the hard-core model with vacancy messages q_a, q_b."""
    vx = 0.5 * _log(lam * q_a ** d + 1.0) + 0.5 * _log(lam * q_b ** d + 1.0)
    e = 0.5 * d * _log(1.0 - (1.0 - q_a) * (1.0 - q_b))
    return vx, e


def _phi_at(model, h_a, h_b):
    if model.kind == HARDCORE:
        return phi_hardcore(model.lam, model.d, h_a.q, h_b.q)
    return phi_generic(model, h_a, h_b)


def bethe_free_energy(model: CanonicalModel, fp: FixedPoints | None = None) -> BetheResult:
    """Phi at the maximizing fixed point: the alternating pair for
    anti-ferromagnetic models, h^{sgn B} for the ferromagnetic Ising model."""
    if model.degenerate:
        raise InvalidInput("use degenerate_free_energy for degenerate models")
    if fp is None:
        fp = find_fixed_points(model)
    vs, es = _phi_at(model, fp.star, fp.star)
    phi_star = vs - es
    if model.antiferro:
        vx, e = _phi_at(model, fp.plus, fp.minus)
        phi_pair = vx - e
        if phi_pair >= phi_star:
            return BetheResult(vx, e, phi_pair, "pm", phi_star, phi_pair)
        return BetheResult(vs, es, phi_star, "star", phi_star, phi_pair)
    # ferromagnetic Ising: fixed points of F itself
    tie = model.B == 0 and not fp.unique
    h = fp.plus if model.B >= 0 else fp.minus
    vx, e = _phi_at(model, h, h)
    return BetheResult(vx, e, vx - e, "plus" if model.B >= 0 else "minus", phi_star, None, tie)


def bethe_at(model: CanonicalModel, h_a: Message, h_b: Message) -> float:
    vx, e = _phi_at(model, h_a, h_b)
    return vx - e


def pair_constants(model: CanonicalModel, fp: FixedPoints | None = None) -> PairConstants:
    if fp is None:
        fp = find_fixed_points(model)
    h_plus, h_minus = fp.phase_messages()
    gamma = z_pair(model, h_plus, h_plus) * z_pair(model, h_minus, h_minus)
    theta = z_pair(model, h_plus, h_minus) ** 2
    return PairConstants(gamma, theta)


def star_measure(model: CanonicalModel, incoming):
    """Weights of the depth-one star: root spin s and child spins, each child
    j carrying psi(s, t_j) h_j(t_j). Returns {(s, t_1..t_d): weight}."""
    from itertools import product
    out = {}
    for s in SPINS:
        for ts in product(SPINS, repeat=len(incoming)):
            w = model.vertex_weight(s)
            for t, h in zip(ts, incoming):
                w *= model.edge_weight(s, t) * h.prob(t)
            out[(s,) + ts] = w
    return out


def local_expectation(model: CanonicalModel, h: Message) -> LocalExpectation:
    """<d_B xi_bar(s_o)> and (1/2) sum_j <d_beta xi(s_o, s_j)> on the star
    whose d children all carry message h.

    d_B xi_bar is s_o for Ising and the occupation indicator for hard-core;
    the edge observable is s_o s_j for Ising and zero for hard-core.
    """
    d = model.d
    # children are exchangeable: sum over the number of + children
    Z = 0.0
    root_plus = 0.0
    edge = 0.0
    for s in SPINS:
        a = model.edge_weight(s, 1) * h.p_plus
        b = model.edge_weight(s, -1) * h.q
        w = model.vertex_weight(s) * (a + b) ** d
        Z += w
        if s == 1:
            root_plus += w
        if (a + b) > 0:
            edge += w * d * s * (a - b) / (a + b)
    if model.kind == HARDCORE:
        return LocalExpectation(root_plus / Z, 0.0)
    return LocalExpectation(2.0 * root_plus / Z - 1.0, 0.5 * edge / Z)


def local_expectation_pair(model: CanonicalModel, fp: FixedPoints) -> LocalExpectation:
    """Observables averaged over the two colorings of the tree (anti-ferro),
    or at h^{sgn B} (ferro)."""
    if model.antiferro:
        a = local_expectation(model, fp.plus)
        b = local_expectation(model, fp.minus)
        return LocalExpectation(0.5 * (a.a_vx + b.a_vx), 0.5 * (a.a_e + b.a_e))
    return local_expectation(model, fp.plus if model.B >= 0 else fp.minus)
