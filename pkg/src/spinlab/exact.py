"""Exact partition functions by enumeration.

Both backends build an integer density-of-states histogram first and only
then apply the model weights in log space. The histogram is indexed by the
pattern on a list of watched vertices and by the phase vector of the copies,
so full, phase-restricted and conditional quantities all come from one pass.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, EmptyEventError, InvalidInput
from .graphs import MultiGraph
from .twospin import HARDCORE, ISING, CanonicalModel, TwoSpinSpec, canonicalize, degenerate_free_energy

ISING_CAP = 32
HARDCORE_CAP = int(os.environ.get("SPINLAB_HC_CAP", 48))
_HC_BITS = 62
_MAX_WATCH = 16


def set_threads(n=None):
    """Forward a thread count to numba (falls back to SPINLAB_THREADS)."""
    import numba
    if n is None:
        env = os.environ.get("SPINLAB_THREADS")
        n = int(env) if env else None
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class PhaseVector:
    tags: tuple   # +1 / -1 per copy

    def __post_init__(self):
        if any(t not in (1, -1) for t in self.tags):
            raise InvalidInput("phase tags must be +1 or -1")

    @property
    def index(self):
        """Histogram index: bit c is set iff copy c has phase -."""
        return sum(1 << c for c, t in enumerate(self.tags) if t < 0)

    @classmethod
    def from_index(cls, idx, m):
        return cls(tuple(-1 if (idx >> c) & 1 else 1 for c in range(m)))

    @classmethod
    def parse(cls, text):
        return cls(tuple(1 if ch == "+" else -1 for ch in text.strip() if ch in "+-"))

    def __str__(self):
        return "".join("+" if t > 0 else "-" for t in self.tags)


@dataclass
class PartitionSummary:
    log_z: float
    n: int
    log_z_plus: float | None = None
    log_z_minus: float | None = None
    marginals: dict | None = None

    @property
    def free_energy_density(self):
        return self.log_z / self.n

    def to_json(self):
        out = {"log_z": self.log_z, "log_z_plus": self.log_z_plus,
               "log_z_minus": self.log_z_minus, "phi": self.free_energy_density}
        if self.marginals is not None:
            out["marginals"] = {str(k): v for k, v in self.marginals.items()}
        return out


@dataclass
class Histogram:
    """Integer counts plus the log-weight of each energy bin.

    ``counts`` has shape (npat, nphase, *bins) and ``logw`` the shape of bins.
    """
    counts: np.ndarray
    logw: np.ndarray
    watch: tuple
    ncopies: int
    const: float = 0.0
    extra: dict = field(default_factory=dict)

    def log_table(self):
        """log of sum over bins, shape (npat, nphase); -inf for empty cells."""
        c = self.counts.reshape(self.counts.shape[0], self.counts.shape[1], -1)
        w = self.logw.reshape(-1)
        with np.errstate(divide="ignore"):
            terms = np.log(c.astype(np.float64)) + w
        top = terms.max(axis=2)
        safe = np.where(np.isfinite(top), top, 0.0)
        s = np.exp(terms - safe[..., None]).sum(axis=2)
        with np.errstate(divide="ignore"):
            return np.where(np.isfinite(top), safe + np.log(s), -np.inf) + self.const


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    top = np.max(a, axis=axis, keepdims=True)
    if not np.all(np.isfinite(top)):
        top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - top), axis=axis, keepdims=True)) + top
    return np.squeeze(out, axis=axis) if axis is not None else float(out.reshape(()))


def _check_model(model):
    if not isinstance(model, CanonicalModel) or model.kind not in (ISING, HARDCORE):
        raise InvalidInput("enumeration needs an Ising or hard-core CanonicalModel")


def _phase_arrays(graph, copy_of, need_phase):
    n = graph.n
    if not need_phase:
        return np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64), 0
    if graph.coloring is None:
        raise InvalidInput("phase splits need a coloring")
    tau = np.asarray(graph.coloring, dtype=np.int64)
    if copy_of is None:
        copy = np.zeros(n, dtype=np.int64)
        ncopies = 1
    else:
        copy = np.asarray(copy_of, dtype=np.int64)
        ncopies = int(copy.max()) + 1 if n else 1
    return tau, copy, ncopies


def _watch_array(n, watch):
    watch = tuple(int(v) for v in watch)
    if len(watch) > _MAX_WATCH:
        raise CapacityError(f"at most {_MAX_WATCH} watched vertices")
    if len(set(watch)) != len(watch) or any(not 0 <= v < n for v in watch):
        raise InvalidInput("watched vertices must be distinct and in range")
    wpos = np.full(n, -1, dtype=np.int64)
    for i, v in enumerate(watch):
        wpos[v] = i
    return watch, wpos


def histogram(graph: MultiGraph, model: CanonicalModel, watch=(), copy_of=None,
              phase=True, cap=None) -> Histogram:
    """Enumerate all configurations and bin them.

    ``phase`` requests the phase split (requires a coloring); ``copy_of``
    assigns vertices to copies for phase vectors.
    """
    from . import _kernels
    _check_model(model)
    n = graph.n
    need_phase = phase and graph.coloring is not None
    if phase and copy_of is not None and graph.coloring is None:
        raise InvalidInput("phase vectors need a coloring")
    tau, copy, ncopies = _phase_arrays(graph, copy_of, need_phase)
    watch, wpos = _watch_array(n, watch)
    npat = 1 << len(watch)
    if model.kind == ISING:
        cap = ISING_CAP if cap is None else cap
        if n > cap:
            raise CapacityError(f"{n} vertices exceeds the Ising enumeration cap {cap}; use the sampler")
        loops = sum(1 for u, v in graph.edges if u == v)
        edges = [(u, v) for u, v in graph.edges if u != v]
        ptr, idx = _adj_csr(n, edges)
        nedges = len(edges)
        high_bits = min(n, max(0, n - 20), 8)
        counts = _kernels.ising_dos(n, ptr, idx, tau, copy, ncopies, wpos, npat, nedges, high_bits)
        a = np.arange(nedges + 1)[:, None]
        p = np.arange(n + 1)[None, :]
        logw = model.beta * (2 * a - nedges) + model.B * (2 * p - n)
        return Histogram(counts, logw, watch, ncopies, model.beta * loops)
    cap = HARDCORE_CAP if cap is None else cap
    if n > min(cap, _HC_BITS):
        raise CapacityError(f"{n} vertices exceeds the hard-core enumeration cap {min(cap, _HC_BITS)}; use the sampler")
    nbr = np.zeros(max(n, 1), dtype=np.int64)
    forbidden = 0
    for u, v in graph.edges:
        if u == v:
            forbidden |= 1 << u
        else:
            nbr[u] |= 1 << v
            nbr[v] |= 1 << u
    nblocks = max(1, min(n, 64))
    counts = _kernels.hardcore_dos(n, nbr, np.int64(forbidden), tau, copy, ncopies, wpos, npat, nblocks)
    logw = np.arange(n + 1) * math.log(model.lam)
    return Histogram(counts, logw, watch, ncopies)


def _adj_csr(n, edges):
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum(deg)
    idx = np.zeros(max(int(ptr[-1]), 1), dtype=np.int64)
    fill = ptr[:-1].copy()
    for u, v in edges:
        idx[fill[u]] = v
        fill[u] += 1
        idx[fill[v]] = u
        fill[v] += 1
    return ptr, idx


def log_Z(graph: MultiGraph, model: CanonicalModel, marginals=(), cap=None) -> PartitionSummary:
    """log Z with phase split (when colored) and optional single-site marginals."""
    hist = histogram(graph, model, watch=marginals, cap=cap)
    table = hist.log_table()                      # (npat, nphase)
    log_z = logsumexp(table)
    summary = PartitionSummary(log_z, graph.n)
    if hist.ncopies:
        by_phase = logsumexp(table, axis=0)
        summary.log_z_plus = float(by_phase[0])
        summary.log_z_minus = float(by_phase[1])
    if hist.watch:
        summary.marginals = _site_marginals(hist.watch, logsumexp(table, axis=1) - log_z)
    return summary


def _site_marginals(watch, log_joint):
    p = np.exp(log_joint)
    out = {}
    for i, v in enumerate(watch):
        mask = (np.arange(len(p)) >> i) & 1
        out[v] = float(p[mask == 1].sum())
    return out


def free_energy_density(graph: MultiGraph, model, cap=None) -> float:
    """(1/|V|) log Z. Accepts a CanonicalModel or a raw TwoSpinSpec on a
    regular graph."""
    if isinstance(model, TwoSpinSpec):
        return log_Z_spec(graph, model) / graph.n
    return log_Z(graph, model, cap=cap).log_z / graph.n


def log_Z_phase_vector(HG: MultiGraph, copy_of, model: CanonicalModel, Y: PhaseVector,
                       cap=None) -> float:
    """log of Z restricted to configurations whose per-copy phases equal Y."""
    table = phase_vector_table(HG, copy_of, model, cap=cap)
    if 1 << len(Y.tags) != len(table):
        raise InvalidInput(f"phase vector has {len(Y.tags)} tags, graph has {int(np.log2(len(table)))} copies")
    return float(table[Y.index])


def phase_vector_table(HG: MultiGraph, copy_of, model, cap=None) -> np.ndarray:
    """log Z(Y) for every phase vector, indexed by PhaseVector.index."""
    hist = histogram(HG, model, copy_of=copy_of, cap=cap)
    return logsumexp(hist.log_table(), axis=0)


@dataclass
class JointLaw:
    """Law of the watched spins, optionally conditioned on a phase."""
    vertices: tuple
    log_prob: np.ndarray         # indexed by bit pattern; bit i = vertex i is +
    phase: int | None
    log_z_event: float

    @property
    def prob(self):
        return np.exp(self.log_prob)

    def marginals(self):
        return [_site_marginals(self.vertices, self.log_prob)[v] for v in self.vertices]

    def ratio_to_product(self, p_plus):
        """Ratios joint/product for the product law with P(+) = p_plus[i]."""
        logq = product_log_law(p_plus)
        with np.errstate(invalid="ignore"):
            return np.exp(self.log_prob - logq)


def product_log_law(p_plus):
    p = np.asarray(p_plus, dtype=np.float64)
    npat = 1 << len(p)
    pats = np.arange(npat)
    out = np.zeros(npat)
    with np.errstate(divide="ignore"):
        for i, pi in enumerate(p):
            bit = (pats >> i) & 1
            out += np.where(bit == 1, np.log(pi), np.log1p(-pi))
    return out


def joint_law(graph, model, vertices, phase=None, hist=None, cap=None) -> JointLaw:
    if hist is None:
        hist = histogram(graph, model, watch=vertices, phase=phase is not None, cap=cap)
    table = hist.log_table()
    if phase is None:
        col = logsumexp(table, axis=1)
    else:
        if not hist.ncopies:
            raise InvalidInput("phase conditioning needs a coloring")
        col = table[:, 0 if phase > 0 else 1]
    log_ev = logsumexp(col)
    if not np.isfinite(log_ev):
        raise EmptyEventError("conditioning event has probability zero")
    return JointLaw(tuple(hist.watch), col - log_ev, phase, float(log_ev))


def conditional_marginals(graph, model, vertices, phase=None, cap=None):
    """P(sigma_v = + | phase) for each listed vertex."""
    return joint_law(graph, model, vertices, phase, cap=cap).marginals()


# independent oracles ----------------------------------------------------------

def log_Z_bruteforce(graph: MultiGraph, spec: TwoSpinSpec, phase=None) -> float:
    """Direct product over edges and vertices for every configuration. Slow;
    used as an oracle on small graphs."""
    if graph.n > 20:
        raise CapacityError("brute force oracle limited to 20 vertices")
    terms = []
    for conf in itertools.product((1, -1), repeat=graph.n):
        if phase is not None:
            s = sum(t * c for t, c in zip(graph.coloring, conf))
            if (1 if s >= 0 else -1) != phase:
                continue
        w = 1.0
        for v in range(graph.n):
            w *= spec.psi_bar(conf[v])
        for u, v in graph.edges:
            w *= spec.psi(conf[u], conf[v])
            if w == 0.0:
                break
        if w > 0:
            terms.append(math.log(w))
    return logsumexp(terms) if terms else -math.inf


def log_Z_spec(graph: MultiGraph, spec: TwoSpinSpec) -> float:
    """log Z of a general two-spin specification on a d-regular graph via its
    canonical form: Z = e^{B0 |E|} Z_canonical."""
    degs = graph.degrees()
    if graph.n == 0 or not np.all(degs == degs[0]) or degs[0] == 0:
        raise InvalidInput("canonical reduction needs a d-regular graph with d >= 1")
    model = canonicalize(spec, int(degs[0]))
    if model.degenerate:
        return degenerate_free_energy(model, graph) * graph.n
    return model.B0 * graph.m + log_Z(graph, model).log_z
