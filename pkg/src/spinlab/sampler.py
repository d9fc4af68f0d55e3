"""Single-site heat-bath Glauber dynamics for Ising and hard-core models.

Chains started inside a phase stay there for a long time in non-uniqueness
regimes; the statistics below bin samples by the observed phase instead of
assuming mixing between phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .graphs import Gadget, MultiGraph
from .twospin import HARDCORE, ISING, CanonicalModel

INITS = ("all-minus", "phase-plus", "phase-minus", "random")


@dataclass(frozen=True)
class ChainConfig:
    steps: int = 10000          # sweeps, each n single-site updates
    burn_in: int = 100
    seed: int = 0
    init: str = "all-minus"
    record_states: bool = False

    def __post_init__(self):
        if not self.steps > self.burn_in >= 0:
            raise InvalidInput("need steps > burn_in >= 0")
        if self.init not in INITS:
            raise InvalidInput(f"init must be one of {INITS}")


@dataclass
class ChainStats:
    mean_signed_magnetization: float
    se_signed_magnetization: float
    phase_fraction_plus: float
    marginals: dict                     # vertex -> (P(+), standard error)
    samples: int
    phase_flips: int
    seed: int
    trace: np.ndarray | None = field(default=None, repr=False)     # per-sweep sum tau*sigma
    watched: np.ndarray | None = field(default=None, repr=False)
    states: np.ndarray | None = field(default=None, repr=False)

    def to_json(self):
        return {"mean_signed_magnetization": self.mean_signed_magnetization,
                "se_signed_magnetization": self.se_signed_magnetization,
                "phase_fraction_plus": self.phase_fraction_plus,
                "marginals": {str(v): {"p": p, "se": se} for v, (p, se) in self.marginals.items()},
                "samples": self.samples, "phase_flips": self.phase_flips, "seed": self.seed}


def batch_means(x, nbatch=20):
    """Mean and batch-means standard error of a correlated series."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    nb = min(nbatch, n)
    size = n // nb
    if size < 1 or nb < 2:
        return float(x.mean()), math.nan
    b = x[: nb * size].reshape(nb, size).mean(axis=1)
    return float(x.mean()), float(b.std(ddof=1) / math.sqrt(nb))


def _arrays(graph: MultiGraph):
    n = graph.n
    loops = np.zeros(n, dtype=np.int64)
    edges = []
    for u, v in graph.edges:
        if u == v:
            loops[u] += 1
        else:
            edges.append((u, v))
    from .exact import _adj_csr
    ptr, idx = _adj_csr(n, edges)
    tau = (np.asarray(graph.coloring, dtype=np.int64) if graph.coloring is not None
           else np.ones(n, dtype=np.int64))
    return ptr, idx, loops, tau


def initial_state(graph: MultiGraph, model: CanonicalModel, init: str, seed=0):
    n = graph.n
    if init == "all-minus":
        spin = -np.ones(n, dtype=np.int8)
    elif init in ("phase-plus", "phase-minus"):
        if graph.coloring is None:
            raise InvalidInput("phase initialisation needs a coloring")
        sign = 1 if init == "phase-plus" else -1
        spin = np.asarray([1 if c == sign else -1 for c in graph.coloring], dtype=np.int8)
    elif init == "random":
        rng = np.random.default_rng(seed)
        if model.kind == HARDCORE:
            spin = -np.ones(n, dtype=np.int8)
            adj = graph.adjacency()
            for v in rng.permutation(n):
                if rng.random() < 0.5 and all(spin[u] < 0 for u in adj[v]):
                    spin[v] = 1
        else:
            spin = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    else:
        raise InvalidInput(f"unknown init {init!r}")
    if model.kind == HARDCORE and not is_independent(graph, spin):
        raise InvalidInput(f"init {init!r} is not an independent set of this graph")
    return spin


def is_independent(graph: MultiGraph, spin) -> bool:
    return all(not (spin[u] > 0 and spin[v] > 0) for u, v in graph.edges)


def run_chain(graph: MultiGraph, model: CanonicalModel, cfg: ChainConfig, watch=(),
              keep_trace=False) -> ChainStats:
    from . import _kernels
    if model.kind not in (ISING, HARDCORE):
        raise InvalidInput("sampler needs an Ising or hard-core model")
    spin = initial_state(graph, model, cfg.init, cfg.seed)
    ptr, idx, loops, tau = _arrays(graph)
    watch_arr = np.asarray(list(watch), dtype=np.int64)
    kind = 1 if model.kind == HARDCORE else 0
    if cfg.record_states and graph.n > 62:
        raise InvalidInput("state recording limited to 62 vertices")
    mags, watched, codes = _kernels.gibbs_run(
        kind, spin, ptr, idx, loops, tau, float(model.beta), float(model.B),
        float(model.lam), int(cfg.steps), int(cfg.burn_in), watch_arr,
        bool(cfg.record_states), int(cfg.seed) % (2 ** 32))
    n = graph.n
    phase = np.where(mags >= 0, 1, -1)
    signed = phase * mags / n
    mean, se = batch_means(signed)
    marg = {}
    for i, v in enumerate(watch_arr.tolist()):
        marg[v] = batch_means(watched[:, i] > 0)
    flips = int(np.count_nonzero(np.diff(phase)))
    return ChainStats(mean, se, float(np.mean(phase > 0)), marg, len(mags), flips, cfg.seed,
                      mags if keep_trace else None, watched if keep_trace else None,
                      codes if cfg.record_states else None)


def state_frequencies(stats: ChainStats, n: int, nbatch=20):
    """Empirical law over state codes with batch-means standard errors."""
    codes = stats.states
    if codes is None:
        raise InvalidInput("chain was run without record_states")
    nstates = 1 << n
    nb = nbatch
    size = len(codes) // nb
    per = np.stack([np.bincount(codes[b * size:(b + 1) * size], minlength=nstates) / size
                    for b in range(nb)])
    return per.mean(axis=0), per.std(axis=0, ddof=1) / math.sqrt(nb)


@dataclass
class WEstimate:
    watch: tuple
    freq: np.ndarray            # (2, 2^|W|) empirical law per observed phase
    counts: np.ndarray          # samples per phase
    max_ratio: float
    min_ratio: float
    phase_balance: float
    radius: float
    phase_flips: int


def estimate_conditional_W(gadget: Gadget, model: CanonicalModel, cfg: ChainConfig,
                           fp=None, watch=None) -> WEstimate:
    """Empirical joint law of the W spins per phase from two phase-started
    chains, with the ratio to the product law Q and a 3-s.e. radius."""
    from .exact import product_log_law
    from .reduction import _group_watch, w_product_law
    from .tree import find_fixed_points
    fp = fp or find_fixed_points(model)
    if watch is None:
        watch = _group_watch(gadget, max(gadget.k // 3, 1)) if gadget.k % 3 == 0 else gadget.w
    watch = tuple(watch)
    npat = 1 << len(watch)
    weights = 1 << np.arange(len(watch))
    tallies = np.zeros((2, npat))
    flips = 0
    for j, init in enumerate(("phase-plus", "phase-minus")):
        c = ChainConfig(cfg.steps, cfg.burn_in, cfg.seed + j, init)
        st = run_chain(gadget.graph, model, c, watch, keep_trace=True)
        flips += st.phase_flips
        pats = ((st.watched > 0) * weights).sum(axis=1)
        ph = (st.trace < 0).astype(np.int64)
        for p in (0, 1):
            tallies[p] += np.bincount(pats[ph == p], minlength=npat)
    bal_chain = run_chain(gadget.graph, model,
                          ChainConfig(cfg.steps, cfg.burn_in, cfg.seed + 2, "random"))
    counts = tallies.sum(axis=1)
    freq = tallies / np.maximum(counts, 1)[:, None]
    lo, hi, radius = math.inf, -math.inf, 0.0
    for p, y in ((0, 1), (1, -1)):
        q = np.exp(product_log_law(w_product_law(gadget, model, watch, y, fp)))
        ok = q > 0
        r = freq[p][ok] / q[ok]
        lo, hi = min(lo, float(r.min())), max(hi, float(r.max()))
        se = np.sqrt(np.maximum(freq[p][ok] * (1 - freq[p][ok]), 1.0 / max(counts[p], 1))
                     / max(counts[p], 1)) / q[ok]
        radius = max(radius, 3.0 * float(se.max()))
    return WEstimate(watch, freq, counts, hi, lo, bal_chain.phase_fraction_plus, radius, flips)
