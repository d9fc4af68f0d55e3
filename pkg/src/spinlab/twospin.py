"""Two-spin specifications and their canonical forms.

A specification is a symmetric edge table psi over {-1,+1}^2 and a positive
vertex table psi_bar. On d-regular graphs the vertex weights can be pushed
onto the edges, after which every specification is an Ising model, a
hard-core model, or one of two degenerate cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import InvalidInput

ZERO_TOL = 1e-12

ISING = "Ising"
HARDCORE = "HardCore"
DEG_AGREE = "DegenerateAgree"
DEG_DISAGREE = "DegenerateDisagree"


@dataclass(frozen=True)
class TwoSpinSpec:
    pp: float   # psi(+,+)
    pm: float   # psi(+,-) = psi(-,+)
    mm: float   # psi(-,-)
    bar_p: float = 1.0
    bar_m: float = 1.0

    def __post_init__(self):
        for name in ("pp", "pm", "mm", "bar_p", "bar_m"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise InvalidInput(f"{name} must be finite, got {val}")
        if min(self.pp, self.pm, self.mm) < 0:
            raise InvalidInput("psi entries must be non-negative")
        if self.bar_p <= 0 or self.bar_m <= 0:
            raise InvalidInput("psi_bar entries must be strictly positive")
        if max(self.pp, self.pm, self.mm) <= ZERO_TOL:
            raise InvalidInput("psi is identically zero")

    def psi(self, s, t):
        if s == 1 and t == 1:
            return self.pp
        if s == -1 and t == -1:
            return self.mm
        return self.pm

    def psi_bar(self, s):
        return self.bar_p if s == 1 else self.bar_m

    def flipped(self):
        return TwoSpinSpec(self.mm, self.pm, self.pp, self.bar_m, self.bar_p)

    @classmethod
    def ising(cls, beta, B):
        return cls(math.exp(beta), math.exp(-beta), math.exp(beta), math.exp(B), math.exp(-B))

    @classmethod
    def hardcore(cls, lam):
        return cls(0.0, 1.0, 1.0, float(lam), 1.0)

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            psi, bar = obj["psi"], obj.get("psi_bar", {"+": 1.0, "-": 1.0})
            pm = psi.get("+-", psi.get("-+"))
            return cls(float(psi["++"]), float(pm), float(psi["--"]),
                       float(bar["+"]), float(bar["-"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed spec literal: {exc}") from exc

    def to_json(self):
        return {"psi": {"++": self.pp, "+-": self.pm, "--": self.mm},
                "psi_bar": {"+": self.bar_p, "-": self.bar_m}}


@dataclass(frozen=True)
class CanonicalModel:
    kind: str
    d: int
    beta: float = 0.0
    B: float = 0.0
    lam: float = 0.0
    B0: float = 0.0
    relabeled: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in (ISING, HARDCORE, DEG_AGREE, DEG_DISAGREE):
            raise InvalidInput(f"unknown model kind {self.kind!r}")
        if self.kind == HARDCORE and not self.lam > 0:
            raise InvalidInput("hard-core fugacity must be positive")
        if self.d < 1:
            raise InvalidInput("degree must be positive")

    @property
    def is_hardcore(self):
        return self.kind == HARDCORE

    @property
    def is_ising(self):
        return self.kind == ISING

    @property
    def degenerate(self):
        return self.kind in (DEG_AGREE, DEG_DISAGREE)

    @property
    def antiferro(self):
        return self.kind == HARDCORE or (self.kind == ISING and self.beta < 0)

    @property
    def field(self):
        """The vertex field: B for Ising, log(lambda) for hard-core."""
        return math.log(self.lam) if self.kind == HARDCORE else self.B

    def edge_weight(self, s, t):
        """psi of the raw model form: e^{beta s t} or the hard-core indicator."""
        if self.kind == HARDCORE:
            return 0.0 if (s == 1 and t == 1) else 1.0
        if self.kind == ISING:
            return math.exp(self.beta * s * t)
        raise InvalidInput("degenerate models have no raw edge form")

    def vertex_weight(self, s):
        if self.kind == HARDCORE:
            return self.lam if s == 1 else 1.0
        if self.kind == ISING:
            return math.exp(self.B * s)
        raise InvalidInput("degenerate models have no raw vertex form")

    def with_field(self, value):
        """Copy with the field replaced (B for Ising, log lambda for hard-core)."""
        if self.kind == HARDCORE:
            return CanonicalModel(HARDCORE, self.d, lam=math.exp(value), B0=self.B0)
        return CanonicalModel(self.kind, self.d, beta=self.beta, B=value, B0=self.B0)

    def with_beta(self, beta):
        return CanonicalModel(self.kind, self.d, beta=beta, B=self.B, B0=self.B0)

    def raw_spec(self):
        if self.kind == HARDCORE:
            return TwoSpinSpec.hardcore(self.lam)
        if self.kind == ISING:
            return TwoSpinSpec.ising(self.beta, self.B)
        raise InvalidInput("degenerate models have no raw form")

    def describe(self):
        out = {"kind": self.kind, "d": self.d, "B0": self.B0}
        if self.kind == ISING:
            out.update(beta=self.beta, B=self.B)
        elif self.kind == HARDCORE:
            out.update(lam=self.lam)
        elif self.kind == DEG_AGREE:
            out.update(B=self.B)
        if self.relabeled:
            out["relabeled"] = True
        return out


def hardcore(lam, d) -> CanonicalModel:
    return CanonicalModel(HARDCORE, d, lam=float(lam))


def ising(beta, B, d) -> CanonicalModel:
    return CanonicalModel(ISING, d, beta=float(beta), B=float(B))


def parse_model(text: str, d: int) -> CanonicalModel:
    """'hardcore:LAM' or 'ising:BETA,B' (B optional)."""
    try:
        name, _, args = text.partition(":")
        name = name.strip().lower()
        if name in ("hardcore", "hc"):
            return hardcore(float(args), d)
        if name == "ising":
            parts = [float(x) for x in args.split(",") if x.strip()]
            beta = parts[0]
            B = parts[1] if len(parts) > 1 else 0.0
            return ising(beta, B, d)
    except (ValueError, IndexError) as exc:
        raise InvalidInput(f"cannot parse model {text!r}") from exc
    raise InvalidInput(f"unknown model {text!r}; use hardcore:LAM or ising:BETA,B")


def absorb_vertex_weights(spec: TwoSpinSpec, d: int) -> TwoSpinSpec:
    """psi'(s,t) = psi(s,t) psi_bar(s)^{1/d} psi_bar(t)^{1/d}, psi_bar' = 1."""
    if d < 1:
        raise InvalidInput("d must be positive")
    bp = spec.bar_p ** (1.0 / d)
    bm = spec.bar_m ** (1.0 / d)
    return TwoSpinSpec(spec.pp * bp * bp, spec.pm * bp * bm, spec.mm * bm * bm)


def _zero(x):
    return x <= ZERO_TOL


def classify(spec: TwoSpinSpec, d: int) -> CanonicalModel:
    if abs(spec.bar_p - 1.0) > 1e-12 or abs(spec.bar_m - 1.0) > 1e-12:
        raise InvalidInput("classify expects psi_bar == 1; call absorb_vertex_weights first")
    pp, pm, mm = spec.pp, spec.pm, spec.mm
    if not _zero(pp) and not _zero(pm) and not _zero(mm):
        lpp, lpm, lmm = math.log(pp), math.log(pm), math.log(mm)
        return CanonicalModel(ISING, d, beta=(lpp + lmm - 2 * lpm) / 4,
                              B=d * (lpp - lmm) / 4, B0=(lpp + 2 * lpm + lmm) / 4)
    if not _zero(pm):
        if _zero(pp) and _zero(mm):
            return CanonicalModel(DEG_DISAGREE, d, B0=math.log(pm))
        relabeled = False
        if _zero(mm):
            # + is the unconstrained spin: swap labels so - is unconstrained
            pp, mm = mm, pp
            relabeled = True
        return CanonicalModel(HARDCORE, d, lam=(pm / mm) ** d, B0=math.log(mm),
                              relabeled=relabeled)
    if _zero(pp) or _zero(mm):
        raise InvalidInput("frozen specification: only one spin value has positive weight")
    lpp, lmm = math.log(pp), math.log(mm)
    return CanonicalModel(DEG_AGREE, d, B=d * (lpp - lmm) / 4, B0=(lpp + lmm) / 2)


def canonicalize(spec: TwoSpinSpec, d: int) -> CanonicalModel:
    return classify(absorb_vertex_weights(spec, d), d)


def degenerate_free_energy(model: CanonicalModel, graph) -> float:
    """(1/n) log Z for a degenerate model on a finite graph, exactly.

    For DegenerateAgree each component is frozen to a common spin, giving
    e^{B0 |E_C|} 2 cosh(2B|E_C|/d); on d-regular graphs this is the familiar
    B0|E|/n + B + (1/n) sum_C log(1 + e^{-2B|C|}). DegenerateDisagree returns
    -inf on non-bipartite graphs.
    """
    if not model.degenerate:
        raise InvalidInput("degenerate_free_energy needs a degenerate model")
    n = graph.n
    if model.kind == DEG_DISAGREE:
        if not graph.is_bipartite():
            return -math.inf
        return (model.B0 * graph.m + math.log(2) * len(graph.components())) / n
    comp_edges = {}
    label = {}
    for ci, comp in enumerate(graph.components()):
        comp_edges[ci] = 0
        for v in comp:
            label[v] = ci
    for u, _ in graph.edges:
        comp_edges[label[u]] += 1
    total = 0.0
    for e in comp_edges.values():
        x = 2 * model.B * e / model.d
        # log(2 cosh x), stable for large |x|
        total += model.B0 * e + abs(x) + math.log1p(math.exp(-2 * abs(x)))
    return total / n
