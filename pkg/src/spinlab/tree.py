"""BP recursion on the d-regular tree: fixed points of F and F∘F,
uniqueness thresholds and root marginals of the extremal measures.

Hard-core messages are handled in the coordinate q = h(-) (probability the
sender is unoccupied), where F(q) = 1/(1 + lam q^{d-1}). Ising messages use
the log-odds t = log h(+)/h(-), where
F(t) = 2B + (d-1) log[(e^t + theta)/(theta e^t + 1)] with theta = e^{-2 beta}.

Naming of the extreme fixed points: ``plus`` is the message a vertex receives
from each neighbor under mu^+ (the phase favoring + at that vertex) and
``minus`` the one it receives under mu^-. In the anti-ferromagnetic case
F(plus) = minus, and the message a vertex *sends* in its own favored phase
is F(plus) = minus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .twospin import CanonicalModel, HARDCORE, ISING

T_CLAMP = 700.0
UNIQUE_TOL = 1e-12
NEAR_CRITICAL_TOL = 1e-8


def _expit(t):
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _logaddexp(a, b):
    return float(np.logaddexp(a, b))


@dataclass(frozen=True)
class Message:
    """A distribution on {-1,+1}, stored as P(+1) together with its log-odds."""
    p_plus: float
    t: float

    def __post_init__(self):
        if not (0.0 <= self.p_plus <= 1.0):
            raise InvalidInput(f"p_plus = {self.p_plus} outside [0, 1]")

    @property
    def q(self):
        return 1.0 - self.p_plus

    def prob(self, s):
        return self.p_plus if s == 1 else 1.0 - self.p_plus

    @classmethod
    def from_p(cls, p):
        if p <= 0.0:
            return cls(0.0, -math.inf)
        if p >= 1.0:
            return cls(1.0, math.inf)
        return cls(float(p), math.log(p) - math.log1p(-p))

    @classmethod
    def from_q(cls, q):
        return cls.from_p(1.0 - q)

    @classmethod
    def from_t(cls, t):
        t = max(-T_CLAMP, min(T_CLAMP, float(t)))
        return cls(_expit(t), t)

    @classmethod
    def uniform(cls):
        return cls(0.5, 0.0)


@dataclass(frozen=True)
class FixedPoints:
    model: CanonicalModel
    star: Message
    plus: Message
    minus: Message
    unique: bool
    gprime_at_star: float
    near_critical: bool = False

    def phase_messages(self):
        """(h^+, h^-): the messages sent by a vertex in its own favored phase
        and in the opposite phase. These are the cavity laws of a vertex that
        has lost one edge."""
        if self.model.antiferro:
            return self.minus, self.plus
        return self.plus, self.minus


@dataclass(frozen=True)
class RootMarginals:
    mu_plus_occ: float
    mu_minus_occ: float

    @property
    def magnetization_gap(self):
        return self.mu_plus_occ - self.mu_minus_occ


# scalar maps ---------------------------------------------------------------

def _require_nondegenerate(model):
    if model.kind not in (HARDCORE, ISING):
        raise InvalidInput(f"BP recursion needs Ising or hard-core, got {model.kind}")


def hc_F(q, lam, d):
    return 1.0 / (1.0 + lam * q ** (d - 1))


def hc_dF(q, lam, d):
    f = hc_F(q, lam, d)
    return -(d - 1) * lam * q ** (d - 2) * f * f


def _ising_L(t, beta):
    # log[(e^t + theta)/(theta e^t + 1)], theta = e^{-2 beta}
    lt = -2.0 * beta
    return _logaddexp(t, lt) - _logaddexp(t + lt, 0.0)


def ising_F(t, beta, B, d):
    return 2.0 * B + (d - 1) * _ising_L(t, beta)


def ising_dF(t, beta, d):
    lt = -2.0 * beta
    return (d - 1) * (_expit(t - lt) - _expit(t + lt))


def bp_step(model: CanonicalModel, incoming) -> Message:
    """Combine d-1 incoming messages into the outgoing message."""
    _require_nondegenerate(model)
    incoming = list(incoming)
    if len(incoming) != model.d - 1:
        raise InvalidInput(f"need {model.d - 1} incoming messages, got {len(incoming)}")
    if model.kind == HARDCORE:
        prod = 1.0
        for h in incoming:
            prod *= h.q
        return Message.from_q(1.0 / (1.0 + model.lam * prod))
    t = 2.0 * model.B
    for h in incoming:
        # L(t) -> +-2 beta as t -> +-inf
        t += (2.0 * model.beta if h.t > 0 else -2.0 * model.beta) if math.isinf(h.t) \
            else _ising_L(h.t, model.beta)
    return Message.from_t(t)


def F(model, h: Message) -> Message:
    """F(h) = bp_step with all d-1 incoming messages equal to h."""
    if model.kind == HARDCORE:
        return Message.from_q(hc_F(h.q, model.lam, model.d))
    return Message.from_t(ising_F(h.t, model.beta, model.B, model.d))


# root finding ----------------------------------------------------------------

def _bisect_newton(f, a, b, fprime=None, xtol=1e-15):
    """Root of f on [a, b] given a sign change; bisection then Newton polish."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise ValueError("no sign change on bracket")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
        if abs(b - a) <= xtol * max(1.0, abs(a)):
            break
    x = 0.5 * (a + b)
    if fprime is not None:
        for _ in range(5):
            d = fprime(x)
            if d == 0.0:
                break
            nx = x - f(x) / d
            if not (min(a, b) <= nx <= max(a, b)) or abs(f(nx)) > abs(f(x)):
                break
            if nx == x:
                break
            x = nx
    return x


def _upper_root(g, x0, hi):
    """Largest root of g on (x0, hi] where g(x0) = 0, g'(x0) > 0, g(hi) < 0."""
    width = hi - x0
    step = 1e-3 * width
    while step > 1e-15 * max(1.0, abs(x0)) and g(x0 + step) <= 0.0:
        step *= 0.5
    lo = x0 + step
    if g(lo) <= 0.0:
        return x0
    return _bisect_newton(g, lo, hi)


def _hc_fixed_points(model):
    lam, d = model.lam, model.d
    qs = _bisect_newton(lambda q: hc_F(q, lam, d) - q, 0.0, 1.0,
                        lambda q: hc_dF(q, lam, d) - 1.0)
    gp = hc_dF(qs, lam, d) ** 2
    star = Message.from_q(qs)
    if gp <= 1.0:
        return FixedPoints(model, star, star, star, True, gp, abs(gp - 1) <= NEAR_CRITICAL_TOL)
    G = lambda q: hc_F(hc_F(q, lam, d), lam, d) - q
    q_hi = _upper_root(G, qs, 1.0)
    q_lo = hc_F(q_hi, lam, d)
    plus, minus = Message.from_q(q_hi), Message.from_q(q_lo)
    unique = abs(plus.p_plus - minus.p_plus) <= UNIQUE_TOL
    return FixedPoints(model, star, plus, minus, unique, gp, abs(gp - 1) <= NEAR_CRITICAL_TOL)


def _ising_af_fixed_points(model):
    beta, B, d = model.beta, model.B, model.d
    span = (d - 1) * 2.0 * abs(beta) + 1.0
    lo, hi = 2 * B - span, 2 * B + span
    lo, hi = max(lo, -T_CLAMP), min(hi, T_CLAMP)
    ts = _bisect_newton(lambda t: ising_F(t, beta, B, d) - t, lo, hi,
                        lambda t: ising_dF(t, beta, d) - 1.0)
    gp = ising_dF(ts, beta, d) ** 2
    star = Message.from_t(ts)
    if gp <= 1.0:
        return FixedPoints(model, star, star, star, True, gp, abs(gp - 1) <= NEAR_CRITICAL_TOL)
    G = lambda t: ising_F(ising_F(t, beta, B, d), beta, B, d) - t
    t_hi = _upper_root(G, ts, hi)
    t_lo = ising_F(t_hi, beta, B, d)
    plus, minus = Message.from_t(t_lo), Message.from_t(t_hi)
    unique = abs(plus.p_plus - minus.p_plus) <= UNIQUE_TOL
    return FixedPoints(model, star, plus, minus, unique, gp, abs(gp - 1) <= NEAR_CRITICAL_TOL)


def _ferro_critical_t(beta, d):
    """t_c > 0 with F'(t_c) = 1 (F' is even and unimodal); None if F'(0) <= 1."""
    if ising_dF(0.0, beta, d) <= 1.0:
        return None
    hi = 1.0
    while ising_dF(hi, beta, d) > 1.0:
        hi *= 2.0
    return _bisect_newton(lambda t: ising_dF(t, beta, d) - 1.0, 0.0, hi)


def _ising_ferro_fixed_points(model):
    beta, B, d = model.beta, model.B, model.d
    f = lambda t: ising_F(t, beta, B, d) - t
    fp_ = lambda t: ising_dF(t, beta, d) - 1.0
    span = (d - 1) * 2.0 * abs(beta) + 1.0
    lo, hi = 2 * B - span, 2 * B + span
    tc = _ferro_critical_t(beta, d)
    roots = []
    if tc is None:
        roots.append(_bisect_newton(f, lo, hi, fp_))
    else:
        a, b = -tc, tc
        fa, fb = f(a), f(b)
        if fa <= 0.0:
            roots.append(_bisect_newton(f, min(lo, a - 1.0), a, fp_))
        if fa < 0.0 < fb:
            roots.append(_bisect_newton(f, a, b, fp_))
        if fb >= 0.0:
            roots.append(_bisect_newton(f, b, max(hi, b + 1.0), fp_))
        roots = sorted(set(roots))
    roots = sorted(roots)
    plus, minus = Message.from_t(roots[-1]), Message.from_t(roots[0])
    star = Message.from_t(roots[len(roots) // 2])
    gp = ising_dF(star.t, beta, d) ** 2
    unique = abs(plus.p_plus - minus.p_plus) <= UNIQUE_TOL
    return FixedPoints(model, star, plus, minus, unique, gp, abs(gp - 1) <= NEAR_CRITICAL_TOL)


def find_fixed_points(model: CanonicalModel) -> FixedPoints:
    _require_nondegenerate(model)
    if model.d < 2:
        raise InvalidInput("tree degree must be at least 2")
    if model.kind == HARDCORE:
        return _hc_fixed_points(model)
    if model.beta < 0:
        return _ising_af_fixed_points(model)
    return _ising_ferro_fixed_points(model)


# thresholds ------------------------------------------------------------------

def lambda_c(d: int) -> float:
    if d < 3:
        raise InvalidInput("lambda_c needs d >= 3")
    return (d - 1) ** (d - 1) / (d - 2) ** d


def _af_excess(beta, B, d):
    span = (d - 1) * 2.0 * abs(beta) + 1.0
    ts = _bisect_newton(lambda t: ising_F(t, beta, B, d) - t, 2 * B - span, 2 * B + span)
    return abs(ising_dF(ts, beta, d)) - 1.0


def beta_c_af(B: float, d: int) -> float:
    """The beta < 0 at which (F∘F)' at the F-fixed point reaches 1."""
    if d < 3:
        raise InvalidInput("beta_c_af needs d >= 3")
    hi = 0.0
    lo = -1.0
    while _af_excess(lo, B, d) < 0.0:
        hi = lo
        lo *= 2.0
        if lo < -1e6:
            raise InvalidInput(f"no anti-ferromagnetic threshold found for B={B}")
    return _bisect_newton(lambda b: _af_excess(b, B, d), lo, hi, xtol=1e-16)


def B_c_ferro(beta: float, d: int):
    """Field above which the ferromagnetic fixed points t^- and t° merge
    (None when F has a single fixed point for every B)."""
    if beta < 0:
        raise InvalidInput("B_c_ferro needs beta >= 0")
    tc = _ferro_critical_t(beta, d)
    if tc is None:
        return None
    g = ising_F(tc, beta, 0.0, d)
    return 0.5 * (g - tc)


def count_fixed_points(model, grid=20001):
    """Sign changes of F(t) - t on a fine grid; an independent check used by
    the tests for the ferromagnetic thresholds."""
    beta, B, d = model.beta, model.B, model.d
    span = (d - 1) * 2.0 * abs(beta) + 1.0
    ts = np.linspace(2 * B - span, 2 * B + span, grid)
    vals = np.array([ising_F(t, beta, B, d) - t for t in ts])
    s = np.sign(vals)
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


# root marginals --------------------------------------------------------------

def root_probability(model: CanonicalModel, incoming) -> float:
    """P(root = +1) when the root receives the given d messages."""
    if model.kind == HARDCORE:
        prod = 1.0
        for h in incoming:
            prod *= h.q
        w = model.lam * prod
        return w / (1.0 + w)
    t = 2.0 * model.B
    for h in incoming:
        t += _ising_L(h.t, model.beta)
    return _expit(t)


def root_marginals(fp: FixedPoints) -> RootMarginals:
    d = fp.model.d
    return RootMarginals(root_probability(fp.model, [fp.plus] * d),
                         root_probability(fp.model, [fp.minus] * d))


def configure(tol=None):
    """Set the tolerance used to decide whether the extreme fixed points
    coincide."""
    global UNIQUE_TOL
    if tol is not None:
        if not tol > 0:
            raise InvalidInput("tolerance must be positive")
        UNIQUE_TOL = float(tol)
