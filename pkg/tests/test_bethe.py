import math

import mpmath as mp
import numpy as np
import pytest

from spinlab.bethe import (bethe_at, bethe_free_energy, local_expectation,
                           local_expectation_pair, pair_constants, phi_generic)
from spinlab.errors import DomainError
from spinlab.tree import Message, find_fixed_points, lambda_c
from spinlab.twospin import HARDCORE, CanonicalModel, hardcore, ising

mp.mp.dps = 40

# Bethe prediction for hard-core at d=3, from high-precision closed forms
PHI_LAM1 = 0.435434282722675745
PHI_LAM5 = 0.916290731874155065


def _phi_oracle(lam, d):
    """Closed-form Bethe value in mpmath, independent of the solver."""
    lam = mp.mpf(lam)
    if lam <= mp.mpf(d - 1) ** (d - 1) / mp.mpf(d - 2) ** d:
        q = mp.findroot(lambda x: x * (1 + lam * x ** (d - 1)) - 1, 0.5)
        qp = qm = q
    else:
        def eqs(a, b):
            return [a * (1 + lam * b ** (d - 1)) - 1, b * (1 + lam * a ** (d - 1)) - 1]
        qp, qm = mp.findroot(eqs, (mp.mpf("0.99"), mp.mpf("0.01")))
    vx = (mp.log(lam * qp**d + 1) + mp.log(lam * qm**d + 1)) / 2
    e = mp.mpf(d) / 2 * mp.log(1 - (1 - qp) * (1 - qm))
    return float(vx - e)


def test_frozen_values_match_oracle():
    assert abs(_phi_oracle(1, 3) - PHI_LAM1) < 1e-15
    assert abs(_phi_oracle(5, 3) - PHI_LAM5) < 1e-15
    assert abs(PHI_LAM5 - (0.5 * math.log(3.2) - 1.5 * math.log(0.8))) < 1e-15


def test_hardcore_phi_values():
    r1 = bethe_free_energy(hardcore(1.0, 3))
    assert abs(r1.phi - PHI_LAM1) < 1e-10
    r5 = bethe_free_energy(hardcore(5.0, 3))
    assert abs(r5.phi - PHI_LAM5) < 1e-10
    assert r5.maximizer == "pm" and r5.phi > r5.phi_star


def test_phi_against_oracle_many():
    for lam in (0.3, 2.0, 3.9, 4.5, 9.0, 40.0):
        for d in (3, 4, 5):
            assert bethe_free_energy(hardcore(lam, d)).phi == pytest.approx(
                _phi_oracle(lam, d), abs=1e-9)


def test_generic_and_closed_form_paths_agree():
    for lam, d in ((1.0, 3), (5.0, 3), (2.5, 4)):
        m = hardcore(lam, d)
        fp = find_fixed_points(m)
        # the generic path needs the canonical weights: edge indicator, vertex lam
        vx, e = phi_generic(m, fp.plus, fp.minus)
        assert vx - e == pytest.approx(bethe_at(m, fp.plus, fp.minus), abs=1e-12)


def test_ising_free_spins():
    r = bethe_free_energy(ising(0.0, 0.0, 3))
    assert r.phi == pytest.approx(math.log(2), abs=1e-14)


def test_ising_phi_swapped_pair_equal(rng):
    count = 0
    while count < 100:
        d = int(rng.integers(3, 7))
        m = (hardcore(float(lambda_c(d) * rng.uniform(1.2, 20)), d) if rng.random() < 0.5
             else ising(float(-rng.uniform(0.8, 3)), float(rng.uniform(-0.5, 0.5)), d))
        fp = find_fixed_points(m)
        if fp.unique:
            continue
        count += 1
        a = bethe_at(m, fp.plus, fp.minus)
        b = bethe_at(m, fp.minus, fp.plus)
        assert abs(a - b) <= 1e-9
        assert a >= bethe_at(m, fp.star, fp.star) - 1e-12


def test_ferro_tie_flag():
    r = bethe_free_energy(ising(1.0, 0.0, 3))
    assert r.tie and r.maximizer == "plus"
    assert not bethe_free_energy(ising(1.0, 0.2, 3)).tie


def test_pair_constants():
    c = pair_constants(hardcore(5.0, 3))
    assert abs(c.gamma - 0.44) < 1e-12
    assert abs(c.theta - 0.64) < 1e-12
    assert c.ratio == pytest.approx(16 / 11, abs=1e-12)
    for m in (hardcore(1.0, 3), ising(-0.2, 0.1, 3), ising(0.0, 0.0, 3)):
        c = pair_constants(m)
        assert abs(c.theta - c.gamma) < 1e-12
    c = pair_constants(ising(1e-9, 0.0, 3))
    assert c.ratio == pytest.approx(1.0, abs=1e-12)


def test_theta_exceeds_gamma_in_non_uniqueness(rng):
    for _ in range(50):
        d = int(rng.integers(3, 6))
        m = hardcore(float(lambda_c(d) * rng.uniform(1.1, 10)), d)
        c = pair_constants(m)
        assert c.theta > c.gamma


def test_local_expectation_examples():
    m = hardcore(1.0, 3)
    q = float(mp.findroot(lambda x: x**3 + x - 1, 0.7))
    a = local_expectation(m, find_fixed_points(m).star)
    assert a.a_vx == pytest.approx(q**3 / (1 + q**3), abs=1e-12) and a.a_e == 0.0

    a = local_expectation(ising(0.0, 0.0, 3), Message.uniform())
    assert a.a_vx == 0.0 and a.a_e == 0.0

    m = ising(-1.0, 0.0, 3)
    h_plus, _ = find_fixed_points(m).phase_messages()
    assert local_expectation(m, h_plus).a_e < 0


def test_local_expectation_against_star_enumeration():
    from spinlab.bethe import star_measure
    m = ising(-0.7, 0.3, 3)
    h = Message.from_p(0.35)
    w = star_measure(m, [h] * 3)
    Z = sum(w.values())
    avx = sum(v * k[0] for k, v in w.items()) / Z
    ae = 0.5 * sum(v * sum(k[0] * t for t in k[1:]) for k, v in w.items()) / Z
    out = local_expectation(m, h)
    assert out.a_vx == pytest.approx(avx, abs=1e-14)
    assert out.a_e == pytest.approx(ae, abs=1e-14)


def _fd_check(model, step=1e-4):
    f = model.field
    up = bethe_free_energy(model.with_field(f + step)).phi
    dn = bethe_free_energy(model.with_field(f - step)).phi
    fd = (up - dn) / (2 * step)
    return fd, local_expectation_pair(model, find_fixed_points(model)).a_vx


@pytest.mark.parametrize("lam", np.linspace(0.2, 3.8, 20))
def test_derivative_identity_uniqueness(lam):
    fd, a = _fd_check(hardcore(lam, 3))
    assert abs(fd - a) < 1e-6


@pytest.mark.parametrize("lam", np.linspace(4.5, 40, 20))
def test_derivative_identity_non_uniqueness(lam):
    fd, a = _fd_check(hardcore(lam, 3))
    assert abs(fd - a) < 1e-6


def test_log_guard():
    m = CanonicalModel(HARDCORE, 3, lam=1.0)
    with pytest.raises(DomainError):
        bethe_at(m, Message.from_q(0.0), Message.from_q(0.0))
