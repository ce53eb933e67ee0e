import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bergman_lab import quadrature as q


def fs_density(z):
    return (1 / math.pi) / (1 + np.abs(z)**2)**2


def test_round_area_is_one():
    rule = q.build_rule(24)
    val, err = q.integrate(fs_density, rule)
    assert abs(val - 1.0) < 1e-12
    assert err < 1e-12
    assert np.all(rule.weights > 0)


def test_odd_moment_vanishes():
    rule = q.build_rule(24)
    val, _ = q.integrate(lambda z: z * fs_density(z), rule)
    assert abs(val) < 1e-13


@pytest.mark.parametrize("k,p", [(0, 8), (5, 24), (17, 64), (60, 64)])
def test_beta_moments_exact(k, p):
    exact = math.factorial(k) * math.factorial(p - k) / math.factorial(p + 1)

    def f(z):
        r2 = np.abs(z)**2
        return r2**k * (1 + r2)**(-p) * fs_density(z)

    v32, _ = q.integrate(f, q.build_rule(32)) if p <= 62 else (None, None)
    v64, _ = q.integrate(f, q.build_rule(64))
    assert_allclose(v64.real, exact, rtol=1e-10)
    if v32 is not None:
        assert_allclose(v32.real, v64.real, rtol=1e-10)


def test_resolution_doubling_gains_an_order():
    # smooth non-polynomial integrand: error drops by >= 10x per doubling
    def f(z):
        u = 1 / (1 + np.abs(z)**2)
        return np.exp(2.0 * np.cos(3 * u)) * fs_density(z)

    ref, _ = q.integrate(f, q.build_rule(96))
    errs = []
    for m in (8, 16, 32):
        val, _ = q.integrate(f, q.build_rule(m))
        errs.append(abs(val - ref))
    for coarse, fine in zip(errs, errs[1:]):
        assert fine < 1e-12 or fine * 10 <= coarse


def test_error_estimate_tracks_true_error():
    def f(z):
        u = 1 / (1 + np.abs(z)**2)
        return np.exp(np.sin(4 * u)) * fs_density(z)

    ref, _ = q.integrate(f, q.build_rule(96))
    val, est = q.integrate(f, q.build_rule(16))
    assert abs(val - ref) <= 10 * max(est, 1e-14)


def test_build_rule_validation():
    with pytest.raises(ValueError):
        q.build_rule(6)
    with pytest.raises(ValueError):
        q.build_rule(15)


def test_default_resolution():
    assert q.default_resolution(4) == 48
    assert q.default_resolution(64) == 128


def test_non_finite_sample_names_node():
    rule = q.build_rule(8)

    def f(z):
        vals = fs_density(z).astype(complex)
        vals[3] = np.nan
        return vals

    with pytest.raises(ValueError, match="z ="):
        q.integrate(f, rule)


def test_nodes_are_fiber_points():
    rule = q.build_rule(8)
    pts = rule.nodes
    assert len(pts) == 8 * 16
    total = sum(w * fs_density(x.z) for x, w in pts)
    assert_allclose(total, 1.0, atol=1e-12)
