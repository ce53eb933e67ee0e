import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from bergman_lab import geometry as g
from bergman_lab import predictions as pr

PI = math.pi


def test_density_coeffs_round():
    fs = g.catalog("static-fs")
    j = fs.jet(0.1, g.FiberPoint(g.AFFINE, 0.4 - 0.2j))
    assert pr.density_coeffs(j) == (1.0, pytest.approx(1.0, rel=1e-12))


def test_density_coeffs_halve_at_doubled_area():
    z, zb, _, _ = g.weight_symbols()
    doubled = g.custom_scenario("double-round", sp.log(1 + z * zb) / sp.pi,
                                sp.log(1 + z * zb) / sp.pi)
    j = doubled.jet(0.0, g.FiberPoint(g.AFFINE, 0.3j))
    c0, c1 = pr.density_coeffs(j)
    assert c0 == 1.0
    assert_allclose(c1, 0.5, rtol=1e-12)


def test_density_coeffs_conformal_at_origin():
    cm = g.catalog("conformal-mix")
    j = cm.jet(0.0, g.FiberPoint(g.AFFINE, 0.7 + 0.2j))
    c0, c1 = pr.density_coeffs(j)
    assert (c0, pytest.approx(1.0, rel=1e-12)) == (1.0, c1)


def test_density_coeffs_reject_twist():
    with pytest.raises(ValueError, match="twist"):
        fs = g.catalog("static-fs")
        pr.density_coeffs(fs.jet(0.0, g.FiberPoint()), twist_delta=0.1)


def test_leading_examples():
    fs = g.catalog("static-fs")
    assert pr.curvature_leading(fs.jet(0.1, g.FiberPoint()), g.PRODUCT) == (0j, 0j)
    gs = g.catalog("gauss-scale", c=0.5)
    j = gs.jet(0.12 + 0.08j, g.FiberPoint(g.AFFINE, 0.5 - 0.1j))
    for choice in (g.PRODUCT, g.OMEGA_ORTHOGONAL):
        r1, r2 = pr.curvature_leading(j, choice)
        assert_allclose(r1, PI, rtol=1e-13)
        assert_allclose(r2, PI, rtol=1e-13)


def test_leading_routes_agree_on_random_jets():
    rng = np.random.default_rng(20260809)
    for _ in range(100):
        j = pr.random_admissible_jet(rng)
        for choice in (g.PRODUCT, g.OMEGA_ORTHOGONAL):
            a, b = pr.curvature_leading(j, choice)
            assert abs(a - b) <= 1e-12 * (1 + abs(b))
            assert abs(a.imag) <= 1e-12 * (1 + abs(a))


def test_gauge_invariance_under_base_pluriharmonic():
    cm = g.catalog("conformal-mix")
    j = cm.jet(0.15 + 0.05j, g.FiberPoint(g.AFFINE, 0.3 + 0.4j))
    before = (pr.density_coeffs(j),
              pr.curvature_leading(j, g.OMEGA_ORTHOGONAL),
              pr.curvature_subleading(j, g.OMEGA_ORTHOGONAL))
    # add Re h(s) with h(s) = (2+3i)s + (1-2i)s^2: touches pure-base slots only
    j.d[0, 0, 1, 0] += (2 + 3j) / 2
    j.d[0, 0, 0, 1] += (2 - 3j) / 2
    j.d[0, 0, 2, 0] += (1 - 2j)
    j.d[0, 0, 0, 2] += (1 + 2j)
    after = (pr.density_coeffs(j),
             pr.curvature_leading(j, g.OMEGA_ORTHOGONAL),
             pr.curvature_subleading(j, g.OMEGA_ORTHOGONAL))
    assert before == after


def test_subleading_examples():
    gs = g.catalog("gauss-scale", c=0.5)
    j = gs.jet(0.1 + 0.1j, g.FiberPoint(g.AFFINE, 0.2 - 0.6j))
    assert_allclose(pr.curvature_subleading(j, g.OMEGA_ORTHOGONAL), PI, rtol=1e-12)
    fs = g.catalog("static-fs")
    assert pr.curvature_subleading(fs.jet(0.1, g.FiberPoint()), g.OMEGA_ORTHOGONAL) == 0
    with pytest.raises(ValueError, match="omega-orthogonal"):
        pr.curvature_subleading(j, g.PRODUCT)


def test_subleading_twist_shift_is_the_bundle_term():
    delta = 0.1
    plain = g.catalog("conformal-mix")
    twisted = g.catalog("conformal-mix", twist_delta=delta)
    s0, x = 0.15 + 0.08j, g.FiberPoint(g.AFFINE, 0.4 + 0.1j)
    j = plain.jet(s0, x)
    base = pr.curvature_subleading(j, g.OMEGA_ORTHOGONAL)
    tw = twisted.twist_jet(x)
    shifted = pr.curvature_subleading(j, g.OMEGA_ORTHOGONAL, tw)
    expect = 2 * PI * tw[1, 1] * j[0, 0, 1, 1] / j[1, 1, 0, 0]
    assert_allclose(shifted - base, expect, rtol=1e-12)


def test_predictions_chart_invariant():
    cm = g.catalog("conformal-mix")
    s0, zc = 0.14 + 0.09j, 1.3 - 0.8j
    ja = cm.jet(s0, g.FiberPoint(g.AFFINE, zc))
    jw = cm.jet(s0, g.FiberPoint(g.INFINITY, 1 / zc))
    assert_allclose(pr.curvature_leading(ja, g.OMEGA_ORTHOGONAL)[1],
                    pr.curvature_leading(jw, g.OMEGA_ORTHOGONAL)[1], atol=1e-13)
    assert_allclose(pr.curvature_subleading(ja, g.OMEGA_ORTHOGONAL),
                    pr.curvature_subleading(jw, g.OMEGA_ORTHOGONAL), rtol=1e-12)
    assert_allclose(pr.density_coeffs(ja)[1], pr.density_coeffs(jw)[1], rtol=1e-12)


def test_subleading_laplacian_term_matches_finite_differences():
    cm = g.catalog("conformal-mix")
    s0, x, step = 0.12 + 0.09j, g.FiberPoint(g.AFFINE, 0.25 + 0.1j), 1e-4

    def pairing(z):
        j = cm.jet(s0, g.FiberPoint(g.AFFINE, z))
        return complex(-1j * g.omega_pair(j, g.OMEGA_ORTHOGONAL))

    lap = (pairing(x.z + step) + pairing(x.z - step) + pairing(x.z + 1j * step)
           + pairing(x.z - 1j * step) - 4 * pairing(x.z)) / step**2
    j = cm.jet(s0, x)
    fd = -0.5 * lap / j[1, 1, 0, 0]
    closed = g.laplace_fiber(
        pr._bider(j, 0, 0, 1, 1).dzzb
        - (pr._bider(j, 0, 1, 1, 0) * pr._bider(j, 1, 0, 0, 1)
           / pr._bider(j, 1, 1, 0, 0)).dzzb, j)
    assert_allclose(closed, fd, rtol=1e-6)


def test_coefficient_set():
    cm = g.catalog("conformal-mix")
    cs = pr.coefficient_set(cm, 0.2 + 0.1j, g.FiberPoint(g.AFFINE, 0j),
                            g.OMEGA_ORTHOGONAL)
    assert cs.density_c0 == 1.0
    assert abs(cs.curv_c0_ratio - cs.curv_c0_pair) < 1e-12
    assert cs.sub is not None
    cs_prod = pr.coefficient_set(cm, 0.2 + 0.1j, g.FiberPoint(g.AFFINE, 0j),
                                 g.PRODUCT)
    assert cs_prod.sub is None


def test_random_jet_is_admissible():
    rng = np.random.default_rng(3)
    j = pr.random_admissible_jet(rng)
    assert j[1, 1, 0, 0].real > 0
    assert abs(j[0, 0, 0, 0].imag) < 1e-15
    assert abs(j[2, 1, 1, 0] - np.conj(j[1, 2, 0, 1])) < 1e-15
