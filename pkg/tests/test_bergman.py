import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bergman_lab import bergman as b
from bergman_lab import geometry as g
from bergman_lab import hilbert as h
from bergman_lab import quadrature as q


@pytest.fixture(scope="module")
def round_gram():
    fs = g.catalog("static-fs")
    return fs, h.gram(fs, 0.0, 8)


def test_round_density_is_constant(round_gram):
    fs, G = round_gram
    for x in (g.FiberPoint(g.AFFINE, 0j), g.FiberPoint(g.AFFINE, 1.2 - 0.7j),
              g.FiberPoint(g.INFINITY, 0j), g.FiberPoint(g.INFINITY, 0.4j)):
        assert_allclose(b.bergman_diag(G, fs, x).value, 9.0, rtol=1e-12)


def test_degree_one_density_by_hand():
    fs = g.catalog("static-fs")
    G = h.gram(fs, 0.0, 1)
    val = b.bergman_diag(G, fs, g.FiberPoint(g.AFFINE, 0j)).value
    assert_allclose(val, 2.0, rtol=1e-13)


def test_scaled_base_density_unchanged():
    gs = g.catalog("gauss-scale")
    G = h.gram(gs, 0.15 + 0.1j, 16)
    for x in (g.FiberPoint(g.AFFINE, 0.5 - 0.2j), g.FiberPoint(g.INFINITY, 0.3)):
        assert_allclose(b.bergman_diag(G, gs, x).value, 17.0, rtol=1e-11)


def test_density_positive_at_nodes():
    cm = g.catalog("conformal-mix")
    G = h.gram(cm, 0.2 + 0.1j, 24)
    rule = q.build_rule(48)
    vals = b.density_profile(G, cm, rule.points)
    assert np.min(vals) > 0


def test_trace_identity_independent_rule():
    for sid in g.scenario_list():
        scn = g.catalog(sid)
        G = h.gram(scn, 0.0, 16)
        rule = q.build_rule(64)
        tr, _ = b.density_integral(G, scn, rule)
        assert abs(tr - 17.0) < 1e-8


def test_operator_diag_identities():
    cm = g.catalog("conformal-mix")
    G = h.gram(cm, 0.1 + 0.05j, 10)
    x = g.FiberPoint(g.AFFINE, 0.4 + 0.1j)
    dens = b.bergman_diag(G, cm, x).value
    assert_allclose(b.operator_diag(np.eye(11), G, cm, x).value, dens, rtol=1e-12)
    assert_allclose(b.operator_diag(3.5 * np.eye(11), G, cm, x).value, 3.5 * dens,
                    rtol=1e-12)


def test_operator_diag_scaled_base_curvature():
    p, c = 12, 0.5
    gs = g.catalog("gauss-scale", c=c)
    G = h.gram(gs, 0.1 + 0.05j, p)
    theta = 2 * math.pi * p * c * np.eye(p + 1)
    val = b.operator_diag(theta, G, gs, g.FiberPoint(g.AFFINE, 0.3j)).value
    assert_allclose(val, 2 * math.pi * p * c * (p + 1), rtol=1e-11)


def test_operator_trace_equals_matrix_trace():
    cm = g.catalog("conformal-mix")
    G = h.gram(cm, 0.1 + 0.05j, 9)
    rng = np.random.default_rng(11)
    A = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    tr = b.operator_trace(A, G, cm, q.build_rule(48))
    assert_allclose(tr, np.trace(A), rtol=1e-11)


def test_operator_diag_shape_mismatch():
    cm = g.catalog("conformal-mix")
    G = h.gram(cm, 0.0, 5)
    with pytest.raises(ValueError, match="6 x 6"):
        b.operator_diag(np.eye(4), G, cm, g.FiberPoint(g.AFFINE, 0j))


def test_twisted_density_trace():
    tw = g.catalog("conformal-mix", twist_delta=0.1)
    G = h.gram(tw, 0.0, 12)
    tr, _ = b.density_integral(G, tw, q.build_rule(64))
    assert abs(tr - 13.0) < 1e-8
