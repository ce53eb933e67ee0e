import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from bergman_lab import geometry as g
from bergman_lab import hilbert as h
from bergman_lab import quadrature as q


def test_dimension_check():
    assert h.dimension_check(0) == 1
    assert h.dimension_check(1) == 2
    assert h.dimension_check(10) == 11
    with pytest.raises(ValueError):
        h.dimension_check(-1)


def test_round_gram_is_beta_diagonal():
    fs = g.catalog("static-fs")
    p = 8
    G = h.gram(fs, 0.3j * 0, p, normalize=False)
    exact = h.round_gram_diagonal(p)
    assert_allclose(np.diag(G.H).real, exact, rtol=1e-13)
    off = G.H - np.diag(np.diag(G.H))
    assert np.max(np.abs(off)) < 1e-16


def test_normalized_round_gram_is_identity():
    fs = g.catalog("static-fs")
    for p in (1, 16, 64):
        G = h.gram(fs, 0.05 + 0.02j, p, want_derivs=True)
        assert np.max(np.abs(G.H - np.eye(p + 1))) < 1e-12
        assert np.max(np.abs(G.H_s)) < 1e-15
        assert np.max(np.abs(G.H_ssb)) < 1e-15
        assert G.cond < 1.001


def test_scaled_base_gram_factorizes():
    c, p, s = 0.5, 12, 0.11 + 0.07j
    gs = g.catalog("gauss-scale", c=c)
    G = h.gram(gs, s, p)
    fac = math.exp(-2 * math.pi * p * c * abs(s)**2)
    assert_allclose(G.H, fac * np.eye(p + 1), atol=1e-14)
    assert_allclose(G.H_s, -2 * math.pi * p * c * np.conj(s) * G.H, atol=1e-13)


def test_adjoint_relations():
    cm = g.catalog("conformal-mix")
    G = h.gram(cm, 0.13 + 0.06j, 10)
    assert np.max(np.abs(G.H - G.H.conj().T)) == 0
    assert np.max(np.abs(G.H_sb - G.H_s.conj().T)) == 0
    assert np.max(np.abs(G.H_ssb - G.H_ssb.conj().T)) == 0
    eig = np.linalg.eigvalsh(G.H)
    assert eig[0] > 0


def test_gram_derivatives_match_finite_differences():
    cm = g.catalog("conformal-mix")
    p, s0, step = 10, 0.12 + 0.06j, 1e-4
    G = h.gram(cm, s0, p)
    Hp = h.gram(cm, s0 + step, p, want_derivs=False).H
    Hm = h.gram(cm, s0 - step, p, want_derivs=False).H
    Hpi = h.gram(cm, s0 + 1j * step, p, want_derivs=False).H
    Hmi = h.gram(cm, s0 - 1j * step, p, want_derivs=False).H
    H_s_fd = 0.5 * ((Hp - Hm) - 1j * (Hpi - Hmi)) / (2 * step)
    scale = np.max(np.abs(G.H_s))
    assert np.max(np.abs(G.H_s - H_s_fd)) / scale < 1e-6
    H_ssb_fd = (Hp + Hm + Hpi + Hmi - 4 * G.H) / (4 * step**2)
    assert np.max(np.abs(G.H_ssb - H_ssb_fd)) / np.max(np.abs(G.H_ssb)) < 1e-6


def test_gram_err_est_flags_underresolution():
    cm = g.catalog("conformal-mix")
    good = h.gram(cm, 0.1 + 0.05j, 32, want_derivs=False)
    assert good.err_est < 1e-12
    bad = h.gram(cm, 0.1 + 0.05j, 32, rule=q.build_rule(8), want_derivs=False)
    assert bad.err_est > 1e-3


def test_conditioning_gate():
    z, zb, s, sb = g.weight_symbols()
    # strong angular weight modulation: nearly-degenerate section pairs
    expr = sp.log(1 + z * zb) / (2 * sp.pi) + sp.Rational(1, 10) * (
        z / (1 + z * zb) + zb / (1 + z * zb))
    scn = g.custom_scenario("angular-heavy", expr, expr.subs({z: zb, zb: z}))
    with pytest.raises(h.ConditioningError):
        h.gram(scn, 0.0, 64, want_derivs=False)


def test_solve_identity_and_diagonal():
    fs = g.catalog("static-fs")
    G = h.gram(fs, 0.0, 6, normalize=False)
    X = h.solve(G, G.H)
    assert np.max(np.abs(X - np.eye(7))) < 1e-12
    rhs = np.arange(1.0, 8.0)
    assert_allclose(h.solve(G, rhs), rhs / np.diag(G.H).real, rtol=1e-12)


def test_solve_known_inverse():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
    spec = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
    H = (Q * spec) @ Q.conj().T
    Hinv = (Q / spec) @ Q.conj().T
    rhs = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    assert_allclose(h.solve(H, rhs), Hinv @ rhs, rtol=1e-12, atol=1e-13)


def test_basis_values_in_both_charts():
    bas = h.basis(4)
    za = g.FiberPoint(g.AFFINE, 2.0 + 0j)
    zw = za.other()
    va = bas.values(za)
    vw = bas.values(zw)
    # sections transform by z^p between the charts
    assert_allclose(va / (2.0**4), vw, rtol=1e-13)
    with pytest.raises(ValueError):
        h.basis(0)
    with pytest.raises(ValueError):
        h.basis(257)
