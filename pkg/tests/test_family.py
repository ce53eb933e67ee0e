import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bergman_lab import family as f
from bergman_lab import geometry as g
from bergman_lab import hilbert as h

P = 10
C = 0.5


@pytest.fixture(scope="module")
def gauss():
    return g.catalog("gauss-scale", c=C)


def test_scaled_base_connection_matrix(gauss):
    s = 0.11 + 0.06j
    conn = f.connection(gauss, s, P, g.PRODUCT, f.HOLOMORPHIC)
    expect = -2 * math.pi * P * C * np.conj(s) * np.eye(P + 1)
    assert np.max(np.abs(conn.A_s - expect)) < 1e-12
    assert np.max(np.abs(conn.A_sb)) == 0


def test_round_connection_vanishes():
    fs = g.catalog("static-fs")
    for kind in (f.HOLOMORPHIC, f.HERMITIAN):
        conn = f.connection(fs, 0.1, P, g.OMEGA_ORTHOGONAL, kind)
        assert np.max(np.abs(conn.A_s)) < 1e-14
        assert np.max(np.abs(conn.A_sb)) < 1e-14


def test_kinds_coincide_for_omega_orthogonal_connection():
    cm = g.catalog("conformal-mix")
    hol = f.connection(cm, 0.12 + 0.07j, P, g.OMEGA_ORTHOGONAL, f.HOLOMORPHIC)
    her = f.connection(cm, 0.12 + 0.07j, P, g.OMEGA_ORTHOGONAL, f.HERMITIAN)
    assert np.max(np.abs(hol.A_s - her.A_s)) < 1e-8
    assert np.max(np.abs(her.A_sb)) < 1e-12


def test_scaled_base_curvature_exact(gauss):
    res = f.curvature_sweep(gauss, 0.11 + 0.06j, P,
                            [(g.PRODUCT, f.HOLOMORPHIC), (g.PRODUCT, f.HERMITIAN)],
                            fiber_points=[g.FiberPoint(g.AFFINE, 0.4 + 0.2j)])
    target = 2 * math.pi * P * C
    for cs in res.values():
        assert np.max(np.abs(cs.theta - target * np.eye(P + 1))) / target < 1e-6
        diag = cs.diag[0][1] / P**2
        assert_allclose(diag, 2 * math.pi * C * (1 + 1 / P), rtol=1e-6)
        assert cs.fd_err < 1e-8


def test_round_curvature_vanishes():
    fs = g.catalog("static-fs")
    cs = f.curvature(fs, 0.1, 6, g.OMEGA_ORTHOGONAL, f.HERMITIAN)
    assert np.max(np.abs(cs.theta)) < 1e-12


def test_metric_compatibility():
    for sid in ("moebius-mix", "conformal-mix"):
        scn = g.catalog(sid)
        G = h.gram(scn, 0.13 + 0.08j, P)
        for choice in (g.PRODUCT, g.OMEGA_ORTHOGONAL):
            conn = f.connection(scn, 0.13 + 0.08j, P, choice, f.HERMITIAN)
            assert f.metric_compatibility_residual(G, conn) < 1e-8


def test_curvature_selfadjoint_for_hermitian_kind():
    cm = g.catalog("conformal-mix")
    res = f.curvature_sweep(cm, 0.13 + 0.08j, P, [(g.PRODUCT, f.HERMITIAN)])
    cs = res[(g.PRODUCT, f.HERMITIAN)]
    assert f.selfadjointness_residual(cs.gram, cs.theta) < 1e-10


def test_kahler_fibration_curvature_coincidence():
    mm = g.catalog("moebius-mix")
    res = f.curvature_sweep(mm, 0.13 + 0.08j, P,
                            [(g.OMEGA_ORTHOGONAL, f.HOLOMORPHIC),
                             (g.OMEGA_ORTHOGONAL, f.HERMITIAN)])
    hol = res[(g.OMEGA_ORTHOGONAL, f.HOLOMORPHIC)]
    her = res[(g.OMEGA_ORTHOGONAL, f.HERMITIAN)]
    assert np.max(np.abs(hol.theta - her.theta)) <= 10 * hol.fd_err


def test_finite_difference_path_matches_closed_form():
    # omega-orthogonal lifts: the projected connection is the metric one,
    # so its curvature must reproduce the Gram-matrix closed form
    for sid in g.scenario_list():
        scn = g.catalog(sid)
        res = f.curvature_sweep(scn, 0.13 + 0.08j, P,
                                [(g.OMEGA_ORTHOGONAL, f.HOLOMORPHIC)])
        cs = res[(g.OMEGA_ORTHOGONAL, f.HOLOMORPHIC)]
        closed = f.chern_curvature_closed(cs.gram)
        assert np.max(np.abs(cs.theta - closed)) <= 10 * max(cs.fd_err, 1e-12)
    # the scaled-base family pins the sign through the exact oracle
    gs = g.catalog("gauss-scale", c=C)
    G = h.gram(gs, 0.1 + 0.05j, 8)
    closed = f.chern_curvature_closed(G)
    assert np.max(np.abs(closed - 2 * math.pi * 8 * C * np.eye(9))) < 1e-9


def test_boundary_margin_enforced():
    cm = g.catalog("conformal-mix")
    with pytest.raises(ValueError, match="boundary"):
        f.curvature(cm, 0.2995, 6, g.PRODUCT, f.HOLOMORPHIC)


def test_fd_tolerance_flagging():
    cm = g.catalog("conformal-mix")
    with pytest.warns(UserWarning, match="finite-difference"):
        cs = f.curvature(cm, 0.1 + 0.05j, 6, g.PRODUCT, f.HOLOMORPHIC,
                         fd_tol=1e-30)
    assert cs.flagged


def test_validation_errors():
    cm = g.catalog("conformal-mix")
    with pytest.raises(ValueError, match="choice"):
        f.connection(cm, 0.1, 6, "radial", f.HOLOMORPHIC)
    with pytest.raises(ValueError, match="kind"):
        f.connection(cm, 0.1, 6, g.PRODUCT, "chern")
