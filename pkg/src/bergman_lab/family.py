"""Canonical connections on the direct-image bundle and their curvature.

Two connections are assembled in the monomial frame.  The holomorphic kind
projects the bundle covariant derivative along the horizontal lift,
P (d + d log h) P; its (0,1) frame matrix vanishes identically because the
frame is holomorphic.  The hermitian kind adds the half-rate of the fiber
volume along the lift, which restores metric compatibility for the L2
metric; its (0,1) matrix is the pairing of that rate alone.

Curvature is scalarized against (d_s, d_sb):
    theta = d_s A_sb - d_sb A_s + [A_s, A_sb],
with the Wirtinger derivatives taken by 4-point central differences in
(Re s, Im s) at steps h and h/2, Richardson-combined; the difference of the
two estimates is reported as fd_err.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bergman, hilbert, quadrature
from .geometry import (OMEGA_ORTHOGONAL, PRODUCT, TWO_PI, FiberPoint,
                       Scenario, horizontal_lift, k_of_lift)
from .hilbert import GramSystem, Workspace

HOLOMORPHIC = "holomorphic"
HERMITIAN = "hermitian"
KINDS = (HOLOMORPHIC, HERMITIAN)

FD_STEP_FACTOR = 1e-3  # default h_fd = 1e-3 * s_max


@dataclass
class ConnectionMatrices:
    """Frame matrices A_s, A_sb of a connection at a base point.

    Convention: nabla f_i = sum_k A[k, i] f_k, scalarized against d_s and
    d_sb.  A_sb is identically zero for the holomorphic kind.
    """

    A_s: np.ndarray
    A_sb: np.ndarray
    kind: str
    choice: str
    s: complex
    p: int


@dataclass
class CurvatureSample:
    """Curvature frame matrix theta = R(d_s, d_sb) with diagonal samples.

    `diag` holds (fiber point, diagonal kernel value) pairs; `fd_err` is the
    max-abs difference between the two finite-difference estimates of theta.
    """

    theta: np.ndarray
    diag: list
    fd_err: float
    kind: str
    choice: str
    s: complex
    p: int
    h_fd: float
    flagged: bool = False
    gram: GramSystem = None


def _validate(choice, kind):
    if choice not in (PRODUCT, OMEGA_ORTHOGONAL):
        raise ValueError(f"unknown horizontal choice {choice!r}")
    if kind not in KINDS:
        raise ValueError(f"unknown connection kind {kind!r}")


def _connection_matrices(ws: Workspace, G: GramSystem, choice: str):
    """A_s pairing blocks shared by both kinds, plus the volume-rate blocks.

    Returns (B, K, Kbar): B pairs the projected bundle derivative along the
    lift, K and Kbar pair the volume half-rate along the lift and its
    conjugate.
    """
    jets = ws.jets
    p = ws.p
    a = horizontal_lift(jets, choice)
    mult = -TWO_PI * p * (jets[0, 0, 1, 0] + a * jets[1, 0, 0, 0])
    if ws.scenario.twist_delta:
        mult = mult - TWO_PI * a * ws.psi_z
    B = ws.pair_deriv(a, mult)
    k_vals = k_of_lift(jets, choice)
    K = ws.pair(k_vals)
    Kbar = ws.pair(np.conj(k_vals))
    return B, K, Kbar


def _assemble_connections(scenario, s, p, rule, combos):
    """Connections for every requested (choice, kind) on one shared workspace."""
    ws = hilbert.workspace(scenario, s, p, rule)
    G = hilbert.gram(scenario, s, p, rule)
    out = {}
    zero = np.zeros((p + 1, p + 1), dtype=complex)
    by_choice = {}
    for choice in {c for c, _ in combos}:
        by_choice[choice] = _connection_matrices(ws, G, choice)
    for choice, kind in combos:
        B, K, Kbar = by_choice[choice]
        if kind == HOLOMORPHIC:
            A_s = hilbert.solve_conj(G, B)
            A_sb = zero
        else:
            A_s = hilbert.solve_conj(G, B + K)
            A_sb = hilbert.solve_conj(G, Kbar)
        out[(choice, kind)] = ConnectionMatrices(A_s, A_sb, kind, choice, s, p)
    return out, G


def connection(scenario: Scenario, s: complex, p: int, choice: str, kind: str,
               rule: quadrature.QuadRule | None = None) -> ConnectionMatrices:
    """Frame matrices of the requested connection at s."""
    _validate(choice, kind)
    conns, _ = _assemble_connections(scenario, s, p, rule, [(choice, kind)])
    return conns[(choice, kind)]


def _wirtinger(plus, minus, plus_i, minus_i, h):
    """(d_s A, d_sb A) from 4-point central differences at step h."""
    dx = (plus - minus) / (2.0 * h)
    dy = (plus_i - minus_i) / (2.0 * h)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def curvature_sweep(scenario: Scenario, s: complex, p: int, combos,
                    h_fd: float | None = None,
                    rule: quadrature.QuadRule | None = None,
                    fiber_points=(), fd_tol: float | None = None):
    """Curvature samples for several (choice, kind) pairs at once.

    The nine-point finite-difference stencil (center plus +-h, +-ih at two
    step sizes) is shared across the pairs, which makes sweeping both
    choices and kinds barely more expensive than one.
    """
    combos = [tuple(cc) for cc in combos]
    for choice, kind in combos:
        _validate(choice, kind)
    if h_fd is None:
        h_fd = FD_STEP_FACTOR * scenario.s_max
    if abs(s) > scenario.s_max - 2.0 * h_fd:
        raise ValueError(
            f"base point |s| = {abs(s):g} too close to the disk boundary for "
            f"stencil step {h_fd:g}"
        )
    if rule is None:
        rule = quadrature.build_rule(quadrature.default_resolution(p))

    offsets = [0j]
    for step in (h_fd, h_fd / 2.0):
        offsets += [step, -step, 1j * step, -1j * step]
    conns = {}
    G_center = None
    for off in offsets:
        conns[off], G = _assemble_connections(scenario, s + off, p, rule, combos)
        if off == 0j:
            G_center = G

    out = {}
    for combo in combos:
        theta_by_step = []
        for step in (h_fd, h_fd / 2.0):
            dAs_s, dAs_sb = _wirtinger(
                conns[step][combo].A_s, conns[-step][combo].A_s,
                conns[1j * step][combo].A_s, conns[-1j * step][combo].A_s, step)
            dAsb_s, dAsb_sb = _wirtinger(
                conns[step][combo].A_sb, conns[-step][combo].A_sb,
                conns[1j * step][combo].A_sb, conns[-1j * step][combo].A_sb, step)
            theta_by_step.append(dAsb_s - dAs_sb)
        A_s0 = conns[0j][combo].A_s
        A_sb0 = conns[0j][combo].A_sb
        comm = A_s0 @ A_sb0 - A_sb0 @ A_s0
        fd_err = float(np.max(np.abs(theta_by_step[1] - theta_by_step[0])))
        theta = (4.0 * theta_by_step[1] - theta_by_step[0]) / 3.0 + comm
        flagged = False
        if fd_tol is not None and fd_err > fd_tol:
            flagged = True
            warnings.warn(
                f"finite-difference error {fd_err:.3e} exceeds requested "
                f"tolerance {fd_tol:.3e}", stacklevel=2)
        diag = [(x, bergman.operator_diag(theta, G_center, scenario, x).value)
                for x in fiber_points]
        choice, kind = combo
        out[combo] = CurvatureSample(theta, diag, fd_err, kind, choice, s, p,
                                     h_fd, flagged, G_center)
    return out


def curvature(scenario: Scenario, s: complex, p: int, choice: str, kind: str,
              h_fd: float | None = None,
              rule: quadrature.QuadRule | None = None,
              fiber_points=(), fd_tol: float | None = None) -> CurvatureSample:
    """Curvature of one connection at s (see curvature_sweep)."""
    res = curvature_sweep(scenario, s, p, [(choice, kind)], h_fd, rule,
                          fiber_points, fd_tol)
    return res[(choice, kind)]


def chern_curvature_closed(G: GramSystem) -> np.ndarray:
    """Curvature of the Chern connection of the L2 metric, from Gram data.

    In the holomorphic frame the Chern connection is conj(H)^{-1} d_s conj(H)
    and its curvature scalarizes to
        -conj(H^{-1} H_ssb - H^{-1} H_s H^{-1} H_sb).
    Under the omega-orthogonal choice both canonical connections coincide
    with it, which provides a closed-form cross-check of the
    finite-difference curvature path.
    """
    if G.H_s is None:
        raise ValueError("GramSystem was built without derivative matrices")
    A = hilbert.solve(G, G.H_ssb)
    B = hilbert.solve(G, G.H_s @ hilbert.solve(G, G.H_sb))
    return -np.conj(A - B)


def metric_compatibility_residual(G: GramSystem, conn: ConnectionMatrices) -> float:
    """Max-abs residual of d_s H = A_s^T H + H conj(A_sb), relative to |H_s|."""
    resid = G.H_s - conn.A_s.T @ G.H - G.H @ np.conj(conn.A_sb)
    scale = float(np.max(np.abs(G.H_s))) or 1.0
    return float(np.max(np.abs(resid))) / scale


def selfadjointness_residual(G: GramSystem, theta: np.ndarray) -> float:
    """Deviation of theta from self-adjointness with respect to the L2 metric.

    For a metric connection the pairing theta^T H is Hermitian; returns the
    max-abs anti-Hermitian part relative to its magnitude.
    """
    M = theta.T @ G.H
    scale = float(np.max(np.abs(M))) or 1.0
    return float(np.max(np.abs(M - M.conj().T))) / scale
