"""Diagonal Schwartz kernels of projections and endomorphisms.

The density of states at x is sum_{k,l} (H^{-1})_{lk} f_k(x) conj(f_l(x))
times the full pointwise weight; for an endomorphism given by a frame matrix
A the diagonal kernel replaces H^{-1} by A conj(H)^{-1}, so that the
identity reproduces the density and the fiber integral of any diagonal
kernel is the matrix trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .geometry import AFFINE, FiberPoint, Scenario
from .hilbert import GramSystem


@dataclass
class DiagonalSample:
    """Diagonal kernel value at one fiber point."""

    x: FiberPoint
    s: complex
    p: int
    value: complex


def _weighted_sections(G: GramSystem, scenario: Scenario, z, chart: str) -> np.ndarray:
    """Half-weighted section values v_k = f_k e^{-pi p phi - pi psi} at z.

    Columns index the evaluation points; rows the basis sections.  The
    density at x is then conj(v)^T H^{-1} v.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    p = G.p
    jets = scenario.jet_field(G.s, z, chart, keys=((0, 0, 0, 0),))
    phi = jets[0, 0, 0, 0].real
    psi = scenario.twist_field(z, chart)[0, 0].real
    k = np.arange(p + 1)[:, None]
    powers = k if chart == AFFINE else p - k
    f = G.basis.norms[:, None] * np.power(z[None, :], powers)
    return f * np.exp(-math.pi * p * phi - math.pi * psi)[None, :]


def density_profile(G: GramSystem, scenario: Scenario, z, chart: str = AFFINE) -> np.ndarray:
    """Vectorized density of states over an array of chart coordinates."""
    V = _weighted_sections(G, scenario, z, chart)
    X = hilbert.solve(G, V)
    vals = np.sum(np.conj(V) * X, axis=0).real
    if np.min(vals) <= 0.0:
        raise ValueError("density of states lost positivity, Gram system unusable")
    return vals


def bergman_diag(G: GramSystem, scenario: Scenario, x: FiberPoint) -> DiagonalSample:
    """Density of states at a fiber point (real and positive)."""
    val = float(density_profile(G, scenario, np.array([x.z]), x.chart)[0])
    return DiagonalSample(x, G.s, G.p, val)


def operator_diag(A: np.ndarray, G: GramSystem, scenario: Scenario,
                  x: FiberPoint) -> DiagonalSample:
    """Diagonal kernel of the endomorphism with frame matrix A at x."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (G.dim, G.dim):
        raise ValueError(f"endomorphism matrix must be {G.dim} x {G.dim}, got {A.shape}")
    v = _weighted_sections(G, scenario, np.array([x.z]), x.chart)[:, 0]
    y = hilbert.solve_conj(G, np.conj(v))
    val = complex(v @ (A @ y))
    return DiagonalSample(x, G.s, G.p, val)


def density_integral(G: GramSystem, scenario: Scenario, rule) -> tuple[float, float]:
    """Fiber integral of the density of states (should equal p + 1).

    Uses the supplied rule, which may differ from the one that built G, so
    the identity is a genuine quadrature statement rather than exact
    linear algebra.
    """
    from . import quadrature

    def integrand(z):
        jets = scenario.jet_field(G.s, z, AFFINE, keys=((1, 1, 0, 0),))
        lam = 2.0 * jets[1, 1, 0, 0].real
        return density_profile(G, scenario, z, AFFINE) * lam

    value, _ = quadrature.integrate(integrand, rule)
    return value.real, G.err_est


def operator_trace(A: np.ndarray, G: GramSystem, scenario: Scenario, rule) -> complex:
    """Fiber integral of the diagonal kernel of A (equals trace(A))."""
    from . import quadrature

    A = np.asarray(A, dtype=complex)

    def integrand(z):
        V = _weighted_sections(G, scenario, z, AFFINE)
        Y = hilbert.solve_conj(G, np.conj(V))
        diag = np.einsum("kn,kl,ln->n", V, A, Y)
        jets = scenario.jet_field(G.s, z, AFFINE, keys=((1, 1, 0, 0),))
        return diag * 2.0 * jets[1, 1, 0, 0].real

    return quadrature.integrate(integrand, rule)[0]
