"""Holomorphic section spaces and their L2 Gram systems.

For degree p the section space over each base point is spanned by the
monomials z^k, k = 0..p, in the affine chart (w^{p-k} in the infinity
chart).  The basis is rescaled so that the round-weight Gram is the
identity, which keeps perturbed Grams well conditioned.  Gram matrices and
their first and mixed-second base derivatives are assembled by quadrature,
differentiating the closed-form integrand under the integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .geometry import AFFINE, INFINITY, TWO_PI, FiberPoint, PositivityError, Scenario

MAX_DEGREE = 256
COND_LIMIT = 1e12
SOLVE_RTOL = 1e-10


class ConditioningError(RuntimeError):
    """Gram matrix is numerically unusable (positivity or conditioning)."""


def dimension_check(p: int) -> int:
    """Dimension of the degree-p section space on the sphere: p + 1."""
    if p < 0:
        raise ValueError("degree must be nonnegative")
    return p + 1


@dataclass(frozen=True)
class SectionBasis:
    """Monomial basis of degree p with per-degree positive scale factors."""

    p: int
    norms: np.ndarray  # N_k, k = 0..p

    def values(self, x: FiberPoint) -> np.ndarray:
        """Coefficient functions of the basis sections at x, in x's chart."""
        k = np.arange(self.p + 1)
        if x.chart == AFFINE:
            return self.norms * np.power(complex(x.z), k)
        return self.norms * np.power(complex(x.z), self.p - k)


def basis(p: int, normalize: bool = True) -> SectionBasis:
    """Basis with N_k = sqrt((p+1) C(p,k)), the round-Gram orthonormalization."""
    if not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"degree p = {p} outside the supported range [1, {MAX_DEGREE}]")
    if normalize:
        norms = np.sqrt(np.array([(p + 1) * math.comb(p, k) for k in range(p + 1)],
                                 dtype=float))
    else:
        norms = np.ones(p + 1)
    return SectionBasis(p, norms)


def round_gram_diagonal(p: int) -> np.ndarray:
    """Closed-form round-weight norms: k! (p-k)! / (p+1)!."""
    return np.array([1.0 / ((p + 1) * math.comb(p, k)) for k in range(p + 1)])


@dataclass
class Workspace:
    """Shared per-(scenario, s, p, rule) node data for Gram-type pairings.

    U[k, n] holds the half-weighted basis samples
    N_k z^k exp(-pi p phi - pi psi) sqrt(lam * w_quad); with this convention
    any pairing matrix is a single product against node multipliers.
    """

    scenario: Scenario
    s: complex
    p: int
    rule: quadrature.QuadRule
    basis: SectionBasis
    z: np.ndarray
    jets: object     # PotentialJet field over nodes (NODE_KEYS entries)
    lam: np.ndarray
    psi: np.ndarray
    psi_z: np.ndarray
    U: np.ndarray

    def pair(self, left_mult: np.ndarray) -> np.ndarray:
        """Matrix M[k, j] = sum_n conj(U[k,n]) left_mult[n] U[j,n].

        This is the L2 pairing <mult * f_j, f_k> for a scalar multiplier.
        """
        return (self.U.conj() * left_mult) @ self.U.T

    def pair_deriv(self, a: np.ndarray, mult: np.ndarray) -> np.ndarray:
        """Pairing <a f_j' + mult f_j, f_k> including the lift a d_z term."""
        k = np.arange(self.p + 1)
        V = (a / self.z) * (k[:, None] * self.U) + mult * self.U
        return self.U.conj() @ V.T


def _half_weight_samples(scn: Scenario, s, p, norms, z, jets, psi, weights):
    lam = 2.0 * jets[1, 1, 0, 0].real
    if np.min(lam) <= 0.0:
        raise PositivityError("fiber density lost positivity on the quadrature grid")
    phi = jets[0, 0, 0, 0].real
    expo = (np.log(z)[None, :] * np.arange(p + 1)[:, None]
            + (-math.pi * p * phi - math.pi * psi.real
               + 0.5 * np.log(lam * weights))[None, :]
            + np.log(norms)[:, None])
    return np.exp(expo), lam


def workspace(scenario: Scenario, s: complex, p: int,
              rule: quadrature.QuadRule | None = None,
              normalize: bool = True) -> Workspace:
    """Evaluate weights, jets and half-weighted basis samples at the nodes."""
    if rule is None:
        rule = quadrature.build_rule(quadrature.default_resolution(p))
    bas = basis(p, normalize)
    z = rule.points
    jets = scenario.jet_field(s, z, AFFINE)
    tw = scenario.twist_field(z, AFFINE)
    psi, psi_z = tw[0, 0], tw[1, 0]
    U, lam = _half_weight_samples(scenario, s, p, bas.norms, z, jets, psi, rule.weights)
    return Workspace(scenario, s, p, rule, bas, z, jets, lam, psi, psi_z, U)


@dataclass
class GramSystem:
    """L2 Gram matrix of the section basis with base-parameter derivatives.

    H is Hermitian positive definite; H_sb = adjoint(H_s) and H_ssb is
    Hermitian by construction.  `err_est` is the relative deviation from the
    embedded half-resolution assembly, `cond` the 2-norm condition number.
    """

    scenario: Scenario
    s: complex
    p: int
    m: int
    basis: SectionBasis
    H: np.ndarray
    H_s: np.ndarray | None
    H_sb: np.ndarray | None
    H_ssb: np.ndarray | None
    cond: float
    err_est: float
    _chol: np.ndarray = None

    @property
    def dim(self) -> int:
        return self.p + 1


def _assemble(ws: Workspace, want_derivs: bool):
    U = ws.U
    H = U @ U.conj().T
    H = 0.5 * (H + H.conj().T)
    if not want_derivs:
        return H, None, None, None
    jets = ws.jets
    p = ws.p
    lam = ws.lam
    lam_s = 2.0 * jets[1, 1, 1, 0]
    lam_ssb = 2.0 * jets[1, 1, 1, 1]
    g_s = -TWO_PI * p * jets[0, 0, 1, 0] + lam_s / lam
    g_ssb = (-TWO_PI * p * jets[0, 0, 1, 1] + lam_ssb / lam
             - lam_s * np.conj(lam_s) / lam**2 + g_s * np.conj(g_s))
    H_s = (U * g_s) @ U.conj().T
    H_sb = H_s.conj().T
    H_ssb = (U * g_ssb.real) @ U.conj().T
    H_ssb = 0.5 * (H_ssb + H_ssb.conj().T)
    return H, H_s, H_sb, H_ssb


def gram(scenario: Scenario, s: complex, p: int,
         rule: quadrature.QuadRule | None = None,
         want_derivs: bool = True, normalize: bool = True) -> GramSystem:
    """Assemble the Gram system at base point s by fiber quadrature."""
    ws = workspace(scenario, s, p, rule, normalize)
    H, H_s, H_sb, H_ssb = _assemble(ws, want_derivs)
    scale = float(np.max(np.abs(H)))
    err = math.inf
    if ws.rule.half is not None:
        ws_half = workspace(scenario, s, p, ws.rule.half, normalize)
        H_half = ws_half.U @ ws_half.U.conj().T
        err = float(np.max(np.abs(H - H_half))) / scale
    eig = np.linalg.eigvalsh(H)
    if eig[0] <= 0.0:
        raise ConditioningError("Gram matrix is not positive definite")
    cond = float(eig[-1] / eig[0])
    if cond > COND_LIMIT:
        raise ConditioningError(f"Gram condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    chol = np.linalg.cholesky(H)
    return GramSystem(scenario, s, p, ws.rule.m, ws.basis,
                      H, H_s, H_sb, H_ssb, cond, err, chol)


def _cho_solve(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.conj().T, y)


def solve(G, rhs: np.ndarray) -> np.ndarray:
    """Hermitian positive-definite solve H x = rhs with a residual check.

    Accepts a GramSystem or a plain Hermitian positive-definite matrix.
    One step of iterative refinement is applied, then the normwise backward
    error |H x - rhs| / (|rhs| + |H| |x|) must come out below 1e-10; for
    O(1)-scaled right-hand sides this is the plain relative-residual bound.
    Exceeding it signals a conditioning failure.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if isinstance(G, GramSystem):
        H, L = G.H, G._chol
    else:
        H = np.asarray(G, dtype=complex)
        L = np.linalg.cholesky(H)
    vec = rhs.ndim == 1
    b = rhs[:, None] if vec else rhs
    x = _cho_solve(L, b)
    x = x + _cho_solve(L, b - H @ x)
    resid = np.linalg.norm(H @ x - b)
    scale = np.linalg.norm(b) + np.linalg.norm(H) * np.linalg.norm(x)
    if resid > SOLVE_RTOL * max(scale, 1e-300):
        raise ConditioningError(
            f"solve backward error {resid / scale:.3e} exceeds {SOLVE_RTOL:g}"
        )
    return x[:, 0] if vec else x


def solve_conj(G: GramSystem, rhs: np.ndarray) -> np.ndarray:
    """Solve conj(H) x = rhs (the projection-side system)."""
    return np.conj(solve(G, np.conj(rhs)))
