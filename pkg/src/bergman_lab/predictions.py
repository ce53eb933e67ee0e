"""Closed-form expansion coefficients from geometric jets.

Density of states, normalized by p:   1 + (r / 8 pi) / p + O(p^-2)
with r the fiber scalar curvature.

Direct-image curvature density, normalized by p^2:
  leading term  2 pi (phi_ssb - |phi_szb|^2 / phi_zzb), computed two ways
  (mixed-volume ratio of the global Kahler form, and horizontal pairings
  with the vertical correction); the two expressions agree identically for
  every admissible jet and either horizontal choice once the unit fiber
  frame is normalized by -i omega(w, conj(w)) = 1.

  subleading term (omega-orthogonal lifts only): the fiber-degree pairing
  of (1/2) R^TX + R^E + (i/4) Delta_X(omega(g^H, conj(g^H))) ds^dsb
  against the Kahler form, divided by its fiber part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (FIBER_ORDER, OMEGA_ORTHOGONAL, PRODUCT, TWO_PI,
                       FiberPoint, PotentialJet, Scenario, check_jet,
                       omega_mixed, omega_pair, scalar_curvature,
                       tangent_curvature)

EIGHT_PI = 8.0 * math.pi


@dataclass
class CoefficientSet:
    """Predicted expansion coefficients at one (base, fiber, choice) sample."""

    density_c0: float
    density_c1: float
    curv_c0_ratio: complex
    curv_c0_pair: complex
    curv_c1: complex | None
    s: complex
    x: FiberPoint
    choice: str


class _Bider:
    """Value with first and mixed-second fiber derivatives (v, dz, dzb, dzzb).

    Minimal forward-mode arithmetic used to push jet entries through
    quotient formulas without hand-expanding product rules.
    """

    __slots__ = ("v", "dz", "dzb", "dzzb")

    def __init__(self, v, dz=0j, dzb=0j, dzzb=0j):
        self.v, self.dz, self.dzb, self.dzzb = v, dz, dzb, dzzb

    def __mul__(self, other):
        f, g = self, other
        return _Bider(f.v * g.v,
                      f.dz * g.v + f.v * g.dz,
                      f.dzb * g.v + f.v * g.dzb,
                      f.dzzb * g.v + f.dz * g.dzb + f.dzb * g.dz + f.v * g.dzzb)

    def __truediv__(self, other):
        g = other
        inv = _Bider(1.0 / g.v, -g.dz / g.v**2, -g.dzb / g.v**2,
                     -g.dzzb / g.v**2 + 2.0 * g.dz * g.dzb / g.v**3)
        return self * inv

    def __sub__(self, other):
        f, g = self, other
        return _Bider(f.v - g.v, f.dz - g.dz, f.dzb - g.dzb, f.dzzb - g.dzzb)


def _bider(j: PotentialJet, a, b, c, d) -> _Bider:
    """Jet entry (a,b,c,d) as a fiber-differentiable quantity."""
    if a + b + 2 > FIBER_ORDER:
        raise ValueError("fiber derivative order exhausted")
    return _Bider(j[a, b, c, d], j[a + 1, b, c, d], j[a, b + 1, c, d],
                  j[a + 1, b + 1, c, d])


def density_coeffs(j: PotentialJet, twist_delta: float = 0.0):
    """(c0, c1) of the density expansion; trivial twist only."""
    if twist_delta:
        raise ValueError("density coefficients are only supported for the trivial twist")
    return 1.0, float(scalar_curvature(j)) / EIGHT_PI


def curvature_leading(j: PotentialJet, choice: str):
    """Leading curvature coefficient via both closed-form routes.

    Returns (ratio_route, pairing_route); the two agree identically.
    """
    D = j[1, 1, 0, 0]
    ratio = TWO_PI * (j[0, 0, 1, 1] - j[0, 1, 1, 0] * j[1, 0, 0, 1] / D)
    pair = omega_pair(j, choice)
    mixed = omega_mixed(j, choice)
    pairing = TWO_PI * (-1j * pair - mixed * np.conj(mixed))
    return complex(ratio), complex(pairing)


def curvature_subleading(j: PotentialJet, choice: str,
                         twist_jet: np.ndarray | None = None):
    """Subleading curvature coefficient; requires the omega-orthogonal lift.

    `twist_jet` holds the fiber derivatives psi_{a,b} of the auxiliary
    weight (see Scenario.twist_jet); None or zeros mean the trivial twist.
    """
    if choice != OMEGA_ORTHOGONAL:
        raise ValueError("subleading coefficient requires the omega-orthogonal lift")
    D = j[1, 1, 0, 0]
    tc = tangent_curvature(j)

    # Fiber Laplacian of -i omega(g^H, conj(g^H)) = phi_ssb - |phi_szb|^2/phi_zzb.
    Omega = _bider(j, 0, 0, 1, 1) - (_bider(j, 0, 1, 1, 0) * _bider(j, 1, 0, 0, 1)
                                     / _bider(j, 1, 1, 0, 0))
    L = Omega.dzzb  # d_z d_zb of the pairing

    tau_zzb = 0.5 * tc.c00
    if twist_jet is not None:
        tau_zzb = tau_zzb + TWO_PI * twist_jet[1, 1]
    tau_ssb = 0.5 * tc.c11 + L / (2.0 * D)
    tau_zsb = 0.5 * tc.c10
    tau_szb = 0.5 * tc.c01

    value = tau_ssb + (tau_zzb * j[0, 0, 1, 1]
                       - tau_zsb * j[0, 1, 1, 0]
                       - tau_szb * j[1, 0, 0, 1]) / D
    return complex(value)


def coefficient_set(scenario: Scenario, s: complex, x: FiberPoint,
                    choice: str) -> CoefficientSet:
    """All predicted coefficients at one sample point."""
    j = scenario.jet(s, x)
    if scenario.twist_delta:
        c0, c1 = math.nan, math.nan
    else:
        c0, c1 = density_coeffs(j)
    lead_ratio, lead_pair = curvature_leading(j, choice)
    sub = None
    if choice == OMEGA_ORTHOGONAL:
        tw = scenario.twist_jet(x) if scenario.twist_delta else None
        sub = curvature_subleading(j, choice, tw)
    return CoefficientSet(c0, c1, lead_ratio, lead_pair, sub, s, x, choice)


def random_admissible_jet(rng: np.random.Generator, scale: float = 1.0) -> PotentialJet:
    """Random jet satisfying reality, conjugate symmetry and positivity.

    Used by the identity checks between the two leading-coefficient routes;
    not tied to any catalog scenario.
    """
    d = np.zeros((5, 5, 3, 3), dtype=complex)
    for a in range(FIBER_ORDER + 1):
        for b in range(FIBER_ORDER + 1 - a):
            for c in range(3):
                for dd in range(3 - c):
                    if (a, b, c, dd) > (b, a, dd, c):
                        continue
                    if (a, b, c, dd) == (b, a, dd, c):
                        d[a, b, c, dd] = rng.normal() * scale
                    else:
                        val = (rng.normal() + 1j * rng.normal()) * scale
                        d[a, b, c, dd] = val
                        d[b, a, dd, c] = np.conj(val)
    d[1, 1, 0, 0] = abs(d[1, 1, 0, 0].real) + 0.2 * scale
    j = PotentialJet(d)
    check_jet(j)
    return j
