"""Geometry of weighted sphere fibrations over a one-dimensional parameter disk.

The total space is S x P^1 with S = {|s| < s_max} a disk in C and fiber the
Riemann sphere, covered by an affine chart z and an infinity chart w = 1/z.
A scenario is a global Kahler weight phi(s, z); all geometric quantities
(fiber metric, horizontal lifts, curvatures, fiber Laplacian) are evaluated
from the closed-form jet of phi, i.e. the table of mixed Wirtinger
derivatives d_z^a d_zb^b d_s^c d_sb^d phi, for a+b <= 4 and c+d <= 2.

Conventions used throughout the package:
  * section norms of the line bundle carry the weight e^{-2 pi p phi};
  * the global Kahler form is i * ddbar(phi), so the fiber Riemannian
    density is lam = 2 phi_zzb and the round weight log(1+|z|^2)/(2 pi)
    gives fiber area exactly 1;
  * 2-forms are evaluated with (a^b)(u,v) = a(u)b(v) - a(v)b(u) and
    (ds^dsb)(d_s, d_sb) = 1; curvature coefficients are reported as the
    scalar pairing against (d_s, d_sb).

Jets are computed symbolically once per scenario and chart (sympy, with z,
zb, s, sb treated as independent variables) and evaluated through a single
vectorized closure, so every entry is a closed form exact to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

TWO_PI = 2.0 * math.pi

AFFINE = "affine"
INFINITY = "infinity"
CHARTS = (AFFINE, INFINITY)

PRODUCT = "product"
OMEGA_ORTHOGONAL = "omega-orthogonal"
CHOICES = (PRODUCT, OMEGA_ORTHOGONAL)

FIBER_ORDER = 4  # a + b <= 4
BASE_ORDER = 2   # c + d <= 2

CATALOG_IDS = ("static-fs", "gauss-scale", "moebius-mix", "conformal-mix")

DEFAULT_S_MAX = 0.3
DEFAULT_PARAMS = {"c": 0.5, "eps": 0.2, "eta": 0.2}


class ScenarioError(ValueError):
    """Unknown scenario id or parameter outside its declared range."""


class PositivityError(ValueError):
    """The fiberwise Kahler positivity phi_zzb > 0 failed."""


def jet_keys():
    """All derivative multi-indices (a, b, c, d) carried by a jet."""
    keys = []
    for total in range(FIBER_ORDER + BASE_ORDER + 1):
        for a in range(FIBER_ORDER + 1):
            for b in range(FIBER_ORDER + 1 - a):
                for c in range(BASE_ORDER + 1):
                    for d in range(BASE_ORDER + 1 - c):
                        if a + b + c + d == total:
                            keys.append((a, b, c, d))
    return keys


_JET_KEYS = tuple(jet_keys())
_JET_KEY_INDEX = {k: i for i, k in enumerate(_JET_KEYS)}

# Entries needed for quadrature-node work (Gram matrices, connections):
# weight derivatives, fiber density derivatives, lift coefficient and its
# fiber derivative.
NODE_KEYS = (
    (0, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 1, 1),
    (1, 0, 0, 0), (0, 1, 1, 0),
    (1, 1, 0, 0), (1, 1, 1, 0), (1, 1, 0, 1), (1, 1, 1, 1),
    (2, 1, 0, 0),
)

_Z, _ZB, _S, _SB = sp.symbols("z zb s sb")


# ---------------------------------------------------------------------------
# symbolic potentials


@lru_cache(maxsize=None)
def _catalog_potential(scenario_id, c, eps, eta, chart):
    """Closed-form weight of a catalog scenario in the given chart.

    In the infinity chart the weight is the affine one transported by
    w = 1/z plus log|w|/pi, which keeps it smooth across the pole; for the
    catalog members the combination below is that transport written out.
    """
    if chart == AFFINE:
        q = 1 + _Z * _ZB
        fs = sp.log(q) / (2 * sp.pi)
        moeb = (_SB * _Z + _S * _ZB) / q / 2
        conf = _S * _SB / q
    else:
        q = 1 + _Z * _ZB
        fs = sp.log(q) / (2 * sp.pi)
        moeb = (_SB * _ZB + _S * _Z) / q / 2
        conf = _S * _SB * _Z * _ZB / q
    if scenario_id == "static-fs":
        return fs
    if scenario_id == "gauss-scale":
        return fs + c * _S * _SB
    if scenario_id == "moebius-mix":
        return fs + eps * moeb
    if scenario_id == "conformal-mix":
        return fs + c * _S * _SB + eps * moeb + eta * conf
    raise ScenarioError(f"unknown scenario id {scenario_id!r}")


@lru_cache(maxsize=None)
def _catalog_twist(delta, chart):
    """Fiber-only auxiliary weight delta/(1+|z|^2) in the given chart."""
    q = 1 + _Z * _ZB
    if chart == AFFINE:
        return delta / q
    return delta * _Z * _ZB / q


@lru_cache(maxsize=None)
def _jet_evaluator(expr, keys):
    """Compile jet entries of the symbolic weight `expr`.

    Returns a closure (z, zb, s, sb) -> list of entry values, one per key,
    built by incremental symbolic differentiation and a single cse-shared
    lambdify.
    """
    table = {(0, 0, 0, 0): expr}
    for key in _JET_KEYS:
        if key in table:
            continue
        a, b, c, d = key
        if a:
            table[key] = sp.diff(table[(a - 1, b, c, d)], _Z)
        elif b:
            table[key] = sp.diff(table[(a, b - 1, c, d)], _ZB)
        elif c:
            table[key] = sp.diff(table[(a, b, c - 1, d)], _S)
        else:
            table[key] = sp.diff(table[(a, b, c, d - 1)], _SB)
    exprs = [table[k] for k in keys]
    fn = sp.lambdify((_Z, _ZB, _S, _SB), exprs, modules="numpy", cse=True)
    return fn


def _eval_jet(fn, keys, z, s):
    zc = np.asarray(z, dtype=complex)
    sc = complex(s)
    vals = fn(zc, np.conj(zc), sc, np.conj(sc))
    shape = zc.shape
    out = {}
    for key, v in zip(keys, vals):
        arr = np.asarray(v, dtype=complex)
        if arr.shape != shape:
            arr = np.broadcast_to(arr, shape).copy()
        out[key] = arr
    return out


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class FiberPoint:
    """A point of the sphere fiber in one of the two charts.

    `z` is the coordinate in the active chart; the charts glue by w = 1/z.
    The infinity chart is only used on its half of the overlap, |z| <= 1.
    """

    chart: str = AFFINE
    z: complex = 0j

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        if self.chart == INFINITY and abs(self.z) > 1 + 1e-12:
            raise ValueError("infinity chart is restricted to |z| <= 1")

    def affine(self) -> complex:
        """Coordinate in the affine chart (inf for the pole itself)."""
        if self.chart == AFFINE:
            return self.z
        if self.z == 0:
            return complex(math.inf, 0.0)
        return 1.0 / self.z

    def other(self) -> "FiberPoint":
        if self.z == 0:
            raise ValueError("point is out of range of the other chart")
        other = INFINITY if self.chart == AFFINE else AFFINE
        return FiberPoint(other, 1.0 / self.z)


def fiber_grid(n: int) -> list[FiberPoint]:
    """Deterministic spread of n fiber points covering both charts."""
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    pts = []
    for i in range(n):
        theta = math.pi * (i + 0.5) / n
        phi = TWO_PI * ((i * golden) % 1.0)
        r = math.tan(theta / 2.0)
        zz = r * complex(math.cos(phi), math.sin(phi))
        if abs(zz) <= 1.0:
            pts.append(FiberPoint(AFFINE, zz))
        else:
            pts.append(FiberPoint(INFINITY, 1.0 / zz))
    return pts


@dataclass
class PotentialJet:
    """Mixed Wirtinger derivatives of the weight at one point.

    `d[a, b, c, d]` is d_z^a d_zb^b d_s^c d_sb^d phi in the active chart;
    slots outside a+b <= 4, c+d <= 2 are zero.  The same container is used
    with a trailing node axis for vectorized evaluation on grids.
    """

    d: np.ndarray
    chart: str = AFFINE

    def __getitem__(self, key):
        return self.d[key]


def check_jet(j: PotentialJet, tol: float = 1e-10):
    """Validate reality, conjugate symmetry and fiber positivity."""
    d = j.d
    scale = float(np.max(np.abs(d))) or 1.0
    if abs(d[0, 0, 0, 0].imag) > tol * scale:
        raise ValueError("weight value is not real")
    for a, b, c, dd in _JET_KEYS:
        err = abs(d[a, b, c, dd] - np.conj(d[b, a, dd, c]))
        if err > tol * scale:
            raise ValueError(
                f"conjugate symmetry violated at index {(a, b, c, dd)}: {err:g}"
            )
    if d[1, 1, 0, 0].real <= 0:
        raise PositivityError("fiberwise Kahler positivity phi_zzb > 0 failed")


@dataclass(frozen=True)
class Scenario:
    """A weight scenario: catalog id (or custom closed forms) plus ranges.

    `twist_delta` switches on the auxiliary fiber weight delta/(1+|z|^2)
    of the twisting line bundle; zero means the trivial twist.
    """

    id: str
    c: float = 0.0
    eps: float = 0.0
    eta: float = 0.0
    twist_delta: float = 0.0
    s_max: float = DEFAULT_S_MAX
    exprs: tuple = None  # (affine, infinity) sympy weights for custom scenarios

    def potential(self, chart: str):
        if self.exprs is not None:
            return self.exprs[0] if chart == AFFINE else self.exprs[1]
        return _catalog_potential(self.id, self.c, self.eps, self.eta, chart)

    def twist(self, chart: str):
        if not self.twist_delta:
            return sp.Integer(0)
        return _catalog_twist(self.twist_delta, chart)

    def _check_base(self, s: complex):
        if abs(s) >= self.s_max:
            raise ScenarioError(
                f"base point |s| = {abs(s):g} outside the disk of radius {self.s_max:g}"
            )

    def jet(self, s: complex, x: FiberPoint) -> PotentialJet:
        """Full closed-form jet of the weight at (s, x)."""
        self._check_base(s)
        fn = _jet_evaluator(self.potential(x.chart), _JET_KEYS)
        vals = _eval_jet(fn, _JET_KEYS, complex(x.z), s)
        d = np.zeros((5, 5, 3, 3), dtype=complex)
        for key in _JET_KEYS:
            d[key] = vals[key]
        j = PotentialJet(d, x.chart)
        check_jet(j)
        return j

    def jet_field(self, s: complex, z, chart: str = AFFINE, keys=NODE_KEYS) -> PotentialJet:
        """Vectorized jet over an array of chart coordinates.

        Only the requested `keys` are filled; the rest stay zero.  Entries
        have the shape of `z` appended to the jet axes.
        """
        self._check_base(s)
        keys = tuple(keys)
        fn = _jet_evaluator(self.potential(chart), keys)
        vals = _eval_jet(fn, keys, z, s)
        shape = np.asarray(z).shape
        d = np.zeros((5, 5, 3, 3) + shape, dtype=complex)
        for key in keys:
            d[key] = vals[key]
        return PotentialJet(d, chart)

    def twist_jet(self, x: FiberPoint) -> np.ndarray:
        """Fiber derivatives psi_{a,b}, a+b <= 2, of the twist weight."""
        return self.twist_field(complex(x.z), x.chart)

    def twist_field(self, z, chart: str = AFFINE) -> np.ndarray:
        keys = tuple((a, b, 0, 0) for a in range(3) for b in range(3 - a))
        out = np.zeros((3, 3) + np.asarray(z).shape, dtype=complex)
        if not self.twist_delta:
            return out
        fn = _jet_evaluator(self.twist(chart), keys)
        vals = _eval_jet(fn, keys, z, 0.0)
        for key in keys:
            out[key[0], key[1]] = vals[key]
        return out

    def validate(self, m: int = 16):
        """Numerical positivity sweep over fiber grid x base disk."""
        t, _ = np.polynomial.legendre.leggauss(m)
        r = np.sqrt((1.0 - t) / (1.0 + t))
        phis = TWO_PI * np.arange(2 * m) / (2 * m)
        zgrid = np.concatenate([(r * np.exp(1j * ph)) for ph in phis])
        wgrid = np.array([0.0, 0.31, 0.44j, -0.52 + 0.23j], dtype=complex)
        radii = (0.0, 0.5, 0.999)
        angles = np.exp(1j * TWO_PI * np.arange(8) / 8)
        for rad in radii:
            for ang in angles:
                s = rad * self.s_max * ang
                for chart, grid in ((AFFINE, zgrid), (INFINITY, wgrid)):
                    j = self.jet_field(s, grid, chart, keys=((1, 1, 0, 0),))
                    lam = 2.0 * j[1, 1, 0, 0].real
                    if np.min(lam) <= 0:
                        raise PositivityError(
                            f"scenario {self.id!r} loses fiber positivity at "
                            f"s={s:.4g}, chart={chart}"
                        )
        return self


@lru_cache(maxsize=None)
def _catalog_cached(scenario_id, c, eps, eta, twist_delta, s_max):
    scn = Scenario(scenario_id, c=c, eps=eps, eta=eta,
                   twist_delta=twist_delta, s_max=s_max)
    return scn.validate()


def catalog(scenario_id: str, *, twist_delta: float = 0.0,
            s_max: float = DEFAULT_S_MAX, **params) -> Scenario:
    """Build a catalog scenario with defaults, validating positivity once.

    Parameters not used by the requested member are rejected.
    """
    if scenario_id not in CATALOG_IDS:
        raise ScenarioError(f"unknown scenario id {scenario_id!r}")
    used = {
        "static-fs": (),
        "gauss-scale": ("c",),
        "moebius-mix": ("eps",),
        "conformal-mix": ("c", "eps", "eta"),
    }[scenario_id]
    for name in params:
        if name not in used:
            raise ScenarioError(
                f"parameter {name!r} not accepted by scenario {scenario_id!r}"
            )
    if not (0 < s_max <= 1.0):
        raise ScenarioError("s_max must lie in (0, 1]")
    vals = {name: float(params.get(name, DEFAULT_PARAMS[name])) for name in used}
    return _catalog_cached(scenario_id, vals.get("c", 0.0), vals.get("eps", 0.0),
                           vals.get("eta", 0.0), float(twist_delta), float(s_max))


def scenario_list() -> list[str]:
    return list(CATALOG_IDS)


def custom_scenario(name: str, affine_expr, infinity_expr, *,
                    s_max: float = DEFAULT_S_MAX,
                    twist_delta: float = 0.0) -> Scenario:
    """Extension point: weight given by sympy expressions per chart.

    Expressions must use the symbols returned by :func:`weight_symbols`, be
    real (invariant under z<->zb, s<->sb conjugation) and fiberwise
    positive; positivity is checked numerically on a grid.
    """
    scn = Scenario(name, s_max=s_max, twist_delta=twist_delta,
                   exprs=(sp.sympify(affine_expr), sp.sympify(infinity_expr)))
    return scn.validate()


def weight_symbols():
    """The (z, zb, s, sb) symbols used by custom scenario expressions."""
    return _Z, _ZB, _S, _SB


# ---------------------------------------------------------------------------
# pointwise geometric operations (all broadcast over a trailing node axis)


def jet(scenario: Scenario, s: complex, x: FiberPoint) -> PotentialJet:
    return scenario.jet(s, x)


def fiber_density(j: PotentialJet):
    """Density lam with dv_X = lam dx dy in the active chart; lam = 2 phi_zzb."""
    lam = 2.0 * j[1, 1, 0, 0].real
    if np.min(lam) <= 0.0:
        raise PositivityError("non-positive fiber density")
    return lam


def horizontal_lift(j: PotentialJet, choice: str):
    """Coefficient a of the (1,0) lift d_s + a d_z of d_s.

    The omega-orthogonal choice is the unique lift annihilating the Kahler
    form against antiholomorphic fiber vectors.
    """
    if choice == PRODUCT:
        return np.zeros_like(j[0, 0, 0, 0])
    if choice == OMEGA_ORTHOGONAL:
        return -j[0, 1, 1, 0] / j[1, 1, 0, 0]
    raise ValueError(f"unknown horizontal choice {choice!r}")


def lift_fiber_derivatives(j: PotentialJet, choice: str):
    """(a, a_z, a_zb, a_sb) of the lift coefficient, from jets of order 3."""
    if choice == PRODUCT:
        zero = np.zeros_like(j[0, 0, 0, 0])
        return zero, zero, zero, zero
    A = j[0, 1, 1, 0]
    D = j[1, 1, 0, 0]
    a = -A / D
    a_z = -(j[1, 1, 1, 0] * D - A * j[2, 1, 0, 0]) / D**2
    a_zb = -(j[0, 2, 1, 0] * D - A * j[1, 2, 0, 0]) / D**2
    a_sb = -(j[0, 1, 1, 1] * D - A * j[1, 1, 0, 1]) / D**2
    return a, a_z, a_zb, a_sb


def omega_pair(j: PotentialJet, choice: str):
    """Kahler pairing omega(g^H, conj(g^H)) of the horizontal lift."""
    a = horizontal_lift(j, choice)
    ab = np.conj(a)
    return 1j * (j[0, 0, 1, 1] + a * j[1, 0, 0, 1] + ab * j[0, 1, 1, 0]
                 + a * ab * j[1, 1, 0, 0])


def omega_mixed(j: PotentialJet, choice: str):
    """Pairing omega(g^H, conj(w)) against the unit (1,0) fiber frame.

    The frame w = phi_zzb^{-1/2} d_z is normalized so that
    -i omega(w, conj(w)) = 1; with this normalization the two closed-form
    expressions for the leading curvature coefficient agree identically.
    """
    a = horizontal_lift(j, choice)
    D = j[1, 1, 0, 0]
    return 1j * (j[0, 1, 1, 0] + a * D) / np.sqrt(D.real)


def k_of_lift(j: PotentialJet, choice: str):
    """Half the logarithmic rate of the fiber volume along the lift.

    k(g^H) = (1/2) [ (d_s + a d_z) log lam + a_z ]; the trailing divergence
    term comes from the fiber flow of a d_z.  Vanishes identically for the
    omega-orthogonal choice on these fibrations.
    """
    a, a_z, _, _ = lift_fiber_derivatives(j, choice)
    D = j[1, 1, 0, 0]
    return 0.5 * (j[1, 1, 1, 0] / D + a * j[2, 1, 0, 0] / D + a_z)


def k_form(scenario: Scenario, s: complex, x: FiberPoint, choice: str):
    return complex(k_of_lift(scenario.jet(s, x), choice))


def tension(scenario: Scenario, s: complex, x: FiberPoint, choice: str):
    """Vertical projection of -[g^H, conj(g^H)], as (d_z, d_zb) components."""
    j = scenario.jet(s, x)
    a, _, a_zb, a_sb = lift_fiber_derivatives(j, choice)
    t_z = a_sb + np.conj(a) * a_zb
    return complex(t_z), complex(-np.conj(t_z))


@dataclass
class TangentCurvature:
    """Components of the fiber tangent bundle curvature over the total space.

    The curvature form of (TX, h) with |d_z|^2 = phi_zzb is
    -ddbar log phi_zzb; c00, c11, c10, c01 are its coefficients on
    dz^dzb, ds^dsb, dz^dsb and ds^dzb respectively.
    """

    c00: complex
    c11: complex
    c10: complex
    c01: complex


def tangent_curvature(j: PotentialJet) -> TangentCurvature:
    D = j[1, 1, 0, 0]
    D_z, D_zb = j[2, 1, 0, 0], j[1, 2, 0, 0]
    D_s, D_sb = j[1, 1, 1, 0], j[1, 1, 0, 1]
    c00 = -(j[2, 2, 0, 0] * D - D_z * D_zb) / D**2
    c11 = -(j[1, 1, 1, 1] * D - D_s * D_sb) / D**2
    c10 = -(j[2, 1, 0, 1] * D - D_z * D_sb) / D**2
    c01 = -(j[1, 2, 1, 0] * D - D_s * D_zb) / D**2
    return TangentCurvature(c00, c11, c10, c01)


def scalar_curvature(j: PotentialJet):
    """Scalar curvature of the fiber metric 2 phi_zzb |dz|^2."""
    D = j[1, 1, 0, 0]
    ddbar_log = j[2, 2, 0, 0] / D - j[2, 1, 0, 0] * j[1, 2, 0, 0] / D**2
    r = -2.0 * ddbar_log / D
    return r.real


def laplace_fiber(f_zzbar, j: PotentialJet):
    """Nonnegative fiber Laplacian applied to f, given d_z d_zb f."""
    return -2.0 * f_zzbar / j[1, 1, 0, 0]
