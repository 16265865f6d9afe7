"""Elements of L2([-pi/2, pi/2]) and their inner-product machinery.

Every function handled by the package is a trigonometric array-manifold
kernel ``scale * cos(omega * sin(theta))`` or ``scale * sin(omega * sin(theta))``,
optionally zeroed on a union of closed angle intervals (a support mask).
Keeping functions symbolic gives exact Bessel closed forms for unmasked
inner products and lets masked ones reduce, via product-to-sum identities,
to cached single-frequency integrals over the unmasked region.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, NumericalConsistencyError
from .numerics import QuadratureSpec, bessel_j0, integrate

__all__ = [
    "HALF_PI",
    "Trig",
    "SupportSet",
    "AngularFunction",
    "GridFunction",
    "inner_product",
    "inner_product_with_status",
    "inner_product_quadrature",
    "norm_sq",
    "mask",
    "projection_coefficients",
    "projection_residual",
    "RESIDUAL_CLAMP",
]

HALF_PI = math.pi / 2.0

# Squared-residual values within RESIDUAL_CLAMP of zero are reported as an
# exact zero; values below -RESIDUAL_CLAMP raise NumericalConsistencyError.
RESIDUAL_CLAMP = 1e-9


class Trig(enum.Enum):
    COSINE = "cos"
    SINE = "sin"


@dataclass(frozen=True)
class SupportSet:
    """Finite union of disjoint closed intervals inside [-pi/2, pi/2],
    kept sorted.  Hashable so kernel caches can key on it."""

    intervals: tuple[tuple[float, float], ...]

    def __init__(self, intervals: Iterable[Sequence[float]]) -> None:
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        for a, b in ivs:
            if not (-HALF_PI - 1e-12 <= a <= b <= HALF_PI + 1e-12):
                raise ContractError(
                    f"interval [{a}, {b}] is not inside [-pi/2, pi/2]"
                )
        for (_, b0), (a1, _) in zip(ivs[:-1], ivs[1:]):
            if a1 < b0:
                raise ContractError("support intervals must be pairwise disjoint")
        ivs = [(max(a, -HALF_PI), min(b, HALF_PI)) for a, b in ivs]
        object.__setattr__(self, "intervals", tuple(ivs))

    @classmethod
    def empty(cls) -> "SupportSet":
        return cls(())

    @classmethod
    def full(cls) -> "SupportSet":
        return cls(((-HALF_PI, HALF_PI),))

    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def is_empty(self) -> bool:
        return self.measure() == 0.0

    def complement(self) -> "SupportSet":
        """Closure of [-pi/2, pi/2] minus this set (zero-width gaps dropped)."""
        out = []
        cursor = -HALF_PI
        for a, b in self.intervals:
            if a > cursor:
                out.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < HALF_PI:
            out.append((cursor, HALF_PI))
        return SupportSet(out)

    def union(self, other: "SupportSet") -> "SupportSet":
        ivs = sorted(self.intervals + other.intervals)
        merged: list[tuple[float, float]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return SupportSet(merged)

    def contains(self, theta: np.ndarray) -> np.ndarray:
        """Boolean membership mask, elementwise over ``theta``."""
        theta = np.asarray(theta, dtype=float)
        inside = np.zeros(theta.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (theta >= a) & (theta <= b)
        return inside

    def boundary_points(self) -> list[float]:
        pts: list[float] = []
        for a, b in self.intervals:
            pts.extend((a, b))
        return pts


@dataclass(frozen=True)
class AngularFunction:
    """scale * trig(omega * sin(theta)), zeroed on ``mask`` when present.

    ``mask`` is the zero set: the function equals its trig kernel outside the
    mask and 0 on it (the image of the support-information projection).
    A SINE kernel with omega=0 is the zero function.
    """

    trig: Trig
    omega: float
    mask: SupportSet | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.omega) or self.omega < 0.0:
            raise ContractError(f"omega must be finite and >= 0, got {self.omega}")
        if not math.isfinite(self.scale):
            raise ContractError("scale must be finite")
        if self.mask is not None and self.mask.is_empty():
            object.__setattr__(self, "mask", None)

    def is_zero(self) -> bool:
        if self.scale == 0.0:
            return True
        if self.trig is Trig.SINE and self.omega == 0.0:
            return True
        return self.mask is not None and self.mask.measure() >= math.pi

    def live_region(self) -> SupportSet:
        """Where the function may be nonzero (complement of the mask)."""
        if self.mask is None:
            return SupportSet.full()
        return self.mask.complement()

    def kernel_values(self, theta: np.ndarray) -> np.ndarray:
        """Trig kernel without mask handling (used by piecewise integrators)."""
        theta = np.asarray(theta, dtype=float)
        arg = self.omega * np.sin(theta)
        vals = np.cos(arg) if self.trig is Trig.COSINE else np.sin(arg)
        return self.scale * vals

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        vals = self.kernel_values(theta)
        if self.mask is not None:
            vals = np.where(self.mask.contains(theta), 0.0, vals)
        return vals


@dataclass(frozen=True)
class GridFunction:
    """Uniformly sampled function values; plotting/oracle plumbing only."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ContractError("GridFunction needs at least 3 nodes")
        if values.shape != nodes.shape:
            raise ContractError("nodes and values must have matching shapes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, f: AngularFunction, n: int = 1024) -> "GridFunction":
        nodes = np.linspace(-HALF_PI, HALF_PI, n)
        return cls(nodes, f.evaluate(nodes))


# ---------------------------------------------------------------------------
# Inner products
# ---------------------------------------------------------------------------
#
# Unmasked closed forms over the full interval, via product-to-sum plus
#   int cos(w sin t) dt = pi * J0(w),   int sin(w sin t) dt = 0:
#   <cos(a s), cos(b s)> = (pi/2) (J0(a-b) + J0(a+b))
#   <sin(a s), sin(b s)> = (pi/2) (J0(a-b) - J0(a+b))
#   <cos(a s), sin(b s)> = 0                      (odd integrand)
# Masked pairs use the same decomposition with the single-frequency integrals
# taken over the common live region instead of the full interval; those
# integrals are cached per (frequency, interval, quadrature) key.


@lru_cache(maxsize=None)
def _live_cos_integral(omega: float, a: float, b: float,
                       quad: QuadratureSpec) -> tuple[float, bool]:
    res = integrate(lambda t: np.cos(omega * np.sin(t)), a, b, quad)
    return res.value, res.converged


@lru_cache(maxsize=None)
def _live_sin_integral(omega: float, a: float, b: float,
                       quad: QuadratureSpec) -> tuple[float, bool]:
    if omega == 0.0:
        return 0.0, True
    res = integrate(lambda t: np.sin(omega * np.sin(t)), a, b, quad)
    return res.value, res.converged


def _region_cos(omega: float, live: SupportSet, quad: QuadratureSpec) -> tuple[float, bool]:
    omega = abs(omega)  # cosine integrand is even in omega
    total, ok = 0.0, True
    for a, b in live.intervals:
        v, conv = _live_cos_integral(omega, a, b, quad)
        total += v
        ok &= conv
    return total, ok


def _region_sin(omega: float, live: SupportSet, quad: QuadratureSpec) -> tuple[float, bool]:
    sign = -1.0 if omega < 0.0 else 1.0  # sine integrand is odd in omega
    total, ok = 0.0, True
    for a, b in live.intervals:
        v, conv = _live_sin_integral(abs(omega), a, b, quad)
        total += v
        ok &= conv
    return sign * total, ok


def _full_interval_pair(f: AngularFunction, g: AngularFunction) -> float:
    a, b = f.omega, g.omega
    if f.trig is not g.trig:
        return 0.0
    if f.trig is Trig.COSINE:
        return (math.pi / 2.0) * (bessel_j0(a - b) + bessel_j0(a + b))
    return (math.pi / 2.0) * (bessel_j0(a - b) - bessel_j0(a + b))


def _joint_live_region(f: AngularFunction, g: AngularFunction) -> SupportSet:
    """Complement of the union of both functions' masks."""
    combined = f.mask if f.mask is not None else SupportSet.empty()
    if g.mask is not None:
        combined = combined.union(g.mask)
    return combined.complement()


def inner_product_with_status(
    f: AngularFunction,
    g: AngularFunction,
    quad: QuadratureSpec = QuadratureSpec(),
) -> tuple[float, bool]:
    """<f, g> plus a convergence flag for any quadrature involved."""
    if f.is_zero() or g.is_zero():
        return 0.0, True
    scale = f.scale * g.scale
    if f.mask is None and g.mask is None:
        return scale * _full_interval_pair(f, g), True

    live = _joint_live_region(f, g)
    if live.is_empty():
        return 0.0, True

    # product-to-sum on the live region
    if f.trig is g.trig:
        c_minus, ok1 = _region_cos(f.omega - g.omega, live, quad)
        c_plus, ok2 = _region_cos(f.omega + g.omega, live, quad)
        sign = 1.0 if f.trig is Trig.COSINE else -1.0
        return scale * 0.5 * (c_minus + sign * c_plus), ok1 and ok2
    # one cosine, one sine: cos(a s) sin(b s) = (sin((a+b)s) - sin((a-b)s))/2
    if f.trig is Trig.COSINE:
        a, b = f.omega, g.omega
    else:
        a, b = g.omega, f.omega
    s_plus, ok1 = _region_sin(a + b, live, quad)
    s_minus, ok2 = _region_sin(a - b, live, quad)
    return scale * 0.5 * (s_plus - s_minus), ok1 and ok2


def inner_product(
    f: AngularFunction,
    g: AngularFunction,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """L2 inner product over [-pi/2, pi/2].

    Unmasked pairs evaluate through the exact J0 closed forms; pairs with a
    mask integrate over the common live region with panel breaks at every
    mask boundary.
    """
    value, _ = inner_product_with_status(f, g, quad)
    return value


def inner_product_quadrature(
    f: AngularFunction,
    g: AngularFunction,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Reference path: direct adaptive quadrature of the pointwise product.

    Used by tests to validate the closed-form/cached fast paths; never used
    in the hot assembly loops.
    """
    live = _joint_live_region(f, g)
    total = 0.0
    for a, b in live.intervals:
        res = integrate(lambda t: f.kernel_values(t) * g.kernel_values(t), a, b, quad)
        total += res.value
    return total


def norm_sq(f: AngularFunction, quad: QuadratureSpec = QuadratureSpec()) -> float:
    return inner_product(f, f, quad)


def mask(f: AngularFunction, c_s: SupportSet) -> AngularFunction:
    """Support-information projection: zero on ``c_s``, unchanged outside.

    Composing masks is out of scope; masking an already-masked function
    raises ContractError.
    """
    if f.mask is not None:
        raise ContractError("function is already masked; composed masks are unsupported")
    if c_s.is_empty():
        return f
    return AngularFunction(trig=f.trig, omega=f.omega, mask=c_s, scale=f.scale)


# ---------------------------------------------------------------------------
# Projection onto a finite span
# ---------------------------------------------------------------------------


def _gather_z(basis: Sequence[AngularFunction], y: AngularFunction,
              quad: QuadratureSpec) -> np.ndarray:
    return np.array([inner_product(x, y, quad) for x in basis])


def projection_coefficients(
    basis: Sequence[AngularFunction],
    G_pinv: np.ndarray,
    y: AngularFunction,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """Coefficients alpha = G^+ z of the projection of y onto span(basis)."""
    G_pinv = np.asarray(G_pinv, dtype=float)
    if G_pinv.shape != (len(basis), len(basis)):
        raise ContractError(
            f"G_pinv shape {G_pinv.shape} does not match basis size {len(basis)}"
        )
    return G_pinv @ _gather_z(basis, y, quad)


def clamp_residual_sq(rad: float, clamp: float = RESIDUAL_CLAMP) -> float:
    """Apply the residual clamp to a squared-residual value.

    Values in [-clamp, clamp] are floating-point-indistinguishable from zero
    and collapse to 0; values below -clamp indicate an inconsistent
    pseudo-inverse and raise.
    """
    if rad < -clamp:
        raise NumericalConsistencyError(
            f"squared residual {rad:.3e} is negative beyond the clamp tolerance "
            f"{clamp:.1e}; the pseudo-inverse cutoff is too aggressive for this "
            "Gram matrix"
        )
    if abs(rad) <= clamp:
        return 0.0
    return rad


def projection_residual(
    y: AngularFunction,
    basis: Sequence[AngularFunction],
    G_pinv: np.ndarray,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Distance from y to span(basis): sqrt(||y||^2 - z^T G^+ z)."""
    G_pinv = np.asarray(G_pinv, dtype=float)
    if G_pinv.shape != (len(basis), len(basis)):
        raise ContractError(
            f"G_pinv shape {G_pinv.shape} does not match basis size {len(basis)}"
        )
    z = _gather_z(basis, y, quad)
    rad = norm_sq(y, quad) - float(z @ (G_pinv @ z))
    return math.sqrt(clamp_residual_sq(rad))
