"""Transition-rate nonlinearity and its C3 cutoff.

A growth law f on [0, inf) is frozen above a level controlled by gamma: the
cutoff agrees with f up to 1/(2*gamma), equals f(1/gamma) from 1/gamma on,
and bridges the two regions with the degree-7 Hermite interpolant matching
value and three derivatives on both sides (zero derivatives on the constant
side), the minimal-degree polynomial giving C3 junctions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["GrowthSpec", "CutoffFunction", "cutoff_build", "cutoff_eval", "c3_norm"]

_FAMILIES = ("power", "rational", "identity", "constant")


@dataclass(frozen=True)
class GrowthSpec:
    """C3 growth law on [0, inf) with a declared polynomial bound exponent.

    Families: power  a * r**p  (p in {1, 2} or p >= 3 so that f is C3 at 0),
              rational  r / (1 + r),
              identity  r,
              constant  a.
    The declared exponent m bounds the C3 norm on [0, M] by M**m for large M.
    """

    family: str
    scale: float = 1.0
    power: float = 1.0
    bound_exponent: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown growth family '{self.family}'")
        if self.family == "power":
            p = self.power
            if not (p in (1.0, 2.0) or p >= 3.0):
                raise ConfigError(
                    "power family is C3 at the origin only for p in {1, 2} or p >= 3, "
                    f"got p={p}")
            if self.scale <= 0.0:
                raise ConfigError("power family needs scale > 0")
        if self.family == "constant" and self.scale < 0.0:
            raise ConfigError("constant family must be nonnegative")
        if self.m <= 0.0:
            raise ConfigError(f"bound exponent must be > 0, got {self.m}")
        self.check_growth_bound()

    @property
    def m(self) -> float:
        if self.bound_exponent is not None:
            return self.bound_exponent
        return {"power": self.power, "rational": 1.0,
                "identity": 1.0, "constant": 1.0}[self.family]

    def eval(self, r, order: int = 0):
        """f or one of its first three derivatives, vectorized over r >= 0."""
        r = np.asarray(r, dtype=float)
        if order not in (0, 1, 2, 3):
            raise ValueError(f"derivative order must be in 0..3, got {order}")
        if self.family == "constant":
            return np.full_like(r, self.scale) if order == 0 else np.zeros_like(r)
        if self.family == "identity":
            if order == 0:
                return r.copy()
            return np.full_like(r, 1.0) if order == 1 else np.zeros_like(r)
        if self.family == "rational":
            g = 1.0 + r
            return {0: r / g, 1: g ** -2.0, 2: -2.0 * g ** -3.0,
                    3: 6.0 * g ** -4.0}[order]
        a, p = self.scale, self.power
        coeff = a
        for k in range(order):
            coeff *= p - k
        expo = p - order
        if coeff == 0.0:
            return np.zeros_like(r)
        with np.errstate(divide="ignore"):
            out = coeff * np.where((r == 0.0) & (expo < 0.0), 0.0, r ** expo)
        return out

    def check_growth_bound(self, levels=(10.0, 100.0, 1000.0), grid: int = 2000):
        """Verify sup of |f|..|f'''| on [0, M] against M**m for each level M."""
        for M in levels:
            r = np.linspace(0.0, M, grid)
            sup = max(float(np.max(np.abs(self.eval(r, k)))) for k in range(4))
            if sup > M ** self.m * (1.0 + 1e-12):
                raise ConfigError(
                    f"declared bound exponent m={self.m} fails at M={M}: "
                    f"C3 sup {sup:.3e} > M^m = {M ** self.m:.3e}")


class CutoffFunction:
    """Growth law frozen above 1/gamma with a C3 septic bridge.

    Exact equality with f below 1/(2*gamma) and with f(1/gamma) above
    1/gamma come from sharing those code paths, not from approximation.
    Immutable after construction; safe for concurrent evaluation.
    """

    def __init__(self, growth: GrowthSpec, gamma: float):
        if gamma <= 0.0:
            raise ConfigError(f"cutoff level gamma must be > 0, got {gamma}")
        self.growth = growth
        self.gamma = float(gamma)
        self.lo = 1.0 / (2.0 * gamma)
        self.hi = 1.0 / gamma
        self.cap = float(growth.eval(self.hi, 0))
        h = self.hi - self.lo
        self._h = h
        # monomial coefficients in t = (r - lo)/h; left block pinned by f,
        # right block solved from the four conditions at t = 1
        c = np.zeros(8)
        fact = 1.0
        for k in range(4):
            if k:
                fact *= k
            c[k] = float(growth.eval(self.lo, k)) * h ** k / fact
        A = np.zeros((4, 4))
        rhs = np.zeros(4)
        for row, order in enumerate(range(4)):
            for k in range(8):
                coeff = 1.0
                for i in range(order):
                    coeff *= k - i
                if k >= 4:
                    A[row, k - 4] = coeff
                else:
                    rhs[row] -= coeff * c[k]
        rhs[0] += self.cap
        c[4:] = np.linalg.solve(A, rhs)
        self.blend_coeffs = c
        self._deriv_coeffs = [c]
        for _ in range(3):
            prev = self._deriv_coeffs[-1]
            self._deriv_coeffs.append(np.polynomial.polynomial.polyder(prev))

    def eval(self, r, order: int = 0):
        """Cutoff value or derivative (orders 0..3), vectorized over r >= 0."""
        if order not in (0, 1, 2, 3):
            raise ValueError(f"unsupported derivative order {order} (max 3)")
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("cutoff domain is r >= 0")
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        below = r <= self.lo
        above = r >= self.hi
        mid = ~below & ~above
        if np.any(below):
            out[below] = self.growth.eval(r[below], order)
        if np.any(above):
            out[above] = self.cap if order == 0 else 0.0
        if np.any(mid):
            t = (r[mid] - self.lo) / self._h
            poly = np.polynomial.polynomial.polyval(t, self._deriv_coeffs[order])
            out[mid] = poly / self._h ** order
        return float(out[0]) if scalar else out

    def __call__(self, r, order: int = 0):
        return self.eval(r, order)


def cutoff_build(growth: GrowthSpec, gamma: float) -> CutoffFunction:
    """Construct the C3 cutoff of a growth law at level gamma."""
    return CutoffFunction(growth, gamma)


def cutoff_eval(cut: CutoffFunction, r, order: int = 0):
    """Evaluate a cutoff (or derivative of order <= 3) at r >= 0."""
    return cut.eval(r, order)


def c3_norm(cut: CutoffFunction, points_per_region: int = 4001) -> float:
    """Dense-grid estimate of sup over r of max(|f_g|, |f_g'|, |f_g''|, |f_g'''|)."""
    grid = np.concatenate([
        np.linspace(0.0, cut.lo, points_per_region),
        np.linspace(cut.lo, cut.hi, points_per_region),
        np.linspace(cut.hi, 2.0 * cut.hi, 17),
    ])
    sup = 0.0
    for order in range(4):
        sup = max(sup, float(np.max(np.abs(cut.eval(grid, order)))))
    return sup
