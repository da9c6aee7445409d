"""Radial interaction kernels: inverse-power family, truncation, mollification.

The singular family is B(r) = C * r**(-theta).  Its truncation caps the value
inside radius eta, and the mollified kernel convolves either the raw or the
truncated kernel with a smooth compactly supported radial bump of width eta
(raw for theta < d-2, truncated for theta = d-2).  Mollified kernels are
tabulated radially with first and second radial derivatives obtained by
differentiating under the quadrature; beyond a far-field radius the analytic
unmollified kernel is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi

from .errors import ConfigError, QuadratureError

__all__ = [
    "RieszSpec",
    "GaussianSpec",
    "InteractionMatrix",
    "MollifierSpec",
    "TabulatedKernel",
    "riesz_eval",
    "truncated_eval",
    "build_mollified",
    "build_gaussian",
    "kernel_value",
    "kernel_gradient",
    "kernel_hessian",
]


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1}."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# ---------------------------------------------------------------------------
# Kernel specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RieszSpec:
    """Inverse-power kernel B(r) = coefficient * r**(-exponent).

    Requires an integer dimension >= 3 and 0 < exponent <= dimension - 2.
    """

    dimension: int
    exponent: float
    coefficient: float = 1.0

    def __post_init__(self):
        if self.dimension < 3:
            raise ConfigError(
                f"singular kernels need dimension >= 3, got {self.dimension}")
        if not 0.0 < self.exponent <= self.dimension - 2:
            raise ConfigError(
                f"exponent must lie in (0, d-2] = (0, {self.dimension - 2}], "
                f"got {self.exponent}")
        if self.coefficient <= 0.0:
            raise ConfigError(f"coefficient must be > 0, got {self.coefficient}")

    @property
    def at_endpoint(self) -> bool:
        """True when exponent == d-2, the case that is truncated before mollifying."""
        return abs(self.exponent - (self.dimension - 2)) < 1e-12


@dataclass(frozen=True)
class GaussianSpec:
    """Bounded bell-shaped test kernel A * exp(-r^2 / (2 w^2)), any dimension >= 1."""

    dimension: int
    amplitude: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dimension}")
        if self.amplitude <= 0.0 or self.width <= 0.0:
            raise ConfigError("amplitude and width must be > 0")


@dataclass(frozen=True)
class InteractionMatrix:
    """Species-pair interaction topology: an n x n table of kernel specs."""

    n: int
    pairs: tuple  # tuple of n tuples of RieszSpec/GaussianSpec

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"species count must be >= 1, got {self.n}")
        if len(self.pairs) != self.n or any(len(row) != self.n for row in self.pairs):
            raise ConfigError("interaction table must be n x n and fully populated")
        dims = {s.dimension for row in self.pairs for s in row}
        if len(dims) != 1:
            raise ConfigError(f"all pair specs must share one dimension, got {dims}")

    @classmethod
    def uniform(cls, n: int, spec) -> "InteractionMatrix":
        return cls(n=n, pairs=tuple(tuple(spec for _ in range(n)) for _ in range(n)))

    @property
    def dimension(self) -> int:
        return self.pairs[0][0].dimension

    @property
    def max_exponent(self) -> float:
        """sup over pairs of the singular exponent (0.0 for bounded pairs)."""
        return max(getattr(s, "exponent", 0.0) for row in self.pairs for s in row)

    def __getitem__(self, ij):
        i, j = ij
        return self.pairs[i][j]


# ---------------------------------------------------------------------------
# Pointwise evaluation of the analytic kernels
# ---------------------------------------------------------------------------

def riesz_eval(spec: RieszSpec, r) -> float | np.ndarray:
    """B(r) = C * r**(-theta); raises on r <= 0 (singular at the origin)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ConfigError("inverse-power kernel is singular: r must be > 0")
    out = spec.coefficient * r ** (-spec.exponent)
    return float(out) if out.ndim == 0 else out


def truncated_eval(spec: RieszSpec, eta: float, r) -> float | np.ndarray:
    """Truncated kernel: B(r) for r >= eta, frozen at B(eta) for r < eta."""
    if eta <= 0.0:
        raise ConfigError(f"truncation radius must be > 0, got {eta}")
    r = np.asarray(r, dtype=float)
    out = spec.coefficient * np.maximum(r, eta) ** (-spec.exponent)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Mollifier
# ---------------------------------------------------------------------------

def _bump(t):
    """Standard bump exp(-1/(1-t^2)) on |t| < 1, 0 outside (unnormalized)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


def _bump_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    w = 1.0 / (1.0 - ti * ti)
    out[inside] = np.exp(-w) * (-2.0 * ti * w * w)
    return out


def _bump_d1_over_t(t):
    """bump'(t)/t, finite at t = 0 (equals bump''(0))."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    w = 1.0 / (1.0 - ti * ti)
    out[inside] = np.exp(-w) * (-2.0 * w * w)
    return out


def _bump_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    w = 1.0 / (1.0 - ti * ti)
    t2 = ti * ti
    out[inside] = np.exp(-w) * (4.0 * t2 * w ** 4 - 2.0 * w * w - 8.0 * t2 * w ** 3)
    return out


_PROFILES = {"bump": (_bump, _bump_d1, _bump_d2, _bump_d1_over_t)}


@dataclass(frozen=True)
class MollifierSpec:
    """Smooth nonnegative radial unit-mass bump rescaled to width eta."""

    eta: float
    profile: str = "bump"
    quad_nodes: int = 16  # Gauss-Legendre nodes per quadrature panel

    def __post_init__(self):
        if self.eta <= 0.0:
            raise ConfigError(f"mollifier scale must be > 0, got {self.eta}")
        if self.profile not in _PROFILES:
            raise ConfigError(f"unknown mollifier profile '{self.profile}'")
        if self.quad_nodes < 4:
            raise ConfigError("quad_nodes must be >= 4")

    def normalization(self, d: int) -> float:
        """Constant making the profile integrate to 1 over R^d."""
        f = _PROFILES[self.profile][0]
        x, w = _panel_gauss(np.linspace(0.0, 1.0, 9), 64)
        radial = float(np.sum(w * f(x) * x ** (d - 1)))
        return 1.0 / (sphere_area(d) * radial)

    def mass(self, d: int) -> float:
        """Numerical mass of the normalized mollifier (should be 1)."""
        f = _PROFILES[self.profile][0]
        x, w = _panel_gauss(np.linspace(0.0, 1.0, 17), 48)
        radial = float(np.sum(w * f(x) * x ** (d - 1)))
        return sphere_area(d) * self.normalization(d) * radial


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------

_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int):
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = leggauss(n)
    return _LEGGAUSS_CACHE[n]


def _panel_gauss(edges, n: int):
    """Gauss-Legendre nodes/weights on consecutive panels given by `edges`."""
    edges = np.asarray(edges, dtype=float)
    x0, w0 = _leggauss(n)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    x = 0.5 * (b - a) * x0[None, :] + 0.5 * (b + a)
    w = 0.5 * (b - a) * w0[None, :]
    return x.ravel(), w.ravel()


def _graded_edges(a: float, b: float, kinks, levels: int = 12, coarse: int = 4):
    """Panel edges on [a, b], geometrically refined towards each kink point."""
    pts = set(np.linspace(a, b, coarse + 1).tolist())
    for c in kinks:
        if not (a < c < b):
            continue
        pts.add(c)
        gap = min(c - a, b - c)
        for j in range(1, levels + 1):
            h = gap * 0.5 ** j
            for p in (c - h, c + h):
                if a < p < b:
                    pts.add(p)
    return np.array(sorted(pts))


def _profile_edges(eta: float, levels: int = 12) -> np.ndarray:
    """Edges on [0, eta] resolving the bump derivatives' layer at the support edge."""
    base = np.linspace(0.0, eta, 5)
    layer = eta * (1.0 - 2.0 ** -np.arange(1.0, levels + 1.0))
    return np.unique(np.concatenate([base, layer]))


# ---------------------------------------------------------------------------
# Stable power differences for the d = 3 reduction
#
# With q = 2 - theta and p = 1 - theta, the radial convolution against the raw
# kernel reduces to integrals of
#   D0 = A/r,  D1 = Bh/r - A/r^2,  D2 = Ch/r - 2 Bh/r^2 + 2 A/r^3,
# where A, Bh, Ch are differences of the antiderivative H(u) = C u^q / q, of
# h(u) = C u^p, and of h'(u) = C p u^(p-1) at u = r+s and |r-s|.  Direct
# evaluation cancels catastrophically for small radius ratios, so each branch
# switches to a combined binomial series below `_SERIES_SWITCH`.
# ---------------------------------------------------------------------------

_SERIES_SWITCH = 0.25
_SERIES_TERMS = 16


def _binom(q: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (q - i) / (i + 1)
    return out


class _RawReduction3d:
    """D0/D1/D2 integrand factors for the raw kernel in dimension 3."""

    def __init__(self, C: float, theta: float):
        self.C = C
        self.theta = theta
        self.q = 2.0 - theta
        self.p = 1.0 - theta
        q, p = self.q, self.p
        # r <= s branch, series in x = r/s
        self.g0 = np.array([2.0 * _binom(q, j + 1) for j in range(0, 2 * _SERIES_TERMS, 2)])
        self.g1 = np.array([2.0 * (_binom(p, j + 1) - _binom(q, j + 2) / q)
                            for j in range(1, 2 * _SERIES_TERMS, 2)])
        self.g2 = np.array([2.0 * p * _binom(p - 1.0, j + 1) - 4.0 * _binom(p, j + 2)
                            + 4.0 / q * _binom(q, j + 3)
                            for j in range(0, 2 * _SERIES_TERMS, 2)])
        # r > s branch, series in y = s/r (odd powers only)
        self.h0 = np.array([2.0 * _binom(q, k) for k in range(1, 2 * _SERIES_TERMS, 2)])
        self.h1 = np.array([2.0 * (_binom(p, k) - _binom(q, k) / q)
                            for k in range(1, 2 * _SERIES_TERMS, 2)])
        self.h2 = np.array([2.0 * p * _binom(p - 1.0, k) - 4.0 * _binom(p, k)
                            + 4.0 / q * _binom(q, k)
                            for k in range(1, 2 * _SERIES_TERMS, 2)])

    @staticmethod
    def _poly_even(coeffs, x):
        # sum_j coeffs[j] * x**(2j)
        return np.polynomial.polynomial.polyval(x * x, coeffs)

    def d0_d1_d2(self, r: float, s: np.ndarray):
        """Return (D0, D1, D2) arrays over quadrature nodes s for one radius r."""
        C, q, p, theta = self.C, self.q, self.p, self.theta
        D0 = np.empty_like(s)
        D1 = np.empty_like(s)
        D2 = np.empty_like(s)

        lo = s >= r  # branch r <= s, ratio x = r/s
        if np.any(lo):
            ss = s[lo]
            x = r / ss
            small = x < _SERIES_SWITCH
            G0 = np.empty_like(x)
            G1 = np.empty_like(x)
            G2 = np.empty_like(x)
            if np.any(small):
                xs = x[small]
                G0[small] = self._poly_even(self.g0, xs)
                G1[small] = xs * self._poly_even(self.g1, xs)
                G2[small] = self._poly_even(self.g2, xs)
            big = ~small
            if np.any(big):
                xb = x[big]
                op, om = 1.0 + xb, 1.0 - xb
                Pq = op ** q - om ** q
                Qp = op ** p + om ** p
                Pp1 = op ** (p - 1.0) - om ** (p - 1.0)
                G0[big] = Pq / xb
                G1[big] = Qp / xb - Pq / (q * xb * xb)
                G2[big] = p * Pp1 / xb - 2.0 * Qp / (xb * xb) + 2.0 * Pq / (q * xb ** 3)
            D0[lo] = (C / q) * ss ** (q - 1.0) * G0
            D1[lo] = C * ss ** (p - 1.0) * G1
            D2[lo] = C * ss ** (p - 2.0) * G2

        hi = ~lo  # branch r > s, ratio y = s/r
        if np.any(hi):
            ss = s[hi]
            y = ss / r
            small = y < _SERIES_SWITCH
            H0 = np.empty_like(y)
            H1 = np.empty_like(y)
            H2 = np.empty_like(y)
            if np.any(small):
                ysm = y[small]
                H0[small] = ysm * self._poly_even(self.h0, ysm)
                H1[small] = ysm * self._poly_even(self.h1, ysm)
                H2[small] = ysm * self._poly_even(self.h2, ysm)
            big = ~small
            if np.any(big):
                yb = y[big]
                op, om = 1.0 + yb, 1.0 - yb
                Pq = op ** q - om ** q
                Pp = op ** p - om ** p
                Pp1 = op ** (p - 1.0) - om ** (p - 1.0)
                H0[big] = Pq
                H1[big] = Pp - Pq / q
                H2[big] = p * Pp1 - 2.0 * Pp + 2.0 * Pq / q
            D0[hi] = (C / q) * r ** (q - 1.0) * H0
            D1[hi] = C * r ** (p - 1.0) * H1
            D2[hi] = C * r ** (p - 2.0) * H2
        return D0, D1, D2

    def d2_regular(self, r: float, s: np.ndarray):
        """D2 with the |r-s|^(-theta) singular term removed (for tip panels)."""
        C, q, p = self.C, self.q, self.p
        u2 = r + s
        A = (C / q) * (u2 ** q - np.abs(r - s) ** q)
        Bh = C * (u2 ** p - np.sign(r - s) * np.abs(r - s) ** p)
        Ch_reg = C * p * u2 ** (p - 1.0)
        return Ch_reg / r - 2.0 * Bh / r ** 2 + 2.0 * A / r ** 3

    def d2_singular_coeff(self, r: float) -> float:
        """Coefficient of |r-s|^(-theta) in D2 near s = r."""
        return -self.C * self.p / r


class _TruncReduction3d:
    """D0/D1/D2 integrand factors for the truncated kernel (theta = 1, d = 3)."""

    def __init__(self, C: float, eta: float):
        self.C = C
        self.eta = eta

    def _H(self, u):
        C, eta = self.C, self.eta
        return np.where(u <= eta, C * u * u / (2.0 * eta), C * (u - 0.5 * eta))

    def _h(self, w):
        C, eta = self.C, self.eta
        return np.where(np.abs(w) <= eta, C * w / eta, C * np.sign(w))

    def _hp(self, w):
        C, eta = self.C, self.eta
        return np.where(np.abs(w) < eta, C / eta, 0.0)

    def d0_d1_d2(self, r: float, s: np.ndarray):
        u2 = r + s
        u1 = np.abs(r - s)
        A = self._H(u2) - self._H(u1)
        Bh = self._h(u2) - self._h(r - s)
        Ch = self._hp(u2) - self._hp(r - s)
        D0 = A / r
        D1 = Bh / r - A / r ** 2
        D2 = Ch / r - 2.0 * Bh / r ** 2 + 2.0 * A / r ** 3
        return D0, D1, D2


# ---------------------------------------------------------------------------
# Tabulated kernel
# ---------------------------------------------------------------------------

class TabulatedKernel:
    """Radially tabulated kernel with first/second radial derivatives.

    Inside `r_far` evaluation interpolates the table with cubic splines (exact
    at the abscissae); beyond it the analytic far-field closures are used.
    Instances are immutable after construction and safe to share across
    workers.
    """

    def __init__(self, r, val, d1, d2, r_far, far_value, far_d1, far_d2,
                 *, eta, theta, dimension, quad_error=0.0):
        self.r = np.asarray(r, dtype=float)
        self.val = np.asarray(val, dtype=float)
        self.d1 = np.asarray(d1, dtype=float)
        self.d2 = np.asarray(d2, dtype=float)
        self.r_far = float(r_far)
        self.far_value = far_value
        self.far_d1 = far_d1
        self.far_d2 = far_d2
        self.eta = eta
        self.theta = theta
        self.dimension = dimension
        self.quad_error = quad_error
        self._sp_val = CubicSpline(self.r, self.val, bc_type=((1, 0.0), "not-a-knot"))
        self._sp_d1 = CubicSpline(self.r, self.d1)
        self._sp_d2 = CubicSpline(self.r, self.d2)
        # flat coefficient arrays for the fused value+slope fast path
        self._breaks = self._sp_val.x
        self._cval = self._sp_val.c
        self._cd1 = self._sp_d1.c

    # -- scalar/array radial evaluation ------------------------------------

    def _eval(self, r, spline, far_fn):
        arr = np.abs(np.asarray(r, dtype=float))
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        out = np.asarray(spline(np.minimum(arr, self.r_far)))
        far = arr > self.r_far
        if np.any(far):
            out[far] = far_fn(arr[far])
        return float(out[0]) if scalar else out

    def value(self, r):
        return self._eval(r, self._sp_val, self.far_value)

    def slope(self, r):
        return self._eval(r, self._sp_d1, self.far_d1)

    def curvature(self, r):
        return self._eval(r, self._sp_d2, self.far_d2)

    def value_and_slope(self, r):
        """Fused table lookup used by the pairwise interaction loops."""
        r = np.asarray(r, dtype=float)
        rc = np.minimum(r, self.r_far)
        idx = np.searchsorted(self._breaks, rc, side="right") - 1
        np.clip(idx, 0, len(self._breaks) - 2, out=idx)
        t = rc - self._breaks[idx]
        cv = self._cval[:, idx]
        v = ((cv[0] * t + cv[1]) * t + cv[2]) * t + cv[3]
        cs = self._cd1[:, idx]
        s = ((cs[0] * t + cs[1]) * t + cs[2]) * t + cs[3]
        far = r > self.r_far
        if np.any(far):
            v[far] = self.far_value(r[far])
            s[far] = self.far_d1(r[far])
        return v, s

    # -- sup norms over the table (scaling diagnostics) ---------------------

    def sup_value(self) -> float:
        return float(np.max(np.abs(self.val)))

    def sup_gradient(self) -> float:
        return float(np.max(np.abs(self.d1)))

    def sup_hessian(self) -> float:
        # radial and tangential eigenvalue channels of the radial Hessian
        tang = np.empty_like(self.d1)
        tang[0] = self.d2[0]
        tang[1:] = self.d1[1:] / self.r[1:]
        return float(max(np.max(np.abs(self.d2)), np.max(np.abs(tang))))


def kernel_value(tab: TabulatedKernel, x):
    """Kernel value at x (a point or an array of points, last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    return tab.value(r)


def kernel_gradient(tab: TabulatedKernel, x):
    """Radial gradient slope(r) * x/r; the zero vector at the origin."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    safe = np.where(r > 0.0, r, 1.0)
    w = np.where(r > 0.0, np.atleast_1d(tab.slope(safe)) / safe, 0.0)
    out = w[:, None] * pts
    return out[0] if single else out


def kernel_hessian(tab: TabulatedKernel, x):
    """Radial/tangential Hessian d2 * rhat rhat^T + (d1/r) (I - rhat rhat^T)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r = float(np.sqrt(np.sum(x * x)))
    eye = np.eye(d)
    if r == 0.0:
        return float(tab.curvature(0.0)) * eye
    rhat = x / r
    proj = np.outer(rhat, rhat)
    d1 = float(tab.slope(r))
    d2 = float(tab.curvature(r))
    return d2 * proj + (d1 / r) * (eye - proj)


# ---------------------------------------------------------------------------
# Mollified kernel construction
# ---------------------------------------------------------------------------

def _abscissae(eta: float, r_max: float, n: int) -> np.ndarray:
    r_min = 1e-3 * eta
    return np.concatenate([[0.0], np.geomspace(r_min, r_max, n)])


def _build_tables_3d(spec: RieszSpec, moll: MollifierSpec, radii: np.ndarray,
                     nodes: int):
    """Value/d1/d2 tables in dimension 3 via the two-shell reduction."""
    C, theta, eta = spec.coefficient, spec.exponent, moll.eta
    norm = moll.normalization(3) / eta ** 3
    profile = _PROFILES[moll.profile][0]

    truncated = spec.at_endpoint
    red = _TruncReduction3d(C, eta) if truncated else _RawReduction3d(C, theta)

    val = np.empty_like(radii)
    d1 = np.empty_like(radii)
    d2 = np.empty_like(radii)

    # r = 0 column: direct surface-area formulas
    x, w = _panel_gauss(_profile_edges(eta), nodes)
    v = norm * profile(x / eta)
    target0 = truncated_eval(spec, eta, x) if truncated else riesz_eval(spec, x)
    val[0] = 4.0 * math.pi * float(np.sum(w * x * x * v * target0))
    d1[0] = 0.0
    vpp = norm / eta ** 2 * _bump_d2(x / eta)
    vp_over = norm / eta ** 2 * _bump_d1_over_t(x / eta)
    d2[0] = (4.0 * math.pi / 3.0) * float(np.sum(w * x * x * (vpp + 2.0 * vp_over) * target0))

    for m, r in enumerate(radii[1:], start=1):
        if truncated:
            # antiderivative/odd/jump kinks sit where an argument crosses eta
            kinks = [abs(eta - r)] if 0.0 < abs(eta - r) < eta else []
        else:
            kinks = [r] if r < eta else []
        extras = [_profile_edges(eta)]
        if not truncated and r < eta:
            # derivative integrands decay like a power of s away from the
            # kink; cover the decades with a geometric ladder
            ladder = r * 2.0 ** np.arange(-4.0, 60.0)
            extras.append(ladder[(ladder > 0.0) & (ladder < eta)])
        if r > eta:
            # near-field arguments |r-s| peak at s = eta; the bump vanishes
            # there but resolve the boundary layer anyway
            extra = eta - (r - eta) * 2.0 ** np.arange(-2.0, 9.0)
            extras.append(extra[(extra > 0.0) & (extra < eta)])
        edges = np.unique(np.concatenate([_graded_edges(0.0, eta, kinks), *extras]))
        s, w = _panel_gauss(edges, nodes)
        sv = norm * profile(s / eta) * s
        D0, D1, D2 = red.d0_d1_d2(r, s)
        val[m] = 2.0 * math.pi * float(np.sum(w * sv * D0))
        d1[m] = 2.0 * math.pi * float(np.sum(w * sv * D1))
        I2 = float(np.sum(w * sv * D2))
        if not truncated and 0.0 < r < eta:
            # replace the innermost panels around s = r: the integrand carries
            # an integrable |r-s|^(-theta) singularity handled by Gauss-Jacobi
            gap = min(r, eta - r)
            delta = gap * 0.5 ** 12
            a, b = r - delta, r + delta
            inner = (s > a) & (s < b)
            I2 -= float(np.sum(w[inner] * sv[inner] * D2[inner]))
            xs, ws = _panel_gauss(np.array([a, b]), nodes)
            svs = norm * profile(xs / eta) * xs
            I2 += float(np.sum(ws * svs * red.d2_regular(r, xs)))
            coeff = red.d2_singular_coeff(r)
            for lo, hi, side in ((a, r, "upper"), (r, b, "lower")):
                if side == "lower":
                    xj, wj = roots_jacobi(nodes, 0.0, -theta)
                else:
                    xj, wj = roots_jacobi(nodes, -theta, 0.0)
                half = 0.5 * (hi - lo)
                sj = half * xj + 0.5 * (hi + lo)
                # weight embeds |s-r|^(-theta): scale by the interval jacobian
                wj = wj * half ** (1.0 - theta)
                svj = norm * profile(sj / eta) * sj
                I2 += coeff * float(np.sum(wj * svj))
        d2[m] = 2.0 * math.pi * I2
    return val, d1, d2


def _build_tables_general(spec: RieszSpec, moll: MollifierSpec, radii: np.ndarray,
                          nodes: int):
    """Generic dimension d >= 4: shell quadrature with derivatives moved onto
    the mollifier. Slower than the d = 3 reduction but uniformly valid."""
    d = spec.dimension
    C, theta, eta = spec.coefficient, spec.exponent, moll.eta
    norm = moll.normalization(d) / eta ** d
    truncated = spec.at_endpoint
    nu = 0.5 * (d - 3)
    om = sphere_area(d - 1)

    def target(s):
        return truncated_eval(spec, eta, s) if truncated else riesz_eval(spec, s)

    val = np.empty_like(radii)
    d1 = np.empty_like(radii)
    d2 = np.empty_like(radii)

    x, w = _panel_gauss(_profile_edges(eta), nodes)
    v = norm * _bump(x / eta)
    val[0] = sphere_area(d) * float(np.sum(w * x ** (d - 1) * v * target(x)))
    d1[0] = 0.0
    vpp = norm / eta ** 2 * _bump_d2(x / eta)
    vp_over = norm / eta ** 2 * _bump_d1_over_t(x / eta)
    val0_int = np.sum(w * x ** (d - 1) * (vpp / d + (1.0 - 1.0 / d) * vp_over) * target(x))
    d2[0] = sphere_area(d) * float(val0_int)

    # Inner shell integrals over u in (u_lo, u_hi).  The angular factor
    # sin(angle)^(d-3) = [(u^2-u_lo^2)((r+s)^2-u^2)]^nu / (2rs)^(d-3) vanishes
    # algebraically at u_lo (always) and at r+s (when the shell is not capped
    # by the mollifier support).  A sine substitution (both ends vanish) or a
    # square substitution (lower end only) renders the integrand smooth for
    # every dimension, so fixed Gauss panels in the mapped variable converge
    # fast.
    xi, wxi = _panel_gauss(np.linspace(-1.0, 1.0, 9), nodes)
    u_sin = np.sin(0.5 * math.pi * xi)
    du_sin = 0.5 * math.pi * np.cos(0.5 * math.pi * xi) * wxi
    tq, wtq = _panel_gauss(np.array([0.0, 0.4, 0.7, 0.85, 0.95, 0.99, 1.0]), nodes)

    def inner(r, s, u_lo, u_hi, full_span):
        sm = s[:, None]
        if full_span:
            half = 0.5 * (u_hi - u_lo)[:, None]
            mid = 0.5 * (u_hi + u_lo)[:, None]
            u = mid + half * u_sin[None, :]
            wrow = half * du_sin[None, :]
            geom = np.maximum((u - u_lo[:, None]) * (u_hi[:, None] - u), 0.0) ** nu \
                * ((u + u_lo[:, None]) * (r + sm + u)) ** nu
        else:
            span = (u_hi - u_lo)[:, None]
            u = u_lo[:, None] + span * tq[None, :] ** 2
            wrow = 2.0 * span ** (nu + 1.0) * tq[None, :] ** (2.0 * nu + 1.0) * wtq[None, :]
            geom = (u + u_lo[:, None]) ** nu * ((r + sm) ** 2 - u * u) ** nu
        geom = geom * u / (r * sm) / (2.0 * r * sm) ** (d - 3)
        wrow = wrow * geom
        p = (r * r - sm * sm + u * u) / (2.0 * r * u)
        t = u / eta
        vv = norm * _bump(t)
        vp = norm / eta * _bump_d1(t)
        vpp = norm / eta ** 2 * _bump_d2(t)
        vp_over = norm / eta ** 2 * _bump_d1_over_t(t)
        a0 = np.sum(wrow * vv, axis=1)
        a1 = np.sum(wrow * vp * p, axis=1)
        a2 = np.sum(wrow * (vpp * p * p + vp_over * (1.0 - p * p)), axis=1)
        return a0, a1, a2

    layer = eta * (1.0 - 2.0 ** -np.arange(1.0, 13.0))

    for m, r in enumerate(radii[1:], start=1):
        s_lo, s_hi = max(0.0, r - eta), r + eta
        kinks = [c for c in (r, abs(eta - r)) if s_lo < c < s_hi]
        extras = [r * 2.0 ** np.arange(-4.0, 60.0),  # power decay from the kink
                  r - layer, r + layer]              # mollifier layers hit by |r-s|
        extra = np.concatenate(extras)
        extra = extra[(extra > s_lo) & (extra < s_hi)]
        edges = np.unique(np.concatenate(
            [_graded_edges(s_lo, s_hi, kinks, levels=12, coarse=4), extra]))
        s, w = _panel_gauss(edges, nodes)
        Bs = target(s) * s ** (d - 1)
        acc0 = np.zeros_like(s)
        acc1 = np.zeros_like(s)
        acc2 = np.zeros_like(s)
        u_lo = np.abs(r - s)
        u_hi = np.minimum(r + s, eta)
        ok = u_hi > u_lo
        capped = ok & (r + s > eta)
        free = ok & ~capped
        for mask, full in ((free, True), (capped, False)):
            if np.any(mask):
                a0, a1, a2 = inner(r, s[mask], u_lo[mask], u_hi[mask], full)
                acc0[mask], acc1[mask], acc2[mask] = a0, a1, a2
        val[m] = om * float(np.sum(w * Bs * acc0))
        d1[m] = om * float(np.sum(w * Bs * acc1))
        d2[m] = om * float(np.sum(w * Bs * acc2))
    return val, d1, d2


def build_mollified(spec: RieszSpec, moll: MollifierSpec, *,
                    n_abscissae: int = 2048, r_max: float | None = None,
                    rel_tol: float = 1e-6) -> TabulatedKernel:
    """Tabulate the mollified kernel with radial derivatives.

    The convolution target is the raw kernel for exponent < d-2 and the
    truncated kernel at the endpoint exponent; the case split is automatic.
    Construction verifies quadrature convergence by rebuilding a subsample at
    higher order and raises `QuadratureError` above `rel_tol` relative error.
    """
    d = spec.dimension
    eta = moll.eta
    if r_max is None:
        r_max = 64.0 * eta
    radii = _abscissae(eta, r_max, n_abscissae)
    build = _build_tables_3d if d == 3 else _build_tables_general
    val, d1, d2 = build(spec, moll, radii, moll.quad_nodes)

    # convergence estimate on a subsample at higher quadrature order; the
    # derivative channels are normalized by their sup so that near-zero
    # entries do not dominate the relative error
    sub = radii[::64].copy()
    hi = build(spec, moll, sub, moll.quad_nodes + 8)
    lo = (val[::64], d1[::64], d2[::64])
    err = 0.0
    for a, b in zip(hi, lo):
        scale = np.maximum(np.abs(a), np.max(np.abs(a)) * 1e-2)
        err = max(err, float(np.max(np.abs(a - b) / scale)))
    if err > rel_tol:
        raise QuadratureError(
            f"mollified-kernel quadrature did not converge: estimated relative "
            f"error {err:.3e} exceeds {rel_tol:.1e}")

    # quadrature noise (~1e-9 relative) can break exact monotonicity where the
    # kernel is flat; project onto the nonincreasing cone, which moves values
    # by no more than the noise level
    val = np.minimum.accumulate(val)
    d1 = np.minimum(d1, 0.0)

    C, theta = spec.coefficient, spec.exponent
    return TabulatedKernel(
        radii, val, d1, d2, r_max,
        far_value=lambda r: C * r ** (-theta),
        far_d1=lambda r: -C * theta * r ** (-theta - 1.0),
        far_d2=lambda r: C * theta * (theta + 1.0) * r ** (-theta - 2.0),
        eta=eta, theta=theta, dimension=d, quad_error=err)


def build_gaussian(spec: GaussianSpec, *, n_abscissae: int = 1024,
                   r_max: float | None = None) -> TabulatedKernel:
    """Tabulate the bounded bell-shaped test kernel (derivatives analytic)."""
    A, wdt = spec.amplitude, spec.width
    if r_max is None:
        r_max = 12.0 * wdt
    radii = _abscissae(wdt, r_max, n_abscissae)

    def f(r):
        return A * np.exp(-0.5 * (r / wdt) ** 2)

    def f1(r):
        return -r / wdt ** 2 * f(r)

    def f2(r):
        return (r ** 2 / wdt ** 2 - 1.0) / wdt ** 2 * f(r)

    return TabulatedKernel(
        radii, f(radii), f1(radii), f2(radii), r_max,
        far_value=f, far_d1=f1, far_d2=f2,
        eta=wdt, theta=None, dimension=spec.dimension, quad_error=0.0)


def build_pair_kernels(matrix: InteractionMatrix, moll: MollifierSpec | None,
                       **kwargs) -> list[list[TabulatedKernel]]:
    """Build an n x n table of evaluable kernels from an interaction matrix."""
    table = []
    for row in matrix.pairs:
        out = []
        for spec in row:
            if isinstance(spec, RieszSpec):
                if moll is None:
                    raise ConfigError("singular pairs need a mollifier spec")
                out.append(build_mollified(spec, moll, **kwargs))
            else:
                out.append(build_gaussian(spec))
        table.append(out)
    return table
