"""Univariate ramp, bell, brushlets and the interval projection.

Frequency-domain evaluation is the primary representation. The time-domain
central bell is only available through quadrature and is meant for decay
diagnostics.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .covering import CutInterval
from .grid import CoverageError, GridFunction
from .quadrature import QuadratureError, panel_rule

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class RampProfile:
    """``rho(xi) = sin(pi/4 (1 + theta(xi)))`` with a polynomial transition.

    ``theta`` is the odd antiderivative of ``(1 - s**2)**order`` normalised to
    reach 1 at ``xi = 1``; it is ``C**order`` across ``xi = +-1``. Order 3 gives
    the degree-7 transition ``(35 x - 35 x^3 + 21 x^5 - 5 x^7) / 16``.
    """

    order: int = 3
    coeffs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = int(self.order)
        if k < 1 or k != self.order:
            raise ValueError(f"ramp order must be a positive integer, got {self.order}")
        terms = [Fraction((-1) ** m * math.comb(k, m), 2 * m + 1) for m in range(k + 1)]
        norm = sum(terms)
        # coefficients of xi**1, xi**3, ...
        object.__setattr__(self, "coeffs", tuple(float(t / norm) for t in terms))

    def theta(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        t = np.clip(np.abs(xi), 0.0, 1.0)
        # Horner in t**2, then one factor t; evaluating on |xi| keeps theta exactly odd.
        t2 = t * t
        acc = np.zeros_like(t)
        for c in reversed(self.coeffs):
            acc = acc * t2 + c
        return np.sign(xi) * np.where(np.abs(xi) >= 1.0, 1.0, acc * t)

    def __call__(self, xi) -> np.ndarray:
        return ramp_eval(xi, self)


DEFAULT_RAMP = RampProfile()


def ramp_eval(xi, profile: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.sin(0.25 * np.pi * (1.0 + profile.theta(xi)))
    out = np.where(xi <= -1.0, 0.0, np.where(xi >= 1.0, 1.0, out))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Bell:
    """Bell ``b_I`` over a cut interval."""

    interval: CutInterval
    ramp: RampProfile = DEFAULT_RAMP

    def __post_init__(self):
        iv = self.interval
        if not iv.right > iv.left:
            raise ValueError("bell interval must have positive length")
        if iv.eps_left <= 0 or iv.eps_right <= 0:
            raise ValueError("cutoff radii must be positive")
        if iv.eps_left + iv.eps_right > iv.length * (1.0 + 1e-12):
            raise ValueError("cutoff radii exceed the interval length")

    @classmethod
    def from_knots(cls, left, right, eps_left, eps_right=None,
                   ramp: RampProfile = DEFAULT_RAMP) -> "Bell":
        if eps_right is None:
            eps_right = eps_left
        iv = CutInterval(float(left), float(right), float(eps_left), float(eps_right),
                         "inner", 0, 0)
        return cls(iv, ramp)

    @property
    def alpha(self) -> float:
        return self.interval.left

    @property
    def alpha_p(self) -> float:
        return self.interval.right

    @property
    def length(self) -> float:
        return self.interval.length

    @property
    def support(self) -> tuple[float, float]:
        return self.interval.support

    def breakpoints(self) -> np.ndarray:
        """The four points where the bell stops being analytic."""
        iv = self.interval
        return np.array([iv.left - iv.eps_left, iv.left + iv.eps_left,
                         iv.right - iv.eps_right, iv.right + iv.eps_right])

    def __call__(self, xi) -> np.ndarray:
        return bell_eval(self, xi)


def bell_eval(bell: Bell, xi) -> np.ndarray:
    iv = bell.interval
    xi = np.asarray(xi, dtype=float)
    return (ramp_eval((xi - iv.left) / iv.eps_left, bell.ramp)
            * ramp_eval((iv.right - xi) / iv.eps_right, bell.ramp))


def brushlet_freq_eval(bell: Bell, n: int, xi) -> np.ndarray:
    if n < 0:
        raise ValueError("brushlet index must be nonnegative")
    L = bell.length
    xi = np.asarray(xi, dtype=float)
    return (math.sqrt(2.0 / L) * bell_eval(bell, xi)
            * np.cos(np.pi * (n + 0.5) * (xi - bell.alpha) / L))


def brushlet_freq_matrix(bell: Bell, n_max: int, xi) -> np.ndarray:
    """Rows ``n = 0..n_max`` of brushlet values at ``xi`` (shape ``(n_max+1,) + xi.shape``)."""
    xi = np.asarray(xi, dtype=float)
    n = np.arange(n_max + 1).reshape((-1,) + (1,) * xi.ndim)
    L = bell.length
    return (math.sqrt(2.0 / L) * bell_eval(bell, xi)
            * np.cos(np.pi * (n + 0.5) * (xi - bell.alpha) / L))


# ---------------------------------------------------------------------------
# central bell


def central_bell_freq_eval(bell: Bell, eta) -> np.ndarray:
    """``g_hat(eta) = rho(|I| eta / eps) rho(|I| (1 - eta) / eps')``."""
    iv = bell.interval
    eta = np.asarray(eta, dtype=float)
    return (ramp_eval(iv.length * eta / iv.eps_left, bell.ramp)
            * ramp_eval(iv.length * (1.0 - eta) / iv.eps_right, bell.ramp))


def _central_breaks(bell: Bell) -> np.ndarray:
    iv = bell.interval
    sl, sr = iv.eps_left / iv.length, iv.eps_right / iv.length
    return np.unique([-sl, sl, 1.0 - sr, 1.0 + sr])


def central_bell_time_eval(bell: Bell, x, rtol: float = 1e-9,
                           max_nodes: int = 1 << 15) -> np.ndarray:
    """``g_I(x) = (1/2pi) int g_hat(eta) exp(i eta x) d eta``.

    Gauss-Legendre panels split at the ramp transitions; node counts double
    until successive estimates agree to ``rtol`` relative to ``max |g|`` over
    the batch (tiny tail values are resolved to that absolute level).
    Raises :class:`QuadratureError` when ``max_nodes`` per panel is reached.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    breaks = _central_breaks(bell)
    width = float(np.max(np.diff(breaks)))
    # Enough nodes to resolve the oscillation on the widest panel.
    n = max(16, int(np.ceil(width * np.max(np.abs(flat), initial=0.0) / np.pi)) + 16)

    def estimate(m):
        eta, w = panel_rule(breaks, m)
        vals = central_bell_freq_eval(bell, eta) * w
        return np.exp(1j * np.outer(flat, eta)) @ vals / (2.0 * np.pi)

    prev = estimate(n)
    while True:
        n *= 2
        if n > max_nodes:
            raise QuadratureError(f"central bell quadrature did not reach rtol={rtol}")
        cur = estimate(n)
        scale = max(np.max(np.abs(cur), initial=0.0), 1e-300)
        if np.max(np.abs(cur - prev), initial=0.0) <= rtol * scale:
            return cur.reshape(x.shape)
        prev = cur


def brushlet_time_eval(bell: Bell, n: int, x) -> np.ndarray:
    """Time-domain brushlet as the sum of two central-bell humps."""
    L = bell.length
    x = np.asarray(x, dtype=float)
    e = np.pi * (n + 0.5) / L
    humps = central_bell_time_eval(bell, np.concatenate([(L * (x + e)).ravel(), (L * (x - e)).ravel()]))
    plus, minus = np.split(humps, 2)
    return (math.sqrt(L / 2.0) * np.exp(1j * bell.alpha * x)
            * (plus.reshape(x.shape) + minus.reshape(x.shape)))


# ---------------------------------------------------------------------------
# projection


def _reflect_callable(bell: Bell, f, axis):
    """``P_I f`` for ``f`` defined pointwise; ``axis=None`` means scalar points."""
    a, ap = bell.alpha, bell.alpha_p

    def along(xi):
        return xi if axis is None else xi[..., axis]

    def moved(xi, c):
        if axis is None:
            return 2.0 * c - xi
        out = np.array(xi, dtype=float, copy=True)
        out[..., axis] = 2.0 * c - xi[..., axis]
        return out

    def proj(xi):
        xi = np.asarray(xi, dtype=float)
        t = along(xi)
        b = bell_eval(bell, t)
        acc = b * np.asarray(f(xi), dtype=complex)
        bl = bell_eval(bell, 2.0 * a - t)
        br = bell_eval(bell, 2.0 * ap - t)
        if np.any(bl != 0):
            acc = acc + bl * np.asarray(f(moved(xi, a)), dtype=complex)
        if np.any(br != 0):
            acc = acc - br * np.asarray(f(moved(xi, ap)), dtype=complex)
        return b * acc

    return proj


def _aligned_shift(center: float, lo: float, h: float) -> int | None:
    """Index offset ``s`` with ``2 c - (lo + k h) = lo + (s - k) h`` when ``2c`` lands on the grid."""
    s = (2.0 * center - 2.0 * lo) / h
    r = round(s)
    return int(r) if abs(s - r) <= _ALIGN_TOL else None


def _reflected(values: np.ndarray, axis: int, nodes: np.ndarray, center: float,
               lo: float, h: float, spline) -> tuple[np.ndarray, object]:
    """Samples of ``f(2 c - xi)`` along ``axis`` at every node (zero off-grid)."""
    s = _aligned_shift(center, lo, h)
    n = nodes.size
    if s is not None:
        src = s - np.arange(n)
        ok = (src >= 0) & (src < n)
        take = np.take(values, np.clip(src, 0, n - 1), axis=axis)
        shape = [1] * values.ndim
        shape[axis] = n
        return np.where(ok.reshape(shape), take, 0.0), spline
    if spline is None:
        spline = CubicSpline(nodes, values, axis=axis)
    target = 2.0 * center - nodes
    inside = (target >= nodes[0] - 1e-12 * max(1.0, abs(nodes[0]))) & \
             (target <= nodes[-1] + 1e-12 * max(1.0, abs(nodes[-1])))
    moved = spline(np.clip(target, nodes[0], nodes[-1]))
    shape = [1] * values.ndim
    shape[axis] = n
    return np.where(inside.reshape(shape), moved, 0.0), spline


def _project_grid(bell: Bell, g: GridFunction, axis: int) -> GridFunction:
    lo, hi = g.bounds[axis]
    slo, shi = bell.support
    h = g.spacing[axis]
    tol = 1e-9 * max(1.0, abs(slo), abs(shi))
    if slo < lo - tol or shi > hi + tol:
        raise CoverageError(
            f"grid axis {axis} covers [{lo}, {hi}] but the bell needs [{slo}, {shi}]")
    nodes = g.axis(axis)
    shape = [1] * g.d
    shape[axis] = nodes.size
    b = bell_eval(bell, nodes)
    bl = bell_eval(bell, 2.0 * bell.alpha - nodes)
    br = bell_eval(bell, 2.0 * bell.alpha_p - nodes)
    acc = b.reshape(shape) * g.values
    spline = None
    fl, spline = _reflected(g.values, axis, nodes, bell.alpha, lo, h, spline)
    fr, spline = _reflected(g.values, axis, nodes, bell.alpha_p, lo, h, spline)
    acc = acc + bl.reshape(shape) * fl - br.reshape(shape) * fr
    return g.like(b.reshape(shape) * acc)


def project_interval(bell: Bell, fhat, axis: int | None = None):
    """Apply the local-cosine projection ``P_I`` to ``fhat``.

    ``fhat`` is either a :class:`GridFunction` (then ``axis`` picks the grid
    axis, default 0) or a vectorized callable. For callables ``axis=None``
    means the points are scalars; otherwise points carry a trailing dimension
    and the operator acts on coordinate ``axis``. Callables compose exactly,
    so products of projections can be checked pointwise without
    interpolation error.

    On grids the reflected samples ``f(2 alpha - xi)`` are read directly when
    ``2 alpha`` is a grid node sum, and from a cubic spline otherwise.
    """
    if isinstance(fhat, GridFunction):
        return _project_grid(bell, fhat, 0 if axis is None else axis)
    if callable(fhat):
        return _reflect_callable(bell, fhat, axis)
    raise TypeError("fhat must be a GridFunction or a callable")


def profile_csv(path, bell: Bell, xi, n: int | None = None) -> Path:
    """Write ``(xi, value)`` rows of the bell (``n=None``) or of brushlet ``n``."""
    xi = np.asarray(xi, dtype=float).ravel()
    vals = bell_eval(bell, xi) if n is None else brushlet_freq_eval(bell, n, xi)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "value"])
        for x, v in zip(xi, np.atleast_1d(vals)):
            w.writerow([repr(float(x)), repr(float(v))])
    return path
