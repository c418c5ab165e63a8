"""Anisotropic quasi-norm, max-form norm, bracket and dilation.

All functions accept a single point of shape ``(d,)`` or a batch of points of
shape ``(..., d)`` and broadcast over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Beyond this exponent magnitude t**a is formed as exp(a*log t).
_LOG_GUARD = 700.0
_NEWTON_RTOL = 1e-13


@dataclass(frozen=True)
class Anisotropy:
    """Anisotropy vector ``a`` with every component >= 1.

    Attributes
    ----------
    a : tuple of float
        Per-dimension exponents.
    nu : float
        Homogeneous dimension, ``sum(a)``.
    gamma_min, gamma_max : float
        Smallest and largest exponent.
    """

    a: tuple[float, ...]
    nu: float = field(init=False)
    gamma_min: float = field(init=False)
    gamma_max: float = field(init=False)

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        if len(a) == 0:
            raise ValueError("anisotropy needs at least one component")
        if any(not np.isfinite(v) or v < 1.0 for v in a):
            raise ValueError(f"anisotropy components must be finite and >= 1, got {a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "nu", float(sum(a)))
        object.__setattr__(self, "gamma_min", min(a))
        object.__setattr__(self, "gamma_max", max(a))

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def vec(self) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    def extended(self) -> "Anisotropy":
        """The (d+1)-dimensional anisotropy ``(1, a_1, ..., a_d)`` used by the bracket."""
        return Anisotropy((1.0,) + self.a)


def _as_points(x, aniso: Anisotropy) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (aniso.d,):
        raise ValueError(f"expected trailing dimension {aniso.d}, got shape {x.shape}")
    return x


def _power(t, a):
    """``t**a`` for t > 0, switching to log space when the exponent is large."""
    t = np.asarray(t, dtype=float)
    loga = np.log(t) * a
    if np.any(np.abs(loga) > _LOG_GUARD):
        return np.exp(np.clip(loga, -745.0, 709.0))
    return t ** a


def dilate(t, aniso: Anisotropy, x) -> np.ndarray:
    """Componentwise anisotropic dilation ``t**a_i * x_i``.

    ``t`` may be a scalar or an array broadcasting against the leading axes of
    ``x``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("dilation factor must be positive")
    x = _as_points(x, aniso)
    return _power(t[..., None], aniso.vec) * x


def quasi_norm_inf(x, aniso: Anisotropy) -> np.ndarray:
    """Max-form anisotropic norm ``max_i |x_i|**(1/a_i)``."""
    x = _as_points(x, aniso)
    return np.max(np.abs(x) ** (1.0 / aniso.vec), axis=-1)


def quasi_norm(x, aniso: Anisotropy) -> np.ndarray:
    """Anisotropic quasi-norm: the unique ``t0 > 0`` with ``|t0**(-a) x| = 1``.

    The root of ``u -> sum_i x_i**2 exp(-2 a_i u) - 1`` (``u = log t``) is
    bracketed by ``[log m, log m + log(d)/2]`` with ``m = quasi_norm_inf(x)``,
    narrowed by bisection and polished with Newton steps. The function is
    strictly decreasing and convex in ``u``, so Newton started from the left
    end of the bracket converges monotonically.
    """
    x = _as_points(x, aniso)
    a = aniso.vec
    shape = x.shape[:-1]
    flat = x.reshape(-1, aniso.d)
    out = np.zeros(flat.shape[0])
    m = np.max(np.abs(flat) ** (1.0 / a), axis=-1)
    nz = m > 0
    if not np.any(nz):
        return out.reshape(shape)

    # Work with x scaled by m so the root lies in [0, log(d)/2].
    xs = flat[nz] / _power(m[nz][:, None], a)
    x2 = xs * xs

    def g(u):
        return np.sum(x2 * np.exp(-2.0 * a * u[:, None]), axis=-1) - 1.0

    lo = np.zeros(xs.shape[0])
    hi = np.full(xs.shape[0], 0.5 * np.log(aniso.d) + 1e-15)
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    u = lo
    for _ in range(60):
        e = x2 * np.exp(-2.0 * a * u[:, None])
        gv = e.sum(axis=-1) - 1.0
        dg = -2.0 * (a * e).sum(axis=-1)
        step = gv / dg
        u = u - step
        # u is log t, so an absolute step in u is a relative step in t.
        if np.max(np.abs(step)) <= 1e-2 * _NEWTON_RTOL:
            break
    out[nz] = m[nz] * np.exp(u)
    return out.reshape(shape)


def bracket(x, aniso: Anisotropy) -> np.ndarray:
    """Anisotropic bracket ``<x> = |(1, x)|`` under the anisotropy ``(1, a)``."""
    x = _as_points(x, aniso)
    ones = np.ones(x.shape[:-1] + (1,))
    return quasi_norm(np.concatenate([ones, x], axis=-1), aniso.extended())


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the anisotropic unit ball ``B_a(0, 1)``.

    ``|x|_a < 1`` holds exactly when the Euclidean norm of ``x`` is below one,
    so this is the Euclidean unit-ball volume.
    """
    from math import gamma, pi

    return pi ** (d / 2) / gamma(d / 2 + 1)
