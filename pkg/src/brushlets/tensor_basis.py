"""Tensor-product brushlets on the tiles of a covering."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .brushlet1d import (DEFAULT_RAMP, Bell, RampProfile, brushlet_freq_matrix,
                         brushlet_time_eval, central_bell_freq_eval,
                         central_bell_time_eval, project_interval, bell_eval)
from .covering import (CoveringSpec, CutInterval, FreqRect, _slot_to_index,
                       corridor_counts, corridor_knots, rect_at)
from .grid import GridFunction
from .quadrature import panel_rule


@dataclass(frozen=True)
class BrushIndex:
    """A basis index ``(R, n)``."""

    rect: FreqRect
    n: tuple[int, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        if len(n) != self.rect.d:
            raise ValueError("n must have one entry per dimension")
        if any(v < 0 for v in n):
            raise ValueError("n must be componentwise nonnegative")
        object.__setattr__(self, "n", n)

    @property
    def key(self) -> tuple[int, int, tuple[int, ...]]:
        return self.rect.layer, self.rect.index, self.n

    @property
    def delta(self) -> np.ndarray:
        return self.rect.lengths

    @property
    def alpha(self) -> np.ndarray:
        return self.rect.left

    @property
    def e(self) -> np.ndarray:
        """Hump offsets ``pi (n_i + 1/2) / |I_i|``."""
        return np.pi * (np.asarray(self.n) + 0.5) / self.delta

    def hump_centers(self) -> np.ndarray:
        """The ``2**d`` points ``O_m e`` as rows, ordered over sign patterns."""
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.rect.d)))
        return signs * self.e


@lru_cache(maxsize=4096)
def rect_bells(rect: FreqRect, ramp: RampProfile = DEFAULT_RAMP) -> tuple[Bell, ...]:
    return tuple(Bell(iv, ramp) for iv in rect.intervals)


def brushlet_nd_freq_eval(idx: BrushIndex, xi, ramp: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.ones(xi.shape[:-1])
    for i, (bell, n) in enumerate(zip(rect_bells(idx.rect, ramp), idx.n)):
        out = out * brushlet_freq_matrix(bell, n, xi[..., i])[n]
    return out


def brushlet_nd_time_eval(idx: BrushIndex, x, ramp: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1], dtype=complex)
    for i, (bell, n) in enumerate(zip(rect_bells(idx.rect, ramp), idx.n)):
        out = out * brushlet_time_eval(bell, n, x[..., i])
    return out


def bell_nd_eval(bells, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.ones(xi.shape[:-1])
    for i, bell in enumerate(bells):
        out = out * bell_eval(bell, xi[..., i])
    return out


def tensor_projection(bells, fhat):
    """``P_{I_1} x ... x P_{I_d}`` applied one axis at a time."""
    out = fhat
    for axis, bell in enumerate(bells):
        out = project_interval(bell, out, axis=axis)
    return out


def project_rect(rect: FreqRect, fhat, ramp: RampProfile = DEFAULT_RAMP):
    """Projection onto the span of ``{w_{R,n}}``; grid or callable input."""
    return tensor_projection(rect_bells(rect, ramp), fhat)


def box_interval(j: int, dim: int, spec: CoveringSpec) -> CutInterval:
    """Centered interval ``A_j`` of one dimension.

    ``[-(j+1)**(a beta), (j+1)**(a beta))`` with radius ``c (j+1)**(a (beta-1))``
    at both ends. ``A_0`` is the low-pass interval and ``B_j = A_{j-1}``.
    """
    if j < 0:
        raise ValueError("layer index must be nonnegative")
    a, b, c = spec.aniso.a[dim], spec.beta, spec.cutoff[dim]
    edge = float(j + 1) ** (a * b)
    eps = c * float(j + 1) ** (a * (b - 1.0))
    return CutInterval(-edge, edge, eps, eps, "box", j, dim)


def box_bells(j: int, spec: CoveringSpec, ramp: RampProfile = DEFAULT_RAMP) -> tuple[Bell, ...]:
    return tuple(Bell(box_interval(j, i, spec), ramp) for i in range(spec.d))


def _sub(x, y):
    if isinstance(x, GridFunction):
        return x - y
    return lambda p: np.asarray(x(p)) - np.asarray(y(p))


def _sum(terms):
    if isinstance(terms[0], GridFunction):
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out
    return lambda p: sum(np.asarray(t(p)) for t in terms)


def layer_projection(j: int, spec: CoveringSpec, fhat, method: str = "telescoping",
                     ramp: RampProfile = DEFAULT_RAMP):
    """Projection onto the span of layer ``j``.

    ``telescoping`` forms the difference of the box projections for ``A_j`` and
    ``A_{j-1}``; ``sum`` adds the tile projections of the layer.
    """
    if j == 0:
        return tensor_projection(box_bells(0, spec, ramp), fhat)
    if method == "telescoping":
        return _sub(tensor_projection(box_bells(j, spec, ramp), fhat),
                    tensor_projection(box_bells(j - 1, spec, ramp), fhat))
    if method == "sum":
        from .covering import build_layer
        return _sum([project_rect(r, fhat, ramp) for r in build_layer(j, spec)])
    raise ValueError(f"unknown method {method!r}")


def _hit_slots(j: int, dim: int, spec: CoveringSpec, L: float) -> list[int]:
    knots, eps = corridor_knots(j, dim, spec)
    lo = knots[:-1] - eps[:-1]
    hi = knots[1:] + eps[1:]
    return [m for m in range(knots.size - 1) if hi[m] > -L and lo[m] < L]


def _layer_reaches(j: int, spec: CoveringSpec, L: np.ndarray) -> bool:
    if j == 0:
        return True
    a, b, c = spec.aniso.vec, spec.beta, np.asarray(spec.cutoff)
    near = float(j) ** (a * b) - c * float(j) ** (a * (b - 1.0))
    return bool(np.any(near < L))


def _bound(spec: CoveringSpec, L) -> np.ndarray:
    L = np.broadcast_to(np.asarray(L, dtype=float), (spec.d,))
    if not np.all(L > 0):
        raise ValueError("frequency bound must be positive")
    return L


def active_rects(spec: CoveringSpec, L) -> list[FreqRect]:
    """Tiles whose bell support meets the open box ``prod (-L_i, L_i)``, in covering order.

    ``L`` is a scalar or one half-width per dimension.
    """
    L = _bound(spec, L)
    out = []
    j = 0
    while _layer_reaches(j, spec, L):
        if j == 0:
            out.append(rect_at(0, 1, spec))
        else:
            per_dim = [_hit_slots(j, i, spec, L[i]) for i in range(spec.d)]
            counts = [corridor_counts(j, i, spec) for i in range(spec.d)]
            for slot in itertools.product(*per_dim):
                if all(o <= s < o + n for s, (o, n) in zip(slot, counts)):
                    continue
                out.append(rect_at(j, _slot_to_index(j, slot, spec), spec))
        j += 1
    return out


def layer_box(j: int, spec: CoveringSpec) -> np.ndarray:
    """Per-dimension half-widths whose box activates exactly the layers ``0..j``."""
    a, b, c = spec.aniso.vec, spec.beta, np.asarray(spec.cutoff)
    nxt = float(j + 1)
    return nxt ** (a * b) - c * nxt ** (a * (b - 1.0)) * (1.0 + 1e-9)


def enumerate_active(spec: CoveringSpec, L, n_max) -> list[BrushIndex]:
    """All ``(R, n)`` with ``R`` active for the box and ``n <= n_max`` componentwise."""
    n_max = np.broadcast_to(np.asarray(n_max, dtype=int), (spec.d,))
    if np.any(n_max < 0):
        raise ValueError("n_max must be nonnegative")
    ranges = [range(int(m) + 1) for m in n_max]
    return [BrushIndex(r, n) for r in active_rects(spec, L)
            for n in itertools.product(*ranges)]


# ---------------------------------------------------------------------------
# diagnostics


def _pair_rule(b1: Bell, b2: Bell, n_top: int, oversample: int):
    lo = max(b1.support[0], b2.support[0])
    hi = min(b1.support[1], b2.support[1])
    if hi <= lo:
        return None
    pts = np.concatenate([b1.breakpoints(), b2.breakpoints(), [lo, hi]])
    breaks = np.unique(np.clip(pts, lo, hi))
    h = min(b1.interval.eps_left, b1.interval.eps_right,
            b2.interval.eps_left, b2.interval.eps_right)
    short = min(b1.length, b2.length)
    lengths = np.diff(breaks)
    counts = np.ceil(oversample * lengths / h + 2 * (n_top + 1) * lengths / short).astype(int) + 8
    return panel_rule(breaks, counts)


def gram_matrix(indices, oversample: int = 16, ramp: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    """Gram matrix of frequency-domain brushlets by separable Gauss-Legendre quadrature.

    Each entry is a product of one-dimensional integrals; ``oversample`` nodes
    are used per shortest cutoff radius on each panel.
    """
    indices = list(indices)
    if not indices:
        return np.zeros((0, 0))
    d = indices[0].rect.d
    n_top = max(max(ix.n) for ix in indices)
    cache: dict = {}

    def factor(iv1, iv2, n1, n2):
        key = (iv1, iv2)
        if key not in cache:
            b1, b2 = Bell(iv1, ramp), Bell(iv2, ramp)
            rule = _pair_rule(b1, b2, n_top, oversample)
            if rule is None:
                cache[key] = None
            else:
                x, w = rule
                m1 = brushlet_freq_matrix(b1, n_top, x)
                m2 = brushlet_freq_matrix(b2, n_top, x)
                cache[key] = (m1 * w) @ m2.T
        mat = cache[key]
        return 0.0 if mat is None else mat[n1, n2]

    size = len(indices)
    G = np.zeros((size, size))
    for p in range(size):
        for q in range(p, size):
            val = 1.0
            for i in range(d):
                val *= factor(indices[p].rect.intervals[i], indices[q].rect.intervals[i],
                              indices[p].n[i], indices[q].n[i])
                if val == 0.0:
                    break
            G[p, q] = G[q, p] = val
    return G


def central_bell_nd_time_eval(rect: FreqRect, x, ramp: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    """``G_R(x) = prod_i g_{I_i}(x_i)``."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1], dtype=complex)
    for i, bell in enumerate(rect_bells(rect, ramp)):
        out = out * central_bell_time_eval(bell, x[..., i])
    return out


def hump_bound_ratio(idx: BrushIndex, x, ramp: RampProfile = DEFAULT_RAMP) -> np.ndarray:
    """``|w_{R,n}(x)|`` divided by the ``2**d``-hump majorant at each point."""
    x = np.asarray(x, dtype=float)
    lhs = np.abs(brushlet_nd_time_eval(idx, x, ramp))
    rhs = np.zeros(x.shape[:-1])
    for c in idx.hump_centers():
        rhs = rhs + np.abs(central_bell_nd_time_eval(idx.rect, idx.delta * (x - c), ramp))
    rhs = 2.0 ** (-idx.rect.d / 2) * math.sqrt(idx.rect.measure) * rhs
    return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))


def bell_identity_error(rect: FreqRect, xi, ramp: RampProfile = DEFAULT_RAMP) -> float:
    """``max |b_R(xi) - G_hat_R(delta^{-1} (xi - alpha_R))|`` over the points."""
    xi = np.asarray(xi, dtype=float)
    bells = rect_bells(rect, ramp)
    lhs = bell_nd_eval(bells, xi)
    rhs = np.ones(xi.shape[:-1])
    for i, bell in enumerate(bells):
        rhs = rhs * central_bell_freq_eval(bell, (xi[..., i] - bell.alpha) / bell.length)
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


# ---------------------------------------------------------------------------
# projection identities


def adjacent_pair(j: int, spec: CoveringSpec):
    """Two tiles of layer ``j`` sharing a face, and the axis they meet on."""
    from .covering import build_layer
    rects = build_layer(j, spec)
    for r in rects:
        for s in rects:
            for ax in range(spec.d):
                same = all(r.intervals[i] == s.intervals[i] for i in range(spec.d) if i != ax)
                if same and r.intervals[ax].right == s.intervals[ax].left:
                    return r, s, ax
    raise ValueError(f"layer {j} has no adjacent tiles")


def union_bells(r: FreqRect, s: FreqRect, axis: int, ramp: RampProfile = DEFAULT_RAMP):
    """Bells of ``R u R'`` for tiles meeting along ``axis``."""
    bells = list(rect_bells(r, ramp))
    a, b = r.intervals[axis], s.intervals[axis]
    bells[axis] = Bell(CutInterval(a.left, b.right, a.eps_left, b.eps_right, "union",
                                   a.layer, axis), ramp)
    return tuple(bells)


def _gap(x, y, points) -> float:
    if isinstance(x, GridFunction):
        return float(np.max(np.abs(x.values - y.values)))
    return float(np.max(np.abs(np.asarray(x(points)) - np.asarray(y(points)))))


def _zero(x, points) -> float:
    if isinstance(x, GridFunction):
        return float(np.max(np.abs(x.values)))
    return float(np.max(np.abs(np.asarray(x(points)))))


def projection_identities(spec: CoveringSpec, fhat, j_max: int, points=None,
                          ramp: RampProfile = DEFAULT_RAMP) -> dict:
    """Largest defect of each projection identity on ``fhat``.

    Grid input compares grid values; callable input compares values at
    ``points``. Layers ``1..j_max`` supply the tiles, boxes ``A_0..A_{j_max}``
    the nested projections.
    """
    from .covering import build_layer
    out = {"idempotence": 0.0, "adjacent_annihilation": 0.0, "addition_rule": 0.0,
           "nested": 0.0, "layer_orthogonality": 0.0, "telescoping_vs_sum": 0.0}
    for j in range(1, j_max + 1):
        r, s, ax = adjacent_pair(j, spec)
        pr = project_rect(r, fhat, ramp)
        ps = project_rect(s, fhat, ramp)
        out["idempotence"] = max(out["idempotence"], _gap(project_rect(r, pr, ramp), pr, points))
        out["adjacent_annihilation"] = max(out["adjacent_annihilation"],
                                           _zero(project_rect(r, ps, ramp), points))
        whole = tensor_projection(union_bells(r, s, ax, ramp), fhat)
        out["addition_rule"] = max(out["addition_rule"], _gap(_sum([pr, ps]), whole, points))
        # a tile on the outer edge of the corridor sits inside A_j with a shared cut
        edge = build_layer(j, spec)[-1]
        pe = project_rect(edge, fhat, ramp)
        boxed = tensor_projection(box_bells(j, spec, ramp), pe)
        out["nested"] = max(out["nested"], _gap(boxed, pe, points))
        inner = tensor_projection(box_bells(j - 1, spec, ramp), fhat)
        out["nested"] = max(out["nested"],
                            _gap(tensor_projection(box_bells(j, spec, ramp), inner), inner, points))
        wj = layer_projection(j, spec, fhat, "telescoping", ramp)
        out["telescoping_vs_sum"] = max(out["telescoping_vs_sum"],
                                        _gap(wj, layer_projection(j, spec, fhat, "sum", ramp), points))
        if j < j_max:
            nxt = layer_projection(j + 1, spec, fhat, "telescoping", ramp)
            out["layer_orthogonality"] = max(out["layer_orthogonality"],
                                             _zero(layer_projection(j, spec, nxt, "telescoping", ramp), points))
    return out
