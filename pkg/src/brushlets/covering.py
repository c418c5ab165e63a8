"""Anisotropic alpha-covering of the frequency space.

Layer ``j >= 1`` tiles the corridor ``j**beta <= |xi|_{a,inf} < (j+1)**beta``.
Per dimension the interval ``[-(j+1)**(a_i beta), (j+1)**(a_i beta))`` is cut
into ``ceil(j**(a_i-1))`` equal outer pieces on each side and
``ceil(j**a_i)`` equal inner pieces; the layer's tiles are all products of
these pieces except the purely inner ones. Layer 0 is ``[-1, 1)**d``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .anisotropy import Anisotropy, bracket, quasi_norm, quasi_norm_inf

KINDS = ("outer-negative", "inner", "outer-positive")
_REL = 1e-12


def _ceil(v: float) -> int:
    # Powers like 3**2.0 may land a hair above an integer.
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, abs(v)):
        return int(r)
    return math.ceil(v)


def lemma_constants(a_i: float, beta: float) -> tuple[float, float]:
    """Interval-length constants ``(c_{i,1}, c_{i,2})`` of one dimension."""
    return min(0.5, a_i * beta / 2.0), max(2.0, 2.0 ** (a_i * beta - 1.0))


def corrected_lemma_constants(a_i: float, beta: float) -> tuple[float, float]:
    """Like :func:`lemma_constants` with the upper constant raised to
    ``max(2, a_i beta 2**(a_i beta - 1))``, which the mean value theorem gives
    for the outer pieces and which also holds at ``j = 1``."""
    return min(0.5, a_i * beta / 2.0), max(2.0, a_i * beta * 2.0 ** (a_i * beta - 1.0))


@dataclass(frozen=True)
class CoveringSpec:
    """Parameters of the covering.

    Parameters
    ----------
    alpha : float
        Covering parameter in ``[0, 1)``; ``beta = 1 / (1 - alpha)``.
    aniso : Anisotropy
    cutoff : tuple of float, optional
        Per-dimension cutoff fractions ``c_i`` in ``(0, 1/2)``. Defaults to
        ``c_{i,1} / 4``.
    """

    alpha: float
    aniso: Anisotropy
    cutoff: tuple[float, ...] | None = None
    beta: float = field(init=False)

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        if not isinstance(self.aniso, Anisotropy):
            object.__setattr__(self, "aniso", Anisotropy(self.aniso))
        object.__setattr__(self, "alpha", alpha)
        beta = 1.0 / (1.0 - alpha)
        object.__setattr__(self, "beta", beta)
        if self.cutoff is None:
            c = tuple(min(0.5, lemma_constants(a, beta)[0] / 4.0) for a in self.aniso.a)
        else:
            c = tuple(float(v) for v in self.cutoff)
            if len(c) != self.aniso.d:
                raise ValueError("one cutoff fraction per dimension is required")
            if any(not 0.0 < v < 0.5 for v in c):
                raise ValueError(f"cutoff fractions must lie in (0, 1/2), got {c}")
        object.__setattr__(self, "cutoff", c)
        for j in range(0, 33):
            for i in range(self.aniso.d):
                knots, eps = corridor_knots(j, i, self)
                slack = np.diff(knots) - eps[:-1] - eps[1:]
                if np.any(slack < -_REL * np.abs(knots[1:])):
                    raise ValueError(
                        f"cutoff {c[i]} too large: radii overlap in layer {j}, dimension {i}"
                    )

    @property
    def d(self) -> int:
        return self.aniso.d

    @property
    def c1(self) -> np.ndarray:
        return np.array([lemma_constants(a, self.beta)[0] for a in self.aniso.a])

    @property
    def c2(self) -> np.ndarray:
        return np.array([lemma_constants(a, self.beta)[1] for a in self.aniso.a])

    @property
    def c3(self) -> float:
        return float(np.prod(self.c1))

    @property
    def c4(self) -> float:
        return float(np.prod(self.c2))

    @property
    def c5(self) -> float:
        return 0.5 * float(np.min(self.c1))

    @property
    def c6(self) -> float:
        return 0.5 * float(np.max(self.c2))

    @property
    def c7(self) -> float:
        return 2.0 * max(1.0, self.c6)

    def scale(self, j: int) -> np.ndarray:
        """Per-dimension layer scale ``j**((beta-1) a_i)`` (ones for ``j = 0``)."""
        if j == 0:
            return np.ones(self.d)
        return float(j) ** ((self.beta - 1.0) * self.aniso.vec)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "a": list(self.aniso.a), "cutoff": list(self.cutoff)}


@dataclass(frozen=True)
class CutInterval:
    """Half-open interval ``[left, right)`` with cutoff radii at both knots."""

    left: float
    right: float
    eps_left: float
    eps_right: float
    kind: str
    layer: int
    dim: int

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def center(self) -> float:
        return 0.5 * (self.left + self.right)

    @property
    def support(self) -> tuple[float, float]:
        return self.left - self.eps_left, self.right + self.eps_right


@dataclass(frozen=True)
class FreqRect:
    """One tile ``R_k^j`` of the covering."""

    layer: int
    index: int
    intervals: tuple[CutInterval, ...]
    slot: tuple[int, ...]
    center: np.ndarray = field(compare=False, repr=False)
    measure: float = field(compare=False)
    affine_scale: np.ndarray = field(compare=False, repr=False)

    @property
    def d(self) -> int:
        return len(self.intervals)

    @property
    def key(self) -> tuple[int, int]:
        return self.layer, self.index

    @property
    def lengths(self) -> np.ndarray:
        """Diagonal of ``delta_R``: the per-dimension interval lengths."""
        return np.array([iv.length for iv in self.intervals])

    @property
    def left(self) -> np.ndarray:
        return np.array([iv.left for iv in self.intervals])

    @property
    def right(self) -> np.ndarray:
        return np.array([iv.right for iv in self.intervals])

    def affine(self, y) -> np.ndarray:
        """The map ``T(y) = scale * y + center``."""
        return self.affine_scale * np.asarray(y, dtype=float) + self.center

    def inflated(self, c: float) -> tuple[np.ndarray, np.ndarray]:
        """Bounds of ``T(c [-1, 1]^d)``."""
        return self.center - c * self.affine_scale, self.center + c * self.affine_scale

    def bell_support(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([iv.support[0] for iv in self.intervals])
        hi = np.array([iv.support[1] for iv in self.intervals])
        return lo, hi


def corridor_counts(j: int, dim: int, spec: CoveringSpec) -> tuple[int, int]:
    """``(outer pieces per side, inner pieces)`` of layer ``j`` along ``dim``."""
    a = spec.aniso.a[dim]
    return _ceil(j ** (a - 1.0)), _ceil(j ** a)


def corridor_knots(j: int, dim: int, spec: CoveringSpec) -> tuple[np.ndarray, np.ndarray]:
    """Knots and knot cutoff radii of layer ``j`` along one dimension.

    Returns increasing ``knots`` (length = number of intervals + 1) and the
    radius ``eps`` assigned to every knot. Layer 0 returns ``[-1, 1]``.
    """
    c = spec.cutoff[dim]
    if j == 0:
        return np.array([-1.0, 1.0]), np.array([c, c])
    if j < 0:
        raise ValueError("layer index must be nonnegative")
    a = spec.aniso.a[dim]
    b = spec.beta
    n_out, n_in = corridor_counts(j, dim, spec)
    inner_edge = float(j) ** (a * b)
    outer_edge = float(j + 1) ** (a * b)
    pos = inner_edge + (outer_edge - inner_edge) * np.arange(n_out + 1) / n_out
    pos[-1] = outer_edge
    inner = inner_edge * (2.0 * np.arange(1, n_in) / n_in - 1.0)
    knots = np.concatenate([-pos[::-1], inner, pos])
    eps = np.full(knots.size, c * float(j) ** (a * (b - 1.0)))
    eps[0] = eps[-1] = c * float(j + 1) ** (a * (b - 1.0))
    return knots, eps


def _kinds(j: int, dim: int, spec: CoveringSpec) -> list[str]:
    if j == 0:
        return ["inner"]
    n_out, n_in = corridor_counts(j, dim, spec)
    return ["outer-negative"] * n_out + ["inner"] * n_in + ["outer-positive"] * n_out


def corridor_intervals(j: int, dim: int, spec: CoveringSpec) -> list[CutInterval]:
    """Ordered intervals tiling ``[-(j+1)**(a beta), (j+1)**(a beta))`` for ``j >= 1``."""
    if j < 1:
        raise ValueError("corridor_intervals needs j >= 1; layer 0 comes from build_layer")
    return _intervals(j, dim, spec)


def _intervals(j: int, dim: int, spec: CoveringSpec) -> list[CutInterval]:
    knots, eps = corridor_knots(j, dim, spec)
    kinds = _kinds(j, dim, spec)
    return [
        CutInterval(float(knots[m]), float(knots[m + 1]), float(eps[m]), float(eps[m + 1]),
                    kinds[m], j, dim)
        for m in range(len(kinds))
    ]


@lru_cache(maxsize=256)
def build_layer(j: int, spec: CoveringSpec) -> tuple[FreqRect, ...]:
    """Tiles of layer ``j`` in lexicographic order of their interval left ends."""
    if j < 0:
        raise ValueError("layer index must be nonnegative")
    per_dim = [_intervals(j, i, spec) for i in range(spec.d)]
    scale = spec.scale(j)
    rects = []
    k = 0
    for slot in itertools.product(*(range(len(p)) for p in per_dim)):
        ivs = tuple(per_dim[i][s] for i, s in enumerate(slot))
        if j > 0 and all(iv.kind == "inner" for iv in ivs):
            continue
        k += 1
        center = np.array([iv.center for iv in ivs])
        if j == 0:
            center = np.zeros(spec.d)
        rects.append(FreqRect(j, k, ivs, slot, center,
                              float(np.prod([iv.length for iv in ivs])), scale))
    return tuple(rects)


def layer_size(j: int, spec: CoveringSpec) -> int:
    if j == 0:
        return 1
    total, inner = 1, 1
    for i in range(spec.d):
        n_out, n_in = corridor_counts(j, i, spec)
        total *= 2 * n_out + n_in
        inner *= n_in
    return total - inner


def iter_rects(spec: CoveringSpec, j_max: int):
    for j in range(j_max + 1):
        yield from build_layer(j, spec)


def layer_of(xi, spec: CoveringSpec) -> int:
    """Corridor index of a frequency point."""
    n = float(quasi_norm_inf(np.asarray(xi, dtype=float), spec.aniso))
    if n < 1.0:
        return 0
    j = max(1, int(math.floor(n ** (1.0 / spec.beta))))
    while j > 1 and float(j) ** spec.beta > n:
        j -= 1
    while float(j + 1) ** spec.beta <= n:
        j += 1
    return j


def locate(xi, spec: CoveringSpec, j_max: int):
    """Return ``(j, k)`` of the tile containing ``xi`` or ``None`` beyond ``j_max``.

    Membership follows the half-open convention: a point on a knot belongs to
    the interval whose left end it is.
    """
    if j_max < 0:
        raise ValueError("j_max must be nonnegative")
    xi = np.asarray(xi, dtype=float)
    j = layer_of(xi, spec)
    if j > j_max:
        return None
    if j == 0:
        return 0, 1
    slot = []
    for i in range(spec.d):
        knots, _ = corridor_knots(j, i, spec)
        m = int(np.searchsorted(knots, xi[i], side="right")) - 1
        # Knot rounding can push a boundary point one slot off.
        m = min(max(m, 0), knots.size - 2)
        slot.append(m)
    return j, _slot_to_index(j, tuple(slot), spec)


def _slot_to_index(j: int, slot: tuple[int, ...], spec: CoveringSpec) -> int:
    counts = [corridor_counts(j, i, spec) for i in range(spec.d)]
    sizes = [2 * o + n for o, n in counts]
    lin = 0
    for i, s in enumerate(slot):
        lin = lin * sizes[i] + s
    # Subtract the all-inner tuples that precede ``slot`` lexicographically.
    skipped = 0
    for i, s in enumerate(slot):
        n_out, n_in = counts[i]
        below = min(max(s - n_out, 0), n_in)
        skipped += below * int(np.prod([counts[l][1] for l in range(i + 1, spec.d)]))
        if not n_out <= s < n_out + n_in:
            break
    return lin - skipped + 1


def rect_at(j: int, k: int, spec: CoveringSpec) -> FreqRect:
    return build_layer(j, spec)[k - 1]


# ---------------------------------------------------------------------------
# verification


@dataclass
class CoveringReport:
    j_max: int
    partition_max_rel_err: float = 0.0
    lemma_a_violations: list = field(default_factory=list)
    lemma_b_violations: list = field(default_factory=list)
    lemma_c_violations: list = field(default_factory=list)
    cutoff_violations: list = field(default_factory=list)
    cutoff_min_ratio: float = math.inf
    geometric_ratio: tuple[float, float] = (math.inf, 0.0)
    overlap_n0: int = 0
    eccentricity_K: float = 0.0
    constants: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.partition_max_rel_err <= _REL and not self.lemma_a_violations
                and not self.lemma_b_violations and not self.lemma_c_violations
                and not self.cutoff_violations)


def _inflated_hits(lo, hi, knots, eps_scale, c7):
    centers = 0.5 * (knots[:-1] + knots[1:])
    lo2, hi2 = centers - c7 * eps_scale, centers + c7 * eps_scale
    return (lo2 <= hi) & (hi2 >= lo)


def verify_alpha_covering(spec: CoveringSpec, j_max: int, samples: int = 1000,
                          rng: np.random.Generator | None = None,
                          constants: str = "stated") -> CoveringReport:
    """Check partition exactness, the interval/measure/affine bounds and the
    alpha-covering geometry of all layers up to ``j_max``.

    Interval-level bounds are checked on every generated interval; the measure
    bound is checked on the extreme products per layer, which covers every
    tile. The geometric relation, overlap count and eccentricity are estimated
    from ``samples`` random tiles.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    rep = CoveringReport(j_max)
    if constants == "stated":
        rule = lemma_constants
    elif constants == "corrected":
        rule = corrected_lemma_constants
    else:
        raise ValueError("constants must be 'stated' or 'corrected'")
    pairs = np.array([rule(a, spec.beta) for a in spec.aniso.a])
    c1, c2 = pairs[:, 0], pairs[:, 1]
    c3, c4 = float(np.prod(c1)), float(np.prod(c2))
    c5, c6 = 0.5 * float(np.min(c1)), 0.5 * float(np.max(c2))
    rep.constants = {"c1": c1.tolist(), "c2": c2.tolist(), "c3": c3, "c4": c4,
                     "c5": c5, "c6": c6, "c7": spec.c7}
    tol = 1e-12
    for j in range(0, j_max + 1):
        scale = spec.scale(j)
        mins, maxs = [], []
        for i in range(spec.d):
            knots, eps = corridor_knots(j, i, spec)
            lengths = np.diff(knots)
            width = knots[-1] - knots[0]
            expected = 2.0 if j == 0 else 2.0 * float(j + 1) ** (spec.aniso.a[i] * spec.beta)
            err = max(abs(lengths.sum() - width) / width, abs(width - expected) / expected)
            rep.partition_max_rel_err = max(rep.partition_max_rel_err, err)
            slack = lengths - eps[:-1] - eps[1:]
            if np.any(slack < -tol * knots[-1]):
                rep.cutoff_violations.append((j, i, float(slack.min())))
            rep.cutoff_min_ratio = min(rep.cutoff_min_ratio,
                                       float(np.min(eps[:-1] / lengths)))
            if j >= 1:
                low, high = c1[i] * scale[i], c2[i] * scale[i]
                if np.any(lengths < low * (1 - tol)) or np.any(lengths > high * (1 + tol)):
                    rep.lemma_a_violations.append((j, i, float(lengths.min()), float(lengths.max())))
                half = 0.5 * lengths
                if (np.any(half < c5 * scale[i] * (1 - tol))
                        or np.any(half > c6 * scale[i] * (1 + tol))):
                    rep.lemma_c_violations.append((j, i))
            mins.append(lengths.min())
            maxs.append(lengths.max())
        if j >= 1:
            base = float(j) ** (spec.aniso.nu * (spec.beta - 1.0))
            if (np.prod(mins) < c3 * base * (1 - tol)
                    or np.prod(maxs) > c4 * base * (1 + tol)):
                rep.lemma_b_violations.append((j, float(np.prod(mins)), float(np.prod(maxs))))

    # Sampled tiles: geometric relation, overlap of the expanded covering, eccentricity.
    gmin, gmax, n0, K = math.inf, 0.0, 0, 0.0
    for _ in range(samples):
        j = int(rng.integers(0, j_max + 1))
        lo, hi, kinds = [], [], []
        for i in range(spec.d):
            knots, _ = corridor_knots(j, i, spec)
            m = int(rng.integers(0, knots.size - 1))
            lo.append(knots[m])
            hi.append(knots[m + 1])
            kinds.append(_kinds(j, i, spec)[m])
        if j > 0 and all(k == "inner" for k in kinds):
            continue
        lo, hi = np.array(lo), np.array(hi)
        x = lo + rng.random(spec.d) * (hi - lo)
        meas = float(np.prod(hi - lo))
        if j >= 1:
            g = meas ** (1.0 / spec.aniso.nu) / float(bracket(x, spec.aniso)) ** spec.alpha
            gmin, gmax = min(gmin, g), max(gmax, g)
        halfs = 0.5 * (hi - lo)
        r_in = float(np.min(halfs ** (1.0 / spec.aniso.vec)))
        r_out = float(quasi_norm(halfs, spec.aniso))
        K = max(K, r_out / r_in)
        # neighbours of the expanded tile among expanded tiles of nearby layers
        center = 0.5 * (lo + hi)
        s = spec.scale(j)
        elo, ehi = center - spec.c7 * s, center + spec.c7 * s
        count = 0
        for jj in range(max(0, j - 4), min(j_max, j + 4) + 1):
            hits, inner_hits = 1, 1
            for i in range(spec.d):
                knots, _ = corridor_knots(jj, i, spec)
                h = _inflated_hits(elo[i], ehi[i], knots, spec.scale(jj)[i], spec.c7)
                hits *= int(h.sum())
                if jj > 0:
                    n_out, _n = corridor_counts(jj, i, spec)
                    inner_hits *= int(h[n_out:knots.size - 1 - n_out].sum())
            count += hits - (inner_hits if jj > 0 else 0)
        n0 = max(n0, count)
    rep.geometric_ratio = (gmin, gmax)
    rep.overlap_n0 = n0
    rep.eccentricity_K = K
    return rep


# ---------------------------------------------------------------------------
# exports


def layer_to_dict(j: int, spec: CoveringSpec) -> dict:
    return {
        "j": j,
        "spec": spec.to_dict(),
        "rects": [
            {
                "j": r.layer,
                "k": r.index,
                "intervals": [[iv.left, iv.right, iv.eps_left, iv.eps_right]
                              for iv in r.intervals],
                "center": r.center.tolist(),
                "measure": r.measure,
            }
            for r in build_layer(j, spec)
        ],
    }


def tiling_svg(spec: CoveringSpec, j_max: int, stroke: float | None = None) -> str:
    """SVG drawing of the d = 2 tiling in frequency coordinates.

    Corridor outlines are thick polygons (class ``corridor``), tiles are thin
    rectangles (class ``tile``). The y axis is flipped by a group transform so
    coordinates in the file are the frequency coordinates themselves.
    """
    if spec.d != 2:
        raise ValueError("SVG export is only defined for d = 2")
    ext = [float(j_max + 1) ** (a * spec.beta) for a in spec.aniso.a]
    if j_max == 0:
        ext = [1.0, 1.0]
    w = stroke if stroke is not None else 0.002 * max(ext)
    pad = 0.05 * max(ext)
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{-ext[0] - pad:.9f} {-ext[1] - pad:.9f} {2 * (ext[0] + pad):.9f} '
        f'{2 * (ext[1] + pad):.9f}">',
        '<g transform="scale(1,-1)" fill="none" stroke="black">',
    ]
    for j in range(j_max + 1):
        for r in build_layer(j, spec):
            x0, y0 = r.left
            x1, y1 = r.right
            lines.append(
                f'<rect class="tile" data-j="{j}" data-k="{r.index}" x="{x0:.9f}" y="{y0:.9f}" '
                f'width="{x1 - x0:.9f}" height="{y1 - y0:.9f}" stroke-width="{w:.6g}"/>'
            )
    for j in range(j_max + 1):
        ex = 1.0 if j == 0 else float(j + 1) ** (spec.aniso.a[0] * spec.beta)
        ey = 1.0 if j == 0 else float(j + 1) ** (spec.aniso.a[1] * spec.beta)
        pts = [(ex, ey), (-ex, ey), (-ex, -ey), (ex, -ey)]
        lines.append(
            f'<polygon class="corridor" data-j="{j}" points="'
            + " ".join(f"{x:.9f},{y:.9f}" for x, y in pts)
            + f'" stroke-width="{4 * w:.6g}"/>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
