"""Cells ``U(R, n)`` and the sequence-space (quasi-)norms.

A cell is ``{y : |delta_R y - pi (n + 1/2)|_a < 1}``. The anisotropic unit
ball coincides with the Euclidean one, so in the scaled coordinates
``z = delta_R y`` a cell is a Euclidean unit ball around ``pi (n + 1/2)``.
Centres are ``pi`` apart, so the cells of one tile are pairwise disjoint.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .anisotropy import Anisotropy, quasi_norm, unit_ball_volume
from .covering import CoveringSpec, FreqRect, rect_at
from .transform import row_codes


class UnresolvedCellWarning(UserWarning):
    """Spatial quadrature too coarse for the cells it integrates."""


@dataclass(frozen=True)
class NormParams:
    s: float
    p: float
    q: float
    alpha: float
    nu: float

    def __post_init__(self):
        if not self.p > 0 or not math.isfinite(self.p):
            raise ValueError("p must be positive and finite")
        if not self.q > 0:
            raise ValueError("q must be positive (math.inf allowed)")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")

    @classmethod
    def for_spec(cls, spec: CoveringSpec, s: float, p: float, q: float) -> "NormParams":
        return cls(float(s), float(p), float(q), spec.alpha, spec.aniso.nu)

    @property
    def weight_exponent(self) -> float:
        """Exponent of ``|R|`` in the mixed-norm form: ``s/nu + 1/2 - 1/p``."""
        return self.s / self.nu + 0.5 - 1.0 / self.p


@dataclass(frozen=True)
class Cell:
    """``U(R, n)``. With ``aniso`` set, membership goes through the quasi-norm;
    otherwise through the Euclidean norm, which defines the same set."""

    rect: FreqRect
    n: tuple[int, ...]
    aniso: Anisotropy | None = None

    @property
    def delta(self) -> np.ndarray:
        return self.rect.lengths

    @property
    def center(self) -> np.ndarray:
        return np.pi * (np.asarray(self.n, dtype=float) + 0.5) / self.delta

    @property
    def measure(self) -> float:
        return unit_ball_volume(self.rect.d) / self.rect.measure

    def contains(self, x) -> np.ndarray:
        z = self.delta * np.asarray(x, dtype=float) - np.pi * (np.asarray(self.n) + 0.5)
        if self.aniso is None:
            return np.linalg.norm(z, axis=-1) < 1.0
        return quasi_norm(z, self.aniso) < 1.0


def cell(rect: FreqRect, n, aniso: Anisotropy | None = None) -> Cell:
    return Cell(rect, tuple(int(v) for v in n), aniso)


def overlap_count(rect: FreqRect, x) -> np.ndarray:
    """``sum_n 1_{U(R, n)}(x)``, checking every lattice neighbour of ``delta x / pi``."""
    x = np.asarray(x, dtype=float)
    z = rect.lengths * x
    base = np.floor(z / np.pi - 0.5)
    total = np.zeros(x.shape[:-1], dtype=int)
    d = rect.d
    for corner in np.ndindex(*(2,) * d):
        n = base + np.asarray(corner)
        ok = np.all(n >= 0, axis=-1)
        dist = np.linalg.norm(z - np.pi * (n + 0.5), axis=-1)
        total += (ok & (dist < 1.0)).astype(int)
    return total


# ---------------------------------------------------------------------------
# mixed norm


def _blocks(coeffs):
    """``[(|R|, [|s| ...]), ...]`` in tile order of first appearance."""
    out = []
    for (j, k), rows in coeffs.rects().items():
        meas = rect_at(j, k, coeffs.spec).measure
        out.append((meas, [abs(complex(coeffs.values[r])) for r in rows]))
    return out


def m_norm_blocks(blocks, params: NormParams) -> float:
    """Mixed norm from ``(measure, magnitudes)`` blocks, summed left to right."""
    e, p, q = params.weight_exponent, params.p, params.q
    if math.isinf(q):
        best = 0.0
        for meas, mags in blocks:
            inner = 0.0
            for v in mags:
                inner += v ** p
            best = max(best, meas ** e * inner ** (1.0 / p))
        return best
    total = 0.0
    for meas, mags in blocks:
        inner = 0.0
        for v in mags:
            inner += v ** p
        total += meas ** (e * q) * inner ** (q / p)
    return total ** (1.0 / q)


def m_norm(coeffs, params: NormParams) -> float:
    """``(sum_R |R|**((s/nu + 1/2 - 1/p) q) (sum_n |s|**p)**(q/p))**(1/q)``."""
    return m_norm_blocks(_blocks(coeffs), params)


# ---------------------------------------------------------------------------
# integrated norm


def _delta_key(delta) -> tuple:
    # Lengths of equal tiles agree to rounding only.
    return tuple(float(f"{v:.12g}") for v in delta)


@dataclass
class CellTable:
    """Distinct nonzero cells. Cells of different tiles with equal ``delta``
    and ``n`` coincide and are merged, their values combined with exponent ``q``."""

    delta: np.ndarray      # (G, d)
    n: np.ndarray          # (G, d)
    combined: np.ndarray   # sum of v**q, or max v when q is infinite

    def __len__(self) -> int:
        return self.combined.size

    @property
    def center(self) -> np.ndarray:
        return np.pi * (self.n + 0.5) / self.delta

    @property
    def half(self) -> np.ndarray:
        return 1.0 / self.delta


def cell_table(coeffs, s: float, q: float) -> CellTable:
    """Per-tile values ``|R|**(s/nu + 1/2) |c|`` merged over coinciding cells."""
    d = coeffs.spec.d
    mags = np.abs(coeffs.values)
    live = mags > 0
    keys, mags = coeffs.keys[live], mags[live]
    if not mags.size:
        return CellTable(np.zeros((0, d)), np.zeros((0, d)), np.zeros(0))
    nu = coeffs.spec.aniso.nu
    _, first, inv = np.unique(row_codes(keys[:, :2]), return_index=True, return_inverse=True)
    tiles, inv = keys[first, :2], inv.ravel()
    lengths = np.empty((len(tiles), d))
    rounded = np.empty((len(tiles), d))
    weight = np.empty(len(tiles))
    for i, (j, k) in enumerate(tiles):
        rect = rect_at(int(j), int(k), coeffs.spec)
        lengths[i] = rect.lengths
        rounded[i] = _delta_key(rect.lengths)
        weight[i] = rect.measure ** (s / nu + 0.5)
    vals = weight[inv] * mags
    _, shape_id = np.unique(rounded, axis=0, return_inverse=True)
    codes = row_codes(np.column_stack([shape_id.ravel()[inv], keys[:, 2:]]))
    _, where, ginv = np.unique(codes, return_index=True, return_inverse=True)
    ginv = ginv.ravel()
    combined = np.zeros(where.size)
    if math.isinf(q):
        np.maximum.at(combined, ginv, vals)
    else:
        np.add.at(combined, ginv, vals ** q)
    return CellTable(lengths[inv][where], keys[where, 2:].astype(float), combined)


def _finish(total, p: float, q: float):
    return total ** p if math.isinf(q) else total ** (p / q)


@dataclass
class FNormReport:
    value: float
    cells: int
    isolated: int
    nodes: int
    nodes_per_diameter: int


def f_norm_report(coeffs, params: NormParams, nodes_per_diameter: int = 64) -> FNormReport:
    """Integrated norm with diagnostics.

    Coinciding cells are merged first. A cell that meets no other nonzero
    cell is integrated exactly (the integrand is constant on it). Every other
    cell is sampled at midpoints of a grid aligned to its centre with
    ``nodes_per_diameter`` nodes across, and each sample is divided by the
    number of cells containing it, so overlapping regions are not counted
    twice. Sample means are scaled by the exact cell volume.
    """
    if nodes_per_diameter < 8:
        warnings.warn(f"{nodes_per_diameter} nodes per cell diameter cannot resolve the cells",
                      UnresolvedCellWarning, stacklevel=2)
    p, q = params.p, params.q
    d = coeffs.spec.d
    ball = unit_ball_volume(d)
    table = cell_table(coeffs, params.s, q)
    if not len(table):
        return FNormReport(0.0, 0, 0, 0, nodes_per_diameter)
    centers, halfs, combined = table.center, table.half, table.combined
    radius = float(np.max(np.linalg.norm(halfs, axis=1)))
    neighbours = [[] for _ in range(len(table))]
    if len(table) > 1:
        tree = cKDTree(centers)
        pairs = tree.query_pairs(2.0 * radius, output_type="ndarray")
        # boxes must meet before the balls can
        a, b = pairs[:, 0], pairs[:, 1]
        meet = np.all(np.abs(centers[a] - centers[b]) < halfs[a] + halfs[b], axis=1)
        for u, v in pairs[meet]:
            neighbours[u].append(v)
            neighbours[v].append(u)

    N = nodes_per_diameter
    ticks = -1.0 + (np.arange(N) + 0.5) * 2.0 / N
    local = np.stack(np.meshgrid(*[ticks] * d, indexing="ij"), axis=-1).reshape(-1, d)
    local = local[np.linalg.norm(local, axis=1) < 1.0]

    vols = ball / np.prod(table.delta, axis=1)
    lonely = np.array([not nb for nb in neighbours])
    total = float(np.sum(vols[lonely] * _finish(combined[lonely], p, q)))
    nodes = 0
    for gi in np.flatnonzero(~lonely):
        x = centers[gi] + local * halfs[gi]
        acc = np.full(x.shape[0], combined[gi])
        count = np.ones(x.shape[0])
        for h in neighbours[gi]:
            inside = np.linalg.norm(table.delta[h] * x - np.pi * (table.n[h] + 0.5), axis=1) < 1.0
            if math.isinf(q):
                acc = np.where(inside, np.maximum(acc, combined[h]), acc)
            else:
                acc = acc + inside * combined[h]
            count = count + inside
        nodes += x.shape[0]
        total += vols[gi] * float(np.mean(_finish(acc, p, q) / count))
    isolated = int(lonely.sum())
    return FNormReport(total ** (1.0 / p), len(table), isolated, nodes, N)


def f_norm(coeffs, params: NormParams, nodes_per_diameter: int = 64) -> float:
    """``|| (sum_R (sum_n |R|**(s/nu) |s| 1~_U)**q)**(1/q) ||_{L_p}``."""
    return f_norm_report(coeffs, params, nodes_per_diameter).value


def square_function_eval(coeffs, s: float, q: float, x) -> np.ndarray:
    """Pointwise square function from a finite coefficient set."""
    x = np.asarray(x, dtype=float)
    table = cell_table(coeffs, s, q)
    acc = np.zeros(x.shape[:-1])
    for dl, n, c in zip(table.delta, table.n, table.combined):
        inside = np.linalg.norm(dl * x - np.pi * (n + 0.5), axis=-1) < 1.0
        acc = np.where(inside, np.maximum(acc, c), acc) if math.isinf(q) else acc + inside * c
    return acc if math.isinf(q) else acc ** (1.0 / q)


# ---------------------------------------------------------------------------
# Lorentz


def lorentz_norm(seq, tau: float, r: float) -> float:
    """Discrete Lorentz norm of the decreasing rearrangement of ``|seq|``."""
    if not tau > 0 or not r > 0:
        raise ValueError("tau and r must be positive")
    a = np.sort(np.abs(np.asarray(seq, dtype=complex)).astype(float))[::-1]
    if a.size == 0:
        return 0.0
    k = np.arange(1, a.size + 1, dtype=float)
    if math.isinf(r):
        return float(np.max(k ** (1.0 / tau) * a))
    return float(np.sum((k ** (1.0 / tau) * a) ** r / k) ** (1.0 / r))


def write_norm_csv(path, rows: list[dict]) -> Path:
    """One row per evaluated norm; columns are the union of the dict keys."""
    path = Path(path)
    cols: list[str] = []
    for row in rows:
        cols.extend(c for c in row if c not in cols)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in row.items()})
    return path
