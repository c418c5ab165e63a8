"""Greedy m-term approximation and empirical rate experiments.

All experiments run on coefficient sets directly. The ranking of an entry is
its magnitude times ``|R|**(gamma/nu - 1/tau + 1/2)``; for a mixed norm with
``p == q`` and the same exponent this ranking yields the best m-term
approximation, in every other case the greedy error is an upper bound.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .covering import CoveringSpec, build_layer, layer_size, rect_at
from .seqnorm import NormParams, f_norm, m_norm
from .transform import CoefficientSet, row_codes


class ParameterError(ValueError):
    """Exponents violate the relation an experiment is built on."""


BALANCE_TOL = 1e-9


def _subset(coeffs: CoefficientSet, rows) -> CoefficientSet:
    rows = np.asarray(rows, dtype=int)
    return CoefficientSet(coeffs.spec, coeffs.keys[rows], coeffs.values[rows], coeffs.ramp)


def _tile_measures(coeffs: CoefficientSet) -> np.ndarray:
    """``|R|`` for every row."""
    if not len(coeffs):
        return np.zeros(0)
    _, first, inv = np.unique(row_codes(coeffs.keys[:, :2]), return_index=True, return_inverse=True)
    tiles = coeffs.keys[first, :2]
    meas = np.array([rect_at(int(j), int(k), coeffs.spec).measure for j, k in tiles])
    return meas[inv.ravel()]


def ranking_scores(coeffs: CoefficientSet, ranking: NormParams) -> np.ndarray:
    return np.abs(coeffs.values) * _tile_measures(coeffs) ** ranking.weight_exponent


def greedy_order(coeffs: CoefficientSet, ranking: NormParams) -> np.ndarray:
    """Rows by decreasing score; equal scores keep row order."""
    return np.argsort(-ranking_scores(coeffs, ranking), kind="stable")


def greedy_m_term(coeffs: CoefficientSet, m: int, ranking: NormParams) -> CoefficientSet:
    """Keep the ``m`` best-ranked entries (in their original row order)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    keep = np.sort(greedy_order(coeffs, ranking)[:m])
    return _subset(coeffs, keep)


def is_exact(error: NormParams, ranking: NormParams, kind: str) -> bool:
    return (kind == "m" and error.p == error.q
            and math.isclose(error.weight_exponent, ranking.weight_exponent,
                             rel_tol=0, abs_tol=1e-12))


class SigmaRow(NamedTuple):
    m: int
    sigma: float
    exact: bool


def _error_norm(kind: str):
    if kind == "m":
        return m_norm
    if kind == "f":
        return f_norm
    raise ValueError(f"unknown error norm {kind!r}; use 'm' or 'f'")


def sigma_m_curve(coeffs: CoefficientSet, error: NormParams, m_list, kind: str = "m",
                  ranking: NormParams | None = None) -> list[SigmaRow]:
    """Error of the greedy residual for each ``m``.

    ``kind`` picks the mixed (``"m"``) or integrated (``"f"``) norm. The
    ranking defaults to the error parameters.
    """
    ranking = error if ranking is None else ranking
    norm = _error_norm(kind)
    exact = is_exact(error, ranking, kind)
    order = greedy_order(coeffs, ranking)
    rows = []
    for m in m_list:
        m = int(m)
        if m < 0:
            raise ValueError("m must be nonnegative")
        residual = _subset(coeffs, np.sort(order[m:]))
        rows.append(SigmaRow(m, float(norm(residual, error)), exact))
    return rows


class Seminorm(NamedTuple):
    value: float
    m_max: int
    form: str


def approx_space_seminorm(sigma_table, gamma: float, q: float) -> Seminorm:
    """Truncated ``(sum_m (m**gamma sigma_m)**q / m)**(1/q)``.

    A table with every ``m`` from 1 to ``M`` uses the sum as written. A table
    on powers of two uses the equivalent dyadic form
    ``(sum_k (2**(k gamma) sigma_{2**k})**q)**(1/q)``. ``m = 0`` rows are
    ignored. ``m_max`` is the truncation bound.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    pairs = sorted((int(r[0]), float(r[1])) for r in sigma_table if int(r[0]) >= 1)
    if not pairs:
        return Seminorm(0.0, 0, "empty")
    m = np.array([p[0] for p in pairs], dtype=float)
    s = np.array([p[1] for p in pairs])
    if np.array_equal(m, np.arange(1, m.size + 1)):
        form, w = "full", 1.0 / m
    elif np.all(np.log2(m) == np.round(np.log2(m))) and np.all(np.diff(np.log2(m)) == 1):
        form, w = "dyadic", np.ones_like(m)
    else:
        raise ValueError("sigma table must list m = 1..M or consecutive powers of two")
    terms = m ** gamma * s
    if math.isinf(q):
        value = float(np.max(terms))
    else:
        value = float(np.sum(w * terms ** q) ** (1.0 / q))
    return Seminorm(value, int(m[-1]), form)


# ---------------------------------------------------------------------------
# experiments


def jackson_r(nu: float, alpha: float, p: float, t: float) -> float:
    if t >= p:
        return 0.0
    if alpha <= 0:
        raise ParameterError("t < p needs alpha > 0")
    return nu * (1.0 - alpha) / alpha


def fit_slope(m, sigma) -> float:
    """Least-squares slope of ``log sigma`` against ``log m``."""
    x, y = np.log(np.asarray(m, float)), np.log(np.asarray(sigma, float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class RateExperiment:
    gamma: float
    tau: float
    beta: float
    p: float
    t: float
    alpha: float
    a: tuple
    m_grid: list
    predicted_slope: float
    fitted_slope: float
    residual: float
    trial_slopes: list = field(default_factory=list)
    lower_slopes: list = field(default_factory=list)
    sigma: list = field(default_factory=list)      # per trial, aligned with m_grid
    profiles: list = field(default_factory=list)
    exact: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        out = []
        for i, (prof, sig) in enumerate(zip(self.profiles, self.sigma)):
            for m, s in zip(self.m_grid, sig):
                out.append({"trial": i, "profile": prof, "m": m, "sigma": s,
                            "fitted_slope": self.trial_slopes[i],
                            "predicted_slope": self.predicted_slope})
        return out


def same_delta_tiles(spec: CoveringSpec, j: int, count: int) -> list[int]:
    """Tile indices of layer ``j`` sharing the most common side lengths."""
    groups: dict = {}
    for r in build_layer(j, spec):
        key = tuple(float(f"{v:.12g}") for v in r.lengths)
        groups.setdefault(key, []).append(r.index)
    best = max(groups.values(), key=len)
    return best[:count]


def _jackson_trial(args):
    (spec, gamma, tau, beta, p, t, m_grid, profile, layer, tiles, side, size, seed) = args
    rng = np.random.default_rng(seed)
    d = spec.d
    slots = len(tiles) * side ** d
    pick = rng.choice(slots, size=size, replace=False)
    tile_of, flat = np.divmod(pick, side ** d)
    n = np.stack(np.unravel_index(flat, (side,) * d), axis=1)
    k = np.arange(1, size + 1, dtype=float)
    mags = k ** (-1.0 / tau)
    if profile == "random":
        mags = mags * rng.uniform(0.25, 1.0, size)
    signs = rng.choice([-1.0, 1.0], size)
    keys = np.column_stack([np.full(size, layer), np.asarray(tiles)[tile_of], n])
    meas = rect_at(layer, tiles[0], spec).measure
    source = NormParams.for_spec(spec, gamma, tau, tau)
    c = CoefficientSet(spec, keys, signs * mags * meas ** (-source.weight_exponent))
    c = c.like(c.values / m_norm(c, source))
    error = NormParams.for_spec(spec, beta, p, t)
    table = sigma_m_curve(c, error, m_grid, kind="f", ranking=source)
    return [r.sigma for r in table], table[0].exact


def jackson_experiment(spec: CoveringSpec, gamma: float, tau: float, beta: float, p: float,
                       t: float, m_grid=None, trials: int = 5, profiles=("extremal", "random"),
                       layer: int = 2, tiles: int = 8, oversize: int = 8, seed: int = 0,
                       jobs: int = 1) -> RateExperiment:
    """Fitted vs predicted decay of greedy errors in the integrated norm.

    Sources have unit mixed ``(gamma, tau, tau)`` norm with magnitudes
    ``k**(-1/tau)`` (``"extremal"``) or the same times uniform factors
    (``"random"``), random signs and random positions on tiles of one layer
    that share their side lengths. Trials cycle through ``profiles``.
    """
    m_grid = [2 ** i for i in range(13)] if m_grid is None else [int(m) for m in m_grid]
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])) or m_grid[0] < 1:
        raise ValueError("m grid must be positive and strictly increasing")
    if not 0 < tau < p:
        raise ParameterError("need 0 < tau < p")
    if not beta < gamma:
        raise ParameterError("need beta < gamma")
    nu = spec.aniso.nu
    r = jackson_r(nu, spec.alpha, p, t)
    lhs, rhs = 1 / tau - 1 / p, (gamma - beta) / nu - r / t
    if abs(lhs - rhs) > BALANCE_TOL:
        raise ParameterError(f"balance fails: 1/tau - 1/p = {lhs:.6g} but "
                             f"(gamma - beta)/nu - r/t = {rhs:.6g}")
    predicted = -(gamma - beta) / nu + r / t
    tile_ids = same_delta_tiles(spec, layer, tiles)
    size = oversize * m_grid[-1]
    side = max(2, math.ceil((4 * size / len(tile_ids)) ** (1 / spec.d)))
    seeds = np.random.SeedSequence(seed).generate_state(trials)
    kinds = [profiles[i % len(profiles)] for i in range(trials)]
    work = [(spec, gamma, tau, beta, p, t, m_grid, kinds[i], layer, tile_ids, side, size,
             int(seeds[i])) for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_jackson_trial, work))
    else:
        results = [_jackson_trial(w) for w in work]
    half = len(m_grid) // 2
    upper = [fit_slope(m_grid[half:], s[half:]) for s, _ in results]
    lower = [fit_slope(m_grid[:half + 1], s[:half + 1]) for s, _ in results]
    fitted = float(np.mean(upper))
    return RateExperiment(gamma, tau, beta, p, t, spec.alpha, tuple(spec.aniso.a), m_grid,
                          predicted, fitted, fitted - predicted, upper, lower,
                          [s for s, _ in results], kinds, results[0][1])


# ---------------------------------------------------------------------------
# Bernstein


@dataclass
class BernsteinReport:
    variant: int
    n_grid: list
    max_ratio: list
    slope: float
    gamma_source: float

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [{"variant": self.variant, "n": n, "max_ratio": r, "slope": self.slope}
                for n, r in zip(self.n_grid, self.max_ratio)]


def bernstein_check_relation(nu, gamma, beta, p, t, tau, q, variant: int):
    rate = (gamma - beta) / nu
    if not beta < gamma:
        raise ParameterError("need beta < gamma")
    if variant == 1:
        ok = (abs(1 / tau - 1 / p - rate) <= BALANCE_TOL
              and abs(1 / q - 1 / t - rate) <= BALANCE_TOL)
        if not ok:
            raise ParameterError("need 1/tau - 1/p = 1/q - 1/t = (gamma - beta)/nu")
    elif variant == 2:
        if abs(1 / tau - rate - 1 / p) > BALANCE_TOL:
            raise ParameterError("need 1/tau = (gamma - beta)/nu + 1/p")
    else:
        raise ValueError("variant must be 1 or 2")


def random_n_term(spec: CoveringSpec, n: int, rng, layers=(1, 6), side: int = 16) -> CoefficientSet:
    """``n`` distinct random entries on tiles of the given layer range."""
    lo, hi = layers
    sizes = np.array([layer_size(j, spec) for j in range(lo, hi + 1)])
    entries: dict = {}
    while len(entries) < n:
        j = int(rng.choice(np.arange(lo, hi + 1), p=sizes / sizes.sum()))
        k = int(rng.integers(1, layer_size(j, spec) + 1))
        nn = tuple(int(v) for v in rng.integers(0, side, spec.d))
        if (j, k, nn) not in entries:
            entries[(j, k, nn)] = float(np.exp(rng.normal(0, 2))) * rng.choice([-1.0, 1.0])
    return CoefficientSet.from_entries(spec, entries)


def bernstein_ratio(g: CoefficientSet, spec: CoveringSpec, gamma, beta, p, t, tau, q,
                    variant: int) -> float:
    nu = spec.aniso.nu
    n = len(g)
    rate = (gamma - beta) / nu
    if variant == 1:
        top = m_norm(g, NormParams.for_spec(spec, gamma, tau, q))
        bottom = m_norm(g, NormParams.for_spec(spec, beta, p, t))
    else:
        shifted = gamma - nu ** 2 * (1 - spec.alpha) / (tau * spec.alpha)
        top = m_norm(g, NormParams.for_spec(spec, shifted, tau, tau))
        bottom = f_norm(g, NormParams.for_spec(spec, beta, p, t))
    return top / (n ** rate * bottom)


def bernstein_experiment(spec: CoveringSpec, gamma, beta, p, t, tau, q=None, n_grid=None,
                         trials: int = 10, variant: int = 1, seed: int = 0,
                         layers=(1, 6)) -> BernsteinReport:
    """Largest observed ratio per ``n`` and its log-log growth slope."""
    if variant == 2 and spec.alpha <= 0:
        raise ParameterError("the shifted variant needs alpha > 0")
    q = tau if q is None else q
    bernstein_check_relation(spec.aniso.nu, gamma, beta, p, t, tau, q, variant)
    n_grid = [2 ** i for i in range(4, 11)] if n_grid is None else [int(n) for n in n_grid]
    rng = np.random.default_rng(seed)
    worst = []
    for n in n_grid:
        side = max(16, math.ceil(math.sqrt(n)))
        worst.append(max(bernstein_ratio(random_n_term(spec, n, rng, layers, side), spec,
                                         gamma, beta, p, t, tau, q, variant)
                         for _ in range(trials)))
    gamma_src = gamma if variant == 1 else gamma - spec.aniso.nu ** 2 * (1 - spec.alpha) / (tau * spec.alpha)
    return BernsteinReport(variant, n_grid, worst, fit_slope(n_grid, worst), gamma_src)


# ---------------------------------------------------------------------------
# counting lemma


@dataclass
class CountingReport:
    constant: float
    points: int
    skipped: int
    size: int


@dataclass(frozen=True)
class CellFamily:
    """Cells sharing side lengths ``delta``: ``members(n)`` gives how many
    tiles of the index set carry frequency index ``n`` (rows of ``n``)."""

    delta: np.ndarray
    measure: float
    members: object


class BoxIndexSet:
    """Every ``(R, n)`` with ``R`` in the given layers and the centre of
    ``U(R, n)`` in ``[0, side)**d``. Never enumerated; its size is counted."""

    def __init__(self, spec: CoveringSpec, layers, side: float):
        self.spec, self.layers, self.side = spec, tuple(layers), float(side)
        tally: dict = {}
        for j in self.layers:
            for r in build_layer(j, spec):
                key = tuple(float(f"{v:.12g}") for v in r.lengths)
                tally[key] = tally.get(key, 0) + 1
        self._tally = tally

    def _limit(self, delta) -> np.ndarray:
        # centre pi (n + 1/2) / delta < side  <=>  n < side delta / pi - 1/2
        return np.ceil(self.side * delta / np.pi - 0.5).astype(np.int64)

    @property
    def size(self) -> int:
        return sum(c * math.prod(max(int(v), 0) for v in self._limit(np.array(k)))
                   for k, c in self._tally.items())

    def families(self) -> list[CellFamily]:
        out = []
        for key, count in self._tally.items():
            delta = np.array(key)
            limit = self._limit(delta)

            def members(n, limit=limit, count=count):
                return np.where(np.all((n >= 0) & (n < limit), axis=1), count, 0)

            out.append(CellFamily(delta, float(np.prod(delta)), members))
        return out


def _explicit_families(index_set: CoefficientSet) -> list[CellFamily]:
    spec = index_set.spec
    keys = index_set.keys
    _, first, inv = np.unique(row_codes(keys[:, :2]), return_index=True, return_inverse=True)
    tiles, inv = keys[first, :2], inv.ravel()
    shape = np.array([[float(f"{v:.12g}") for v in rect_at(int(j), int(k), spec).lengths]
                      for j, k in tiles])
    _, shape_first, shape_id = np.unique(shape, axis=0, return_index=True, return_inverse=True)
    shape_id = shape_id.ravel()[inv]
    out = []
    for g, t in enumerate(shape_first):
        n = keys[shape_id == g, 2:]
        radix = n.max(axis=0) + 1
        codes, counts = np.unique(np.ravel_multi_index(n.T, tuple(int(r) for r in radix)),
                                  return_counts=True)

        def members(m, radix=radix, codes=codes, counts=counts):
            ok = np.all((m >= 0) & (m < radix), axis=1)
            c = np.ravel_multi_index(np.where(ok[:, None], m, 0).T, tuple(int(r) for r in radix))
            pos = np.minimum(np.searchsorted(codes, c), codes.size - 1)
            return np.where(ok & (codes[pos] == c), counts[pos], 0)

        delta = rect_at(int(tiles[t, 0]), int(tiles[t, 1]), spec).lengths
        out.append(CellFamily(delta, float(np.prod(delta)), members))
    return out


def _index_size(index_set) -> int:
    return index_set.size if isinstance(index_set, BoxIndexSet) else len(index_set)


def counting_bound_check(spec: CoveringSpec, index_set, q: float, sample_pts=None,
                         random_points: int = 20000, seed: int = 0) -> CountingReport:
    """Largest ratio of ``sum |R|**(q - nu(1-alpha)/alpha) 1_U(x)`` to ``I(x)**q``.

    ``index_set`` is a :class:`BoxIndexSet` or a coefficient set whose keys
    are the indices (values ignored). Without explicit points, uniform random
    points of ``[0, side)**d`` (box sets) or of the bounding box of the cells
    (explicit sets) are used. Points outside every cell are skipped.
    """
    if not 0 < spec.alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    e = q - spec.aniso.nu * (1 - spec.alpha) / spec.alpha
    if isinstance(index_set, BoxIndexSet):
        families = index_set.families()
        lo, hi = np.zeros(spec.d), np.full(spec.d, index_set.side)
    else:
        families = _explicit_families(index_set)
        delta = np.array([rect_at(int(j), int(k), spec).lengths for j, k in index_set.keys[:, :2]])
        centers = np.pi * (index_set.keys[:, 2:] + 0.5) / delta
        lo, hi = (centers - 1 / delta).min(axis=0), (centers + 1 / delta).max(axis=0)
    if sample_pts is None:
        rng = np.random.default_rng(seed)
        sample_pts = lo + (hi - lo) * rng.uniform(size=(random_points, spec.d))
    x = np.asarray(sample_pts, dtype=float).reshape(-1, spec.d)
    lhs = np.zeros(len(x))
    top = np.zeros(len(x))
    for fam in families:
        z = x * fam.delta
        base = np.floor(z / np.pi - 0.5).astype(np.int64)
        for corner in np.ndindex(*(2,) * spec.d):
            n = base + np.asarray(corner)
            inside = np.linalg.norm(z - np.pi * (n + 0.5), axis=1) < 1.0
            mult = np.where(inside, fam.members(n), 0)
            lhs += mult * fam.measure ** e
            top = np.where(mult > 0, np.maximum(top, fam.measure), top)
    hit = top > 0
    ratio = lhs[hit] / top[hit] ** q
    return CountingReport(float(ratio.max()) if ratio.size else 0.0, int(hit.sum()),
                          int((~hit).sum()), _index_size(index_set))


# ---------------------------------------------------------------------------
# output


def write_rate_csv(path, rows: list[dict]) -> Path:
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


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=float))
    return path
