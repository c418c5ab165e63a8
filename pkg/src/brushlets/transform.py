"""Analysis and synthesis with the tensor brushlet basis.

Everything happens in the frequency domain: a coefficient is the quadrature
of ``f_hat * w_hat_{R,n}`` over the bell support of ``R``.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dctn, next_fast_len
from scipy.interpolate import RegularGridInterpolator

from .brushlet1d import DEFAULT_RAMP, Bell, RampProfile, bell_eval, brushlet_freq_matrix
from .covering import CoveringSpec, layer_size, rect_at
from .grid import CoverageError, GridFunction
from .quadrature import QuadratureError, panel_rule
from .tensor_basis import BrushIndex, active_rects, brushlet_nd_freq_eval, rect_bells

FAST_TOL = 1e-8


def row_codes(rows: np.ndarray) -> np.ndarray:
    """One int64 per row of a nonnegative integer table, equal iff rows are."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    radix = rows.max(axis=0) + 1
    if float(np.prod(radix.astype(float))) < 2.0 ** 62:
        return np.ravel_multi_index(rows.T, tuple(int(r) for r in radix))
    _, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.ravel().astype(np.int64)


def spec_hash(spec: CoveringSpec, ramp: RampProfile = DEFAULT_RAMP) -> str:
    payload = dict(spec.to_dict(), ramp_order=ramp.order)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class CoefficientSet:
    """Coefficients ``c_{R,n}`` stored as an integer key table and a value array.

    ``keys`` has rows ``(j, k, n_1, ..., n_d)``.
    """

    spec: CoveringSpec
    keys: np.ndarray
    values: np.ndarray
    ramp: RampProfile = DEFAULT_RAMP
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.spec.d
        self.keys = np.asarray(self.keys, dtype=np.int64).reshape(-1, 2 + d)
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.keys.shape[0] != self.values.size:
            raise ValueError("one value per key is required")
        if self.keys.size:
            if np.any(self.keys[:, 0] < 0) or np.any(self.keys[:, 2:] < 0):
                raise ValueError("negative layer or frequency index")
            if np.unique(row_codes(np.abs(self.keys))).size != self.keys.shape[0]:
                raise ValueError("duplicate coefficient indices")
            for j in np.unique(self.keys[:, 0]):
                ks = self.keys[self.keys[:, 0] == j, 1]
                if ks.min() < 1 or ks.max() > layer_size(int(j), self.spec):
                    raise ValueError(f"tile index out of range in layer {j}")
        self._lookup = None

    @classmethod
    def from_entries(cls, spec, entries, ramp: RampProfile = DEFAULT_RAMP) -> "CoefficientSet":
        """Build from ``{(j, k, n_tuple): value}`` or ``{BrushIndex: value}``."""
        keys, vals = [], []
        for key, v in entries.items():
            if isinstance(key, BrushIndex):
                key = key.key
            j, k, n = key
            keys.append((j, k, *n))
            vals.append(v)
        return cls(spec, np.array(keys, dtype=np.int64).reshape(-1, 2 + spec.d),
                   np.array(vals, dtype=complex), ramp)

    def __len__(self) -> int:
        return self.values.size

    def _index(self):
        if self._lookup is None:
            self._lookup = {tuple(int(v) for v in row): i for i, row in enumerate(self.keys)}
        return self._lookup

    def __getitem__(self, key) -> complex:
        if isinstance(key, BrushIndex):
            key = key.key
        j, k, n = key
        i = self._index().get((j, k, *n))
        return 0j if i is None else complex(self.values[i])

    def index(self, row: int) -> BrushIndex:
        j, k, *n = (int(v) for v in self.keys[row])
        return BrushIndex(rect_at(j, k, self.spec), tuple(n))

    def items(self):
        for row in range(len(self)):
            yield self.index(row), complex(self.values[row])

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def like(self, values) -> "CoefficientSet":
        return CoefficientSet(self.spec, self.keys.copy(), values, self.ramp, dict(self.meta))

    def __add__(self, other: "CoefficientSet") -> "CoefficientSet":
        merged = dict(zip(map(tuple, self.keys.tolist()), self.values))
        for key, v in zip(map(tuple, other.keys.tolist()), other.values):
            merged[key] = merged.get(key, 0) + v
        keys = np.array(list(merged), dtype=np.int64)
        return CoefficientSet(self.spec, keys, np.array(list(merged.values())), self.ramp)

    def rects(self) -> dict:
        """Row indices grouped by tile key ``(j, k)``, in first-seen order."""
        groups: dict = {}
        for row, (j, k) in enumerate(self.keys[:, :2].tolist()):
            groups.setdefault((j, k), []).append(row)
        return groups

    def to_json(self) -> dict:
        d = self.spec.d
        return {
            "spec_hash": spec_hash(self.spec, self.ramp),
            "spec": dict(self.spec.to_dict(), ramp_order=self.ramp.order),
            "entries": [
                {"j": int(r[0]), "k": int(r[1]), "n": [int(v) for v in r[2:2 + d]],
                 "re": float(v.real), "im": float(v.imag)}
                for r, v in zip(self.keys, self.values)
            ],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json()))
        return path

    @classmethod
    def from_json(cls, data: dict, spec: CoveringSpec | None = None,
                  ramp: RampProfile | None = None) -> "CoefficientSet":
        info = data["spec"]
        if ramp is None:
            ramp = RampProfile(int(info.get("ramp_order", DEFAULT_RAMP.order)))
        if spec is None:
            from .anisotropy import Anisotropy
            spec = CoveringSpec(info["alpha"], Anisotropy(tuple(info["a"])), tuple(info["cutoff"]))
        if data.get("spec_hash") != spec_hash(spec, ramp):
            raise ValueError("coefficient file was produced for a different basis")
        ents = data["entries"]
        keys = np.array([[e["j"], e["k"], *e["n"]] for e in ents], dtype=np.int64)
        vals = np.array([complex(e["re"], e["im"]) for e in ents])
        return cls(spec, keys.reshape(-1, 2 + spec.d), vals, ramp)

    @classmethod
    def load(cls, path, spec: CoveringSpec | None = None) -> "CoefficientSet":
        return cls.from_json(json.loads(Path(path).read_text()), spec)


# ---------------------------------------------------------------------------
# test functions


def gaussian(center=None, width: float = 1.0, modulation=None):
    """``exp(-|xi - center|**2 / (2 width**2))``, optionally times ``exp(i m . xi)``."""

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        c = 0.0 if center is None else np.asarray(center, dtype=float)
        out = np.exp(-np.sum((xi - c) ** 2, axis=-1) / (2.0 * width ** 2)).astype(complex)
        if modulation is not None:
            out = out * np.exp(1j * (xi @ np.asarray(modulation, dtype=float)))
        return out

    return f


def basis_element(idx: BrushIndex, ramp: RampProfile = DEFAULT_RAMP):
    return lambda xi: brushlet_nd_freq_eval(idx, xi, ramp).astype(complex)


TEST_FUNCTIONS = {"gaussian": gaussian}


# ---------------------------------------------------------------------------
# analysis


def default_n_max(spec: CoveringSpec) -> int:
    # four times the three smooth panels of one bell
    return 4 * 3


def _axis_rule(bell: Bell, n_max: int, oversample: int):
    breaks = bell.breakpoints()
    eps = min(bell.interval.eps_left, bell.interval.eps_right)
    lengths = np.diff(breaks)
    counts = (np.ceil(oversample * lengths / eps).astype(int)
              + np.ceil(2 * (n_max + 1) * lengths / bell.length).astype(int) + 8)
    return panel_rule(breaks, counts)


def _sampler(fhat):
    """Callable evaluating ``fhat`` on tensor nodes ``axes`` -> array of values."""
    if isinstance(fhat, GridFunction):
        interp = RegularGridInterpolator(tuple(fhat.axes()), fhat.values, method="cubic",
                                         bounds_error=False, fill_value=None)

        def sample(axes):
            for i, ax in enumerate(axes):
                lo, hi = fhat.bounds[i]
                tol = 1e-9 * max(1.0, abs(lo), abs(hi))
                if ax.min() < lo - tol or ax.max() > hi + tol:
                    raise CoverageError(
                        f"grid axis {i} covers [{lo}, {hi}] but analysis needs "
                        f"[{ax.min()}, {ax.max()}]")
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            return interp(pts)

        return sample

    def sample(axes):
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return np.asarray(fhat(pts), dtype=complex)

    return sample


def _contract(vals: np.ndarray, mats) -> np.ndarray:
    """``out[n_1..n_d] = sum_x vals[x_1..x_d] prod_i mats[i][n_i, x_i]``."""
    out = vals
    for m in mats:
        # contract the leading node axis; the new n axis goes last
        out = np.tensordot(out, m, axes=([0], [1]))
    return out


def _dense_rect(bells, sample, n_max: int, oversample: int) -> np.ndarray:
    axes, mats = [], []
    for bell in bells:
        x, w = _axis_rule(bell, n_max, oversample)
        axes.append(x)
        mats.append(brushlet_freq_matrix(bell, n_max, x) * w)
    return _contract(sample(axes), mats)


def _fold_matrix(bell: Bell, N: int):
    """Nodes and a ``(N, 3N)`` matrix folding samples onto the DCT-IV midpoints."""
    a, ap, L = bell.alpha, bell.alpha_p, bell.length
    mid = a + (np.arange(N) + 0.5) * L / N
    nodes = np.concatenate([mid, 2 * a - mid, 2 * ap - mid])
    F = np.zeros((N, 3 * N))
    idx = np.arange(N)
    F[idx, idx] = bell_eval(bell, mid)
    F[idx, N + idx] = bell_eval(bell, 2 * a - mid)
    F[idx, 2 * N + idx] = -bell_eval(bell, 2 * ap - mid)
    return nodes, F


def _fast_rect(bells, sample, n_max: int, oversample: int) -> np.ndarray:
    """Fold each axis onto the interval and apply a DCT-IV."""
    axes, folds, Ns = [], [], []
    for bell in bells:
        eps = min(bell.interval.eps_left, bell.interval.eps_right)
        N = next_fast_len(max(4 * (n_max + 1), int(math.ceil(2 * oversample * bell.length / eps))))
        nodes, F = _fold_matrix(bell, N)
        axes.append(nodes)
        folds.append(F)
        Ns.append(N)
    vals = _contract(sample(axes), folds)  # folded samples, shape (N_1, ..., N_d)
    out = dctn(vals, type=4, norm=None)
    for i, (bell, N) in enumerate(zip(bells, Ns)):
        scale = math.sqrt(2.0 / bell.length) * bell.length / N * 0.5
        out = np.moveaxis(np.moveaxis(out, i, 0)[: n_max + 1] * scale, 0, i)
    return out


@dataclass
class AnalysisReport:
    n_rects: int
    n_coeffs: int
    nodes: int
    fast_path: str
    fast_max_dev: float | None
    tail_energy: float
    total_energy: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def analyze(fhat, spec: CoveringSpec, L, n_max: int | None = None, oversample: int = 8,
            ramp: RampProfile = DEFAULT_RAMP, budget: int = 50_000_000,
            fast: bool = False, jobs: int = 1) -> CoefficientSet:
    """Coefficients of ``fhat`` on every active tile for the box bound ``L``.

    ``fhat`` is a :class:`GridFunction` (cubically interpolated) or a
    vectorized callable of frequency points ``(..., d)``. ``fast=True`` uses a
    fold plus DCT-IV per tile after checking it against dense quadrature on
    the first tile; if the check fails the dense path is used throughout.
    The report is stored in ``coeffs.meta["report"]``.
    """
    if oversample < 4:
        raise ValueError("oversample must be at least 4")
    if n_max is None:
        n_max = default_n_max(spec)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    rects = active_rects(spec, L)
    sample = _sampler(fhat)
    nodes = 0
    for r in rects:
        per = 1
        for bell in rect_bells(r, ramp):
            per *= _axis_rule(bell, n_max, oversample)[0].size
        nodes += per
    if nodes > budget:
        raise QuadratureError(f"analysis needs {nodes} quadrature nodes, budget is {budget}")

    method = _dense_rect
    fast_state, dev = "off", None
    if fast and rects:
        bells = rect_bells(rects[0], ramp)
        ref = _dense_rect(bells, sample, n_max, oversample)
        trial = _fast_rect(bells, sample, n_max, oversample)
        dev = float(np.max(np.abs(ref - trial)))
        if dev <= FAST_TOL * max(1.0, float(np.max(np.abs(ref)))):
            method, fast_state = _fast_rect, "validated"
        else:
            fast_state = "rejected"

    def work(r):
        return method(rect_bells(r, ramp), sample, n_max, oversample)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(work, rects))
    else:
        blocks = [work(r) for r in rects]

    d = spec.d
    grid_n = np.stack(np.meshgrid(*[np.arange(n_max + 1)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    keys = np.concatenate([
        np.column_stack([np.full((grid_n.shape[0], 2), (r.layer, r.index)), grid_n]) for r in rects
    ]) if rects else np.zeros((0, 2 + d), dtype=np.int64)
    values = np.concatenate([b.reshape(-1) for b in blocks]) if blocks else np.zeros(0)
    out = CoefficientSet(spec, keys, values, ramp)
    shell = np.any(keys[:, 2:] == n_max, axis=1)
    out.meta["report"] = AnalysisReport(
        len(rects), len(out), nodes, fast_state, dev,
        float(np.sum(np.abs(values[shell]) ** 2)), out.energy())
    return out


# ---------------------------------------------------------------------------
# synthesis


def clenshaw_half_cos(coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``sum_n coeffs[n, ...] cos((n + 1/2) theta)``, vectorized over trailing axes.

    ``coeffs`` has shape ``(N,) + batch``; ``theta`` broadcasts against the
    result shape ``batch + theta.shape`` through a trailing axis.
    """
    coeffs = np.asarray(coeffs)
    theta = np.asarray(theta, dtype=float)
    c = coeffs.reshape(coeffs.shape + (1,) * theta.ndim)
    two_cos = 2.0 * np.cos(theta)
    b1 = np.zeros(coeffs.shape[1:] + theta.shape, dtype=np.result_type(coeffs, float))
    b2 = np.zeros_like(b1)
    for n in range(coeffs.shape[0] - 1, -1, -1):
        b1, b2 = c[n] + two_cos * b1 - b2, b1
    return np.cos(0.5 * theta) * (b1 - b2)


def synthesize(coeffs: CoefficientSet, bounds, counts) -> GridFunction:
    """``sum c_{R,n} w_hat_{R,n}`` sampled on the grid ``(bounds, counts)``."""
    g = GridFunction(bounds, counts, np.zeros(int(np.prod(counts)), dtype=complex))
    axes = g.axes()
    d = coeffs.spec.d
    total = np.zeros(g.counts, dtype=complex)
    for (j, k), rows in coeffs.rects().items():
        rect = rect_at(j, k, coeffs.spec)
        bells = rect_bells(rect, coeffs.ramp)
        ns = coeffs.keys[rows, 2:]
        shape = tuple(int(m) + 1 for m in ns.max(axis=0))
        block = np.zeros(shape, dtype=complex)
        np.add.at(block, tuple(ns.T), coeffs.values[rows])
        sl, local = [], []
        for i, bell in enumerate(bells):
            lo, hi = bell.support
            m = (axes[i] > lo) & (axes[i] < hi)
            if not m.any():
                break
            idx = np.nonzero(m)[0]
            sl.append(slice(idx[0], idx[-1] + 1))
            local.append(axes[i][idx])
        else:
            vals = block
            for i, bell in enumerate(bells):
                # contract the leading n axis; the grid axis goes last
                theta = np.pi * (local[i] - bell.alpha) / bell.length
                vals = clenshaw_half_cos(vals, theta)
                vals = vals * (math.sqrt(2.0 / bell.length) * bell_eval(bell, local[i]))
            total[tuple(sl)] += vals
    return g.like(total)


# ---------------------------------------------------------------------------
# energy bookkeeping


def energy_quadrature(fhat, box, oversample: int = 16, panels: int = 64, breaks=None) -> float:
    """``||f_hat||**2`` over ``box = [(lo, hi), ...]`` (grid input: trapezoid rule).

    ``breaks`` optionally adds per-dimension panel boundaries, e.g. bell
    breakpoints where the integrand is only finitely smooth.
    """
    if isinstance(fhat, GridFunction):
        return fhat.norm2()
    axes, weights = [], []
    for i, (lo, hi) in enumerate(box):
        edges = np.linspace(lo, hi, panels + 1)
        if breaks is not None:
            extra = np.asarray(breaks[i], dtype=float)
            edges = np.unique(np.concatenate([edges, extra[(extra > lo) & (extra < hi)]]))
        x, w = panel_rule(edges, max(8, oversample))
        axes.append(x)
        weights.append(w)
    vals = np.abs(_sampler(fhat)(axes)) ** 2
    for w in weights:
        vals = np.tensordot(vals, w, axes=([0], [0]))
    return float(vals)


def parseval_report(fhat, coeffs: CoefficientSet, box=None, **kw) -> dict:
    """Energies of ``fhat`` and of its coefficients and their ratio.

    ``box`` defaults to the bounding box of the bell supports of all tiles in
    ``coeffs``, which is where the coefficients can see ``fhat``; pass a larger
    box for functions not supported there. Bell breakpoints of those tiles are
    always used as panel boundaries.
    """
    d = coeffs.spec.d
    los, his, brk = [], [], [[] for _ in range(d)]
    for (j, k) in coeffs.rects():
        for i, bell in enumerate(rect_bells(rect_at(j, k, coeffs.spec), coeffs.ramp)):
            brk[i].extend(bell.breakpoints())
        lo, hi = rect_at(j, k, coeffs.spec).bell_support()
        los.append(lo)
        his.append(hi)
    if box is None:
        box = list(zip(np.min(los, axis=0), np.max(his, axis=0))) if los else [(-1.0, 1.0)] * d
    kw.setdefault("breaks", brk)
    ef = energy_quadrature(fhat, box, **kw)
    ec = coeffs.energy()
    if ef == 0.0 and ec == 0.0:
        ratio = 1.0
    elif ef == 0.0:
        ratio = math.inf
    else:
        ratio = ec / ef
    return {"energy_f": ef, "energy_coeffs": ec, "ratio": ratio}
