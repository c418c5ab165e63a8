"""Samples of a frequency-domain function on a uniform rectangular grid."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CoverageError(ValueError):
    """The samples do not cover the region an operator needs."""


@dataclass
class GridFunction:
    """Complex samples on the grid ``prod_i linspace(lo_i, hi_i, counts_i)``.

    ``values`` has shape ``counts`` (row-major, last axis fastest).
    """

    bounds: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.bounds) != len(self.counts):
            raise ValueError("bounds and counts disagree on the dimension")
        if any(c < 2 for c in self.counts):
            raise ValueError("at least two samples per dimension are required")
        if any(hi <= lo for lo, hi in self.bounds):
            raise ValueError("grid bounds must be increasing")
        values = np.asarray(self.values, dtype=complex)
        if values.size != int(np.prod(self.counts)):
            raise ValueError(f"expected {int(np.prod(self.counts))} values, got {values.size}")
        self.values = values.reshape(self.counts)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (c - 1) for (lo, hi), c in zip(self.bounds, self.counts))

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.bounds[i]
        return lo + self.spacing[i] * np.arange(self.counts[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.d)]

    def points(self) -> np.ndarray:
        """All nodes as an array of shape ``counts + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @classmethod
    def sample(cls, f, bounds, counts) -> "GridFunction":
        """Evaluate a vectorized ``f(points[..., d])`` on the grid."""
        g = cls(bounds, counts, np.zeros(int(np.prod(counts)), dtype=complex))
        g.values = np.asarray(f(g.points()), dtype=complex).reshape(g.counts)
        return g

    def like(self, values) -> "GridFunction":
        return GridFunction(self.bounds, self.counts, values)

    def norm2(self) -> float:
        """Squared L2 norm by the tensor trapezoid rule."""
        v = np.abs(self.values) ** 2
        for i in range(self.d):
            v = np.trapezoid(v, dx=self.spacing[i], axis=0)
        return float(v)

    def __add__(self, other):
        return self.like(self.values + other.values)

    def __sub__(self, other):
        return self.like(self.values - other.values)

    def __mul__(self, c):
        return self.like(self.values * c)

    __rmul__ = __mul__

    def header(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "counts": list(self.counts),
                "dtype": "<f8", "complex": True, "order": "C"}

    def save(self, path) -> tuple[Path, Path]:
        """Write ``path.bin`` (little-endian f64, interleaved re/im) and ``path.json``."""
        path = Path(path)
        bin_path, json_path = path.with_suffix(".bin"), path.with_suffix(".json")
        data = np.empty(self.values.size * 2, dtype="<f8")
        flat = self.values.ravel()
        data[0::2], data[1::2] = flat.real, flat.imag
        bin_path.write_bytes(data.tobytes())
        json_path.write_text(json.dumps(self.header(), indent=1))
        return bin_path, json_path

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
        return cls(header["bounds"], header["counts"], data[0::2] + 1j * data[1::2])
