"""Composite Gauss-Legendre rules on panels."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot reach its tolerance within budget."""


@lru_cache(maxsize=512)
def _rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(breaks, counts) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite rule.

    ``breaks`` are increasing panel boundaries; ``counts`` is one node count
    per panel (or a single count for all). Zero-length panels are skipped.
    """
    breaks = np.asarray(breaks, dtype=float)
    counts = np.broadcast_to(np.asarray(counts, dtype=int), (breaks.size - 1,))
    xs, ws = [], []
    for lo, hi, n in zip(breaks[:-1], breaks[1:], counts):
        if hi <= lo:
            continue
        x, w = _rule(int(n))
        half = 0.5 * (hi - lo)
        xs.append(lo + half * (x + 1.0))
        ws.append(half * w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def sized_panel_rule(breaks, density: float, minimum: int = 8,
                     budget: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule with ``ceil(density * panel_length)`` nodes per panel."""
    breaks = np.unique(np.asarray(breaks, dtype=float))
    lengths = np.diff(breaks)
    counts = np.maximum(minimum, np.ceil(density * lengths).astype(int))
    if budget is not None and counts.sum() > budget:
        raise QuadratureError(f"quadrature needs {counts.sum()} nodes, budget is {budget}")
    return panel_rule(breaks, counts)


def adaptive_integral(f, breaks, rtol: float = 1e-9, atol: float = 0.0,
                      start: int = 16, max_nodes: int = 1 << 16) -> complex:
    """Integrate ``f`` over panels, doubling node counts until two successive
    estimates agree to ``rtol`` (relative) or ``atol``."""
    n = start
    x, w = panel_rule(breaks, n)
    prev = np.dot(w, f(x))
    while True:
        n *= 2
        x, w = panel_rule(breaks, n)
        if x.size > max_nodes:
            raise QuadratureError("adaptive quadrature did not converge")
        cur = np.dot(w, f(x))
        if abs(cur - prev) <= max(atol, rtol * abs(cur)):
            return cur
        prev = cur
