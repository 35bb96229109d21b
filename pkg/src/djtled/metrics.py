"""Field comparison metrics: root-mean-square error and normalised relative error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Default NRE bucket edges (fraction of the reference range).
NRE_EDGES = (0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1e-2, 1e-1, np.inf)


def _flat_pair(u_a, u_b):
    a = np.asarray(u_a, dtype=float).ravel()
    b = np.asarray(u_b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"field lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("fields are empty")
    return a, b


def rmse(u_a, u_b) -> float:
    """sqrt(sum (a_i - b_i)^2 / N) over all N degrees of freedom."""
    a, b = _flat_pair(u_a, u_b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def nre(u_a, u_b) -> np.ndarray:
    """|a_i - b_i| / (max(b) - min(b)) per DOF; ``u_b`` is the reference."""
    a, b = _flat_pair(u_a, u_b)
    span = float(b.max() - b.min())
    if not span > 0.0:
        raise ValueError("reference field is uniform; NRE denominator is zero")
    return np.abs(a - b) / span


@dataclass(frozen=True)
class Histogram:
    edges: tuple
    counts: tuple

    def lines(self) -> list[str]:
        out = []
        for lo, hi, n in zip(self.edges[:-1], self.edges[1:], self.counts):
            out.append(f"[{lo:.0e}, {hi:.0e}) {n}")
        return out


def nre_histogram(u_a, u_b, edges=NRE_EDGES) -> Histogram:
    """Counts of per-DOF NRE values in half-open buckets [edges[k], edges[k+1])."""
    values = nre(u_a, u_b)
    idx = np.searchsorted(np.asarray(edges, dtype=float), values, side="right") - 1
    counts = np.bincount(np.clip(idx, 0, len(edges) - 2), minlength=len(edges) - 1)
    return Histogram(tuple(edges), tuple(int(c) for c in counts))
