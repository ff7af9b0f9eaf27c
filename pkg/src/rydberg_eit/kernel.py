"""Discretized single-excitation density matrices and their serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import FrameError, Grid1D

FRAMES = ("comoving_photon", "spinwave", "unit")


@dataclass(frozen=True)
class Kernel:
    """A two-point density matrix phi(x_i, y_j) with quadrature weights.

    ``points`` need not be uniform (kernels rescaled to the unit interval are
    not), so every reduction goes through ``weights``.  The vacuum weight of
    the parent state is kept in ``meta`` and never folded into ``values``.
    """

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    frame: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise FrameError(f"unknown frame {self.frame!r}")
        n = self.points.size
        if self.weights.shape != (n,) or self.values.shape != (n, n):
            raise ValueError("points, weights and values have inconsistent shapes")

    @classmethod
    def on_grid(cls, grid: Grid1D, values, frame, **meta):
        return cls(grid.points, grid.trapezoid_weights(), np.asarray(values, dtype=complex), frame, meta)

    def trace(self) -> float:
        return float(np.real(np.sum(self.weights * np.diag(self.values))))

    def trace_of_square(self) -> float:
        w = self.weights
        return float(np.sum(np.outer(w, w) * np.abs(self.values) ** 2))

    def purity(self) -> float:
        """tr[phi^2] / tr[phi]^2."""
        return self.trace_of_square() / self.trace() ** 2

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.values))

    def symmetric_matrix(self) -> np.ndarray:
        """sqrt(w_i) phi_ij sqrt(w_j); its spectrum approximates the operator's."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.values * s[None, :]

    def require_frame(self, frame):
        if self.frame != frame:
            raise FrameError(f"kernel is in frame {self.frame!r}, expected {frame!r}")

    def with_meta(self, **extra):
        return replace(self, meta={**self.meta, **extra})

    def summary(self) -> dict:
        tr = self.trace()
        return {
            "frame": self.frame,
            "trace": tr,
            "purity": self.purity() if tr > 0 else None,
            "points": int(self.points.size),
            "parameters": _jsonable(self.meta),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def fmt(x: float) -> str:
    """Round-trip float formatting used by every CSV writer."""
    return format(float(x), ".17g")


def write_kernel_csv(kernel: Kernel, path) -> Path:
    """Write a kernel as CSV.

    Layout: the header row holds ``y\\x`` followed by each x coordinate twice
    (real column, imaginary column); every following row starts with its y
    coordinate and holds the ``re,im`` pairs of phi(x, y) in x order.
    """
    path = Path(path)
    xs = kernel.points
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y\\x"] + [fmt(x) for x in xs for _ in (0, 1)])
        for j, y in enumerate(xs):
            row = [fmt(y)]
            for i in range(xs.size):
                v = kernel.values[i, j]
                row += [fmt(v.real), fmt(v.imag)]
            w.writerow(row)
    return path


def read_kernel_csv(path, frame="comoving_photon") -> Kernel:
    """Inverse of :func:`write_kernel_csv` (trapezoid weights are rebuilt)."""
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    xs = np.array([float(v) for v in rows[0][1::2]])
    n = xs.size
    vals = np.empty((n, n), dtype=complex)
    for j, row in enumerate(rows[1:]):
        nums = np.array([float(v) for v in row[1:]])
        vals[:, j] = nums[0::2] + 1j * nums[1::2]
    dx = np.diff(xs)
    w = np.zeros(n)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return Kernel(xs, w, vals, frame)


def write_summary_json(kernel: Kernel, path, **extra) -> Path:
    path = Path(path)
    data = {**kernel.summary(), **_jsonable(extra)}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
