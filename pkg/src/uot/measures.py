"""Discrete measures on R^d, ground costs, and measure file I/O.

A measure is a weighted point cloud ``sum_i w_i * delta_{x_i}`` with
strictly positive weights; zero-weight atoms are stripped at construction
so that ``log(w_i)`` stays finite inside every log-sum-exp reduction.  The
empty measure is a valid value (the null measure).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidMeasureError


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 1)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise InvalidMeasureError(f"points must be (n, d), got shape {pts.shape}")
    return pts


class DiscreteMeasure:
    """Nonnegative atom weights at coordinates in R^d.

    Zero-weight atoms are removed (order of survivors preserved); negative
    weights raise :class:`InvalidMeasureError`.  Instances are immutable and
    safe to share across threads.
    """

    __slots__ = ("weights", "points")

    def __init__(self, weights, points):
        w = np.asarray(weights, dtype=float).ravel()
        pts = _as_points(points)
        if w.shape[0] != pts.shape[0]:
            raise InvalidMeasureError(
                f"{w.shape[0]} weights for {pts.shape[0]} points")
        if np.any(w < 0):
            raise InvalidMeasureError("weights must be nonnegative")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(pts)):
            raise InvalidMeasureError("weights and points must be finite")
        keep = w > 0
        w = np.ascontiguousarray(w[keep])
        pts = np.ascontiguousarray(pts[keep])
        w.setflags(write=False)
        pts.setflags(write=False)
        self.weights = w
        self.points = pts

    def __len__(self):
        return self.weights.shape[0]

    def __repr__(self):
        return f"DiscreteMeasure(n={len(self)}, d={self.dim}, mass={self.total_mass:g})"

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_null(self) -> bool:
        return len(self) == 0

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.weights * factor, self.points)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(),
                "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return cls(data["weights"], data["points"])

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "DiscreteMeasure":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["w"] + [f"x{k + 1}" for k in range(self.dim)])
            for w, pt in zip(self.weights, self.points):
                writer.writerow([repr(float(w))] + [repr(float(v)) for v in pt])

    @classmethod
    def load_csv(cls, path) -> "DiscreteMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or not rows[0] or rows[0][0] != "w":
            raise InvalidMeasureError(f"{path}: expected header w,x1,...,xd")
        body = [r for r in rows[1:] if r]
        weights = [float(r[0]) for r in body]
        points = [[float(v) for v in r[1:]] for r in body]
        return cls(weights, points)


def new_measure(weights, points) -> DiscreteMeasure:
    """Build a measure from raw weight/point sequences (zero atoms stripped)."""
    return DiscreteMeasure(weights, points)


def total_mass(measure: DiscreteMeasure) -> float:
    return measure.total_mass


def load_measure(path) -> DiscreteMeasure:
    """Load a measure from ``.json`` or ``.csv`` based on the extension."""
    path = str(path)
    if path.endswith(".csv"):
        return DiscreteMeasure.load_csv(path)
    return DiscreteMeasure.load_json(path)


@dataclass(frozen=True)
class CostSpec:
    """Ground cost ``scale * |x - y|^power`` (squared Euclidean by default).

    ``power=2`` is the squared Euclidean cost; any ``power >= 1`` gives the
    Euclidean distance raised to that exponent.  The cost is symmetric with
    ``C(x, x) = 0``.
    """

    power: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if self.power < 1:
            raise DomainError("cost exponent must be >= 1")
        if self.scale <= 0:
            raise DomainError("cost scale must be positive")

    @classmethod
    def sq_euclidean(cls, scale: float = 1.0) -> "CostSpec":
        return cls(power=2.0, scale=scale)

    @classmethod
    def euclidean_pow(cls, power: float, scale: float = 1.0) -> "CostSpec":
        return cls(power=power, scale=scale)

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Dense N x M cost matrix between two point arrays."""
        xs = _as_points(xs)
        ys = _as_points(ys)
        if xs.shape[1] != ys.shape[1] and xs.size and ys.size:
            raise DomainError(
                f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
        diff = xs[:, None, :] - ys[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        if self.power == 2.0:
            return self.scale * sq
        return self.scale * np.sqrt(sq) ** self.power

    def grad_x(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Gradient of C(x_i, y_j) in its first argument, shape (N, M, d).

        Costs with ``power < 2`` are not differentiable at coincident
        points; hitting one raises :class:`DomainError`.
        """
        xs = _as_points(xs)
        ys = _as_points(ys)
        diff = xs[:, None, :] - ys[None, :, :]
        if self.power == 2.0:
            return 2.0 * self.scale * diff
        nrm = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if self.power < 2.0 and np.any(nrm == 0.0):
            raise DomainError(
                "cost gradient undefined at coincident points for power < 2")
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(nrm > 0, nrm ** (self.power - 2.0), 0.0)
        return (self.scale * self.power) * factor[:, :, None] * diff


def cost_matrix(xs, ys, cost: CostSpec) -> np.ndarray:
    """Materialize the cost between two supports; diagonal of C(xs, xs) is 0."""
    return cost.pairwise(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
