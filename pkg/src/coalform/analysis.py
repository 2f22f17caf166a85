"""Front quality indicators, the exhaustive oracle, and Promethee II ranking."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import InvalidInputError, Scenario
from .objectives import DEFAULT_FEASIBILITY_WEIGHTS, Evaluator, Population

BRUTE_FORCE_MAX_N = 22
OBJECTIVE_TOL = 1e-9


class UndefinedMetricError(InvalidInputError):
    """A metric was asked for on input where it has no value (e.g. an empty front)."""


@dataclass
class Front:
    objectives: np.ndarray                   # (k, m)
    positions: Optional[np.ndarray] = None   # (k, n) witnesses, if known
    infeasible: bool = False                 # set by the oracle when nothing is feasible

    def __post_init__(self):
        objs = np.asarray(self.objectives, dtype=float)
        if objs.size == 0:
            self.objectives = objs.reshape(0, objs.shape[1] if objs.ndim == 2 else 0)
        else:
            self.objectives = objs.reshape(len(objs), -1)

    def __len__(self) -> int:
        return len(self.objectives)

    @classmethod
    def from_population(cls, pop: Population, feasible_only: bool = True) -> "Front":
        if feasible_only:
            pop = pop.take(pop.feasible)
        return cls(pop.objectives.copy(), pop.positions.copy())


def _points(front) -> np.ndarray:
    if isinstance(front, Front):
        return front.objectives
    pts = np.asarray(front, dtype=float)
    return pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 0)


@dataclass(frozen=True)
class CriteriaWeights:
    time: float = 0.5
    cost: float = 0.25
    size: float = 0.25

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise InvalidInputError(f"criteria weights must be non-negative and sum to 1, got {w.tolist()}")

    def as_array(self) -> np.ndarray:
        return np.array([self.time, self.cost, self.size], dtype=float)

    @classmethod
    def parse(cls, text: str) -> "CriteriaWeights":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 3:
            raise InvalidInputError("weights take three comma-separated values: time,cost,size")
        return cls(*parts)


def _same(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Pairwise objective-vector equality, ``out[i, j]`` for ``a[i]`` vs ``b[j]``."""
    with np.errstate(invalid="ignore"):
        diff = np.abs(a[:, None, :] - b[None, :, :])
        scale = np.maximum(1.0, np.abs(b[None, :, :]))
        close = (diff <= tol * scale) | (a[:, None, :] == b[None, :, :])
    return np.all(close, axis=2)


def error_ratio(front, reference, tol: float = OBJECTIVE_TOL) -> float:
    """Share of ``front`` whose objective vectors are missing from ``reference``.

    Equality is judged per component with tolerance ``tol`` (relative once a
    value exceeds 1), so distinct coalitions with equal objectives count as
    present.
    """
    pts, ref = _points(front), _points(reference)
    if len(ref) == 0:
        raise UndefinedMetricError("error ratio needs a non-empty reference set")
    if len(pts) == 0:
        raise UndefinedMetricError("error ratio of an empty front is undefined")
    present = _same(pts, ref, tol).any(axis=1)
    return float(np.count_nonzero(~present) / len(pts))


def set_coverage(a, b) -> float:
    """Fraction of ``b`` weakly dominated by at least one point of ``a``."""
    pa, pb = _points(a), _points(b)
    if len(pb) == 0:
        raise UndefinedMetricError("set coverage SC(A, B) needs a non-empty B")
    if len(pa) == 0:
        return 0.0
    covered = np.all(pa[:, None, :] <= pb[None, :, :], axis=2).any(axis=0)
    return float(covered.mean())


def spacing(front) -> float:
    """Population standard deviation of nearest-neighbour distances (raw objectives)."""
    pts = _points(front)
    if len(pts) < 2:
        raise UndefinedMetricError("spacing needs at least two points")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    return float(np.std(dist.min(axis=1)))


def pareto_filter(points: np.ndarray) -> np.ndarray:
    """Indices of the Pareto-minimal rows, one per distinct vector, ascending.

    Sweeps rows in lexicographic order so a row can only be dominated by rows
    already kept.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    order = np.lexsort(points.T[::-1])
    kept: list[int] = []
    kept_pts = np.empty((0, points.shape[1]))
    for i in order:
        p = points[i]
        if len(kept) and np.any(np.all(kept_pts <= p, axis=1)):
            continue  # dominated by, or equal to, a kept row
        kept.append(int(i))
        kept_pts = np.vstack([kept_pts, p])
    return np.sort(np.array(kept, dtype=int))


def reference_front(fronts: Sequence) -> Front:
    parts = [f if isinstance(f, Front) else Front(_points(f)) for f in fronts]
    parts = [f for f in parts if len(f)]
    if not parts:
        raise UndefinedMetricError("reference front needs at least one non-empty front")
    objs = np.vstack([f.objectives for f in parts])
    keep = pareto_filter(objs)
    positions = None
    if all(f.positions is not None for f in parts):
        positions = np.vstack([f.positions for f in parts])[keep]
    return Front(objs[keep], positions)


def enumerate_positions(n: int, start: int, stop: int) -> np.ndarray:
    """Rows for coalition codes ``start..stop-1``; bit ``j`` of the code is robot ``j``."""
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def brute_force_front(scenario: Scenario, weights=DEFAULT_FEASIBILITY_WEIGHTS, chunk: int = 1 << 15) -> Front:
    """Exact feasible Pareto front by enumerating every coalition."""
    n = scenario.n
    if n > BRUTE_FORCE_MAX_N:
        raise InvalidInputError(f"exhaustive search refused for n={n} (limit {BRUTE_FORCE_MAX_N})")
    ev = Evaluator(scenario, weights)
    objs, pos = [], []
    for start in range(1, 1 << n, chunk):
        block = ev.evaluate(enumerate_positions(n, start, min(start + chunk, 1 << n)))
        block = block.take(block.feasible)
        if len(block):
            keep = pareto_filter(block.objectives)
            objs.append(block.objectives[keep])
            pos.append(block.positions[keep])
    if not objs:
        return Front(np.zeros((0, 3)), np.zeros((0, n), dtype=bool), infeasible=True)
    objs_all, pos_all = np.vstack(objs), np.vstack(pos)
    keep = pareto_filter(objs_all)
    return Front(objs_all[keep], pos_all[keep])


@dataclass
class Ranking:
    order: list[int]                      # best first
    net_flow: np.ndarray = field(repr=False)


def promethee_rank(alternatives, weights: CriteriaWeights | Sequence[float] = CriteriaWeights()) -> Ranking:
    """Promethee II with the usual (step) preference function, all criteria minimized.

    Ties in net flow keep input order.
    """
    pts = _points(alternatives)
    if len(pts) == 0:
        raise UndefinedMetricError("nothing to rank")
    w = weights.as_array() if isinstance(weights, CriteriaWeights) else np.asarray(weights, dtype=float)
    k = len(pts)
    if k == 1:
        return Ranking([0], np.zeros(1))
    with np.errstate(invalid="ignore"):
        # pref[a, b, c]: a beats b on criterion c (smaller value)
        pref = (pts[None, :, :] - pts[:, None, :]) > 0
    pi = pref.astype(float) @ w
    phi = (pi.sum(axis=1) - pi.sum(axis=0)) / (k - 1)
    order = np.argsort(-phi, kind="stable")
    return Ranking([int(i) for i in order], phi)
