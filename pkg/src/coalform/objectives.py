"""Objectives, Pareto dominance and constraint-aware comparison.

Every optimizer goes through :class:`Evaluator`, which scores whole
populations of bit-vectors at once.  The scalar functions
(:func:`evaluate_objectives`, :func:`feasibility_degree`,
:func:`constrained_better`) are the reference semantics the batched code
must agree with.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .csp import LocationalScorer, build_csp, max_satisfied_constraints
from .model import InvalidInputError, Scenario, as_coalition

DEFAULT_FEASIBILITY_WEIGHTS = (0.5, 0.5)


@dataclass(frozen=True)
class ObjectiveVector:
    time: float
    cost: float
    size: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.time, self.cost, float(self.size))


@dataclass(frozen=True)
class FeasibilityReport:
    sat_treq: float
    sat_c: float
    degree: float
    feasible: bool


class Outcome(enum.Enum):
    A_WINS = "a"
    B_WINS = "b"
    NEITHER = "neither"


def _check_weights(weights: Sequence[float]) -> tuple[float, float]:
    w_t, w_c = (float(w) for w in weights)
    if not (0 <= w_t <= 1 and 0 <= w_c <= 1 and math.isclose(w_t + w_c, 1.0, abs_tol=1e-12)):
        raise InvalidInputError(f"feasibility weights must lie in [0,1] and sum to 1, got {(w_t, w_c)}")
    return w_t, w_c


def evaluate_objectives(coalition, scenario: Scenario) -> ObjectiveVector:
    """(slowest member's travel time to the target, summed deploy cost, size).

    The empty coalition gets an infinite time so it can never be preferred.
    """
    bits = as_coalition(coalition, scenario.n)
    if not bits.any():
        return ObjectiveVector(math.inf, 0.0, 0)
    return ObjectiveVector(
        float(scenario.travel_times[bits].max()), float(scenario.costs[bits].sum()), int(bits.sum())
    )


def dominates(a, b) -> bool:
    a = a.as_tuple() if isinstance(a, ObjectiveVector) else tuple(a)
    b = b.as_tuple() if isinstance(b, ObjectiveVector) else tuple(b)
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _weighted_degree(u, U, m, M, w_t: float, w_c: float):
    """Degree over a common denominator so simple fractions come out correctly rounded.

    An empty requirement (U = 0) or constraint set (M = 0) counts as fully met.
    Works elementwise on arrays.
    """
    U1, M1 = np.maximum(U, 1), np.maximum(M, 1)
    u1 = np.where(U == 0, 1, u)
    m1 = np.where(M == 0, 1, m)
    return (u1 * M1 * w_t + m1 * U1 * w_c) / (U1 * M1)


def degree_from_counts(u: int, U: int, m: int, M: int, weights=DEFAULT_FEASIBILITY_WEIGHTS) -> FeasibilityReport:
    w_t, w_c = _check_weights(weights)
    sat_treq = 1.0 if U == 0 else u / U
    sat_c = 1.0 if M == 0 else m / M
    degree = float(_weighted_degree(u, U, m, M, w_t, w_c))
    return FeasibilityReport(sat_treq, sat_c, degree, sat_treq == 1.0 and sat_c == 1.0)


def feasibility_degree(coalition, scenario: Scenario, weights=DEFAULT_FEASIBILITY_WEIGHTS) -> FeasibilityReport:
    """Weighted share of met requirement entries and satisfiable constraints.

    ``feasible`` is true exactly when both shares are 1.  With a zero weight
    the degree can reach 1 for an infeasible coalition; comparisons always
    use the flag, never ``degree == 1``.
    """
    _check_weights(weights)
    bits = as_coalition(coalition, scenario.n)
    req = scenario.task.requirement
    have = scenario.capabilities[bits].sum(axis=0)
    needed = req > 0
    u = int(np.count_nonzero(have[needed] >= req[needed]))
    m, M = max_satisfied_constraints(build_csp(scenario.task, bits, scenario))
    return degree_from_counts(u, int(needed.sum()), m, M, weights)


def constrained_better(a: tuple[ObjectiveVector, FeasibilityReport], b: tuple[ObjectiveVector, FeasibilityReport]) -> Outcome:
    (fa, ra), (fb, rb) = a, b
    if ra.feasible and rb.feasible:
        if dominates(fa, fb):
            return Outcome.A_WINS
        if dominates(fb, fa):
            return Outcome.B_WINS
        return Outcome.NEITHER
    if ra.feasible != rb.feasible:
        return Outcome.A_WINS if ra.feasible else Outcome.B_WINS
    if ra.degree > rb.degree:
        return Outcome.A_WINS
    if rb.degree > ra.degree:
        return Outcome.B_WINS
    return Outcome.NEITHER


@dataclass
class Population:
    """Evaluated bit-vectors, one row per individual."""

    positions: np.ndarray   # (k, n) bool
    objectives: np.ndarray  # (k, 3) float: time, cost, size
    sat_treq: np.ndarray
    sat_c: np.ndarray
    degree: np.ndarray
    feasible: np.ndarray    # (k,) bool

    def __len__(self) -> int:
        return len(self.positions)

    def take(self, idx) -> "Population":
        return Population(self.positions[idx], self.objectives[idx], self.sat_treq[idx], self.sat_c[idx],
                          self.degree[idx], self.feasible[idx])

    @staticmethod
    def concat(parts: Sequence["Population"]) -> "Population":
        return Population(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                            ("positions", "objectives", "sat_treq", "sat_c", "degree", "feasible")))

    @staticmethod
    def empty(n: int) -> "Population":
        z = np.zeros(0)
        return Population(np.zeros((0, n), dtype=bool), np.zeros((0, 3)), z, z, z, np.zeros(0, dtype=bool))

    def objective_vector(self, i: int) -> ObjectiveVector:
        t, c, s = self.objectives[i]
        return ObjectiveVector(float(t), float(c), int(s))

    def report(self, i: int) -> FeasibilityReport:
        return FeasibilityReport(float(self.sat_treq[i]), float(self.sat_c[i]), float(self.degree[i]),
                                 bool(self.feasible[i]))

    def entries(self) -> list[tuple[np.ndarray, ObjectiveVector, FeasibilityReport]]:
        return [(self.positions[i], self.objective_vector(i), self.report(i)) for i in range(len(self))]

    def unique(self) -> "Population":
        """First occurrence of every distinct position, original order kept."""
        if len(self) == 0:
            return self
        seen: dict[bytes, int] = {}
        for i, row in enumerate(np.packbits(self.positions, axis=1)):
            seen.setdefault(row.tobytes(), i)
        return self.take(np.fromiter(seen.values(), dtype=int, count=len(seen)))


def pareto_dominance_matrix(fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """``out[i, j]`` is true when objective row ``fa[i]`` dominates ``fb[j]``."""
    le = np.all(fa[:, None, :] <= fb[None, :, :], axis=2)
    lt = np.any(fa[:, None, :] < fb[None, :, :], axis=2)
    return le & lt


def beats_matrix(a: Population, b: Population) -> np.ndarray:
    """``out[i, j]`` is true when ``a[i]`` is constrained-better than ``b[j]``."""
    fa, fb = a.feasible[:, None], b.feasible[None, :]
    pareto = pareto_dominance_matrix(a.objectives, b.objectives)
    return (fa & fb & pareto) | (fa & ~fb) | (~fa & ~fb & (a.degree[:, None] > b.degree[None, :]))


def nondominated_mask(pop: Population) -> np.ndarray:
    if len(pop) == 0:
        return np.zeros(0, dtype=bool)
    return ~beats_matrix(pop, pop).any(axis=0)


class Evaluator:
    """Batched objective and feasibility scoring for one scenario."""

    def __init__(self, scenario: Scenario, weights=DEFAULT_FEASIBILITY_WEIGHTS):
        self.scenario = scenario
        self.weights = _check_weights(weights)
        req = scenario.task.requirement
        self._needed = np.flatnonzero(req > 0)
        self._req = req[self._needed]
        self._caps = scenario.capabilities[:, self._needed]
        self._travel = scenario.travel_times
        self._costs = scenario.costs
        self._slowest_first = np.argsort(-self._travel, kind="stable")
        self._scorer = LocationalScorer(scenario)
        # one matmul yields requirement sums and CSP class counts together
        feas = np.hstack([self._caps, self._scorer.class_matrix.reshape(scenario.n, -1)])
        # float32 sums are exact for integer entries while totals stay below 2**24
        exact32 = np.all(feas == np.round(feas)) and feas.sum(axis=0).max(initial=0) < 2**24
        self._feas_dtype = np.float32 if exact32 else float
        self._feas_matrix = feas.astype(self._feas_dtype)

    @property
    def n(self) -> int:
        return self.scenario.n

    def objectives(self, positions: np.ndarray) -> np.ndarray:
        positions = np.atleast_2d(positions)
        size = np.count_nonzero(positions, axis=1).astype(float)
        # slowest member: first set bit once robots are ordered by falling travel time
        first = positions[:, self._slowest_first].argmax(axis=1)
        time = self._travel[self._slowest_first][first] if self.n else np.zeros(len(positions))
        time = np.where(size == 0, np.inf, time)
        cost = positions @ self._costs
        return np.column_stack([time, cost, size])

    def feasibility(self, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        positions = np.atleast_2d(positions)
        w_t, w_c = self.weights
        U = len(self._needed)
        sums = positions.astype(self._feas_dtype) @ self._feas_matrix
        M = self._scorer.total
        u = np.count_nonzero(sums[:, :U] >= self._req, axis=1) if U else np.ones(len(positions), dtype=int)
        m = self._scorer.satisfied(positions, sums[:, U:]) if M else np.ones(len(positions), dtype=int)
        U1, M1 = max(U, 1), max(M, 1)
        degree = (u * M1 * w_t + m * U1 * w_c) / (U1 * M1)
        return u / U1, m / M1, degree, (u == U1) & (m == M1)

    def evaluate(self, positions: np.ndarray) -> Population:
        positions = np.atleast_2d(np.asarray(positions, dtype=bool))
        return Population(positions, self.objectives(positions), *self.feasibility(positions))
