"""Quantum-inspired binary multi-objective PSO with a constrained archive.

Each particle carries a per-robot "velocity" in [0, 1] and a sampled
membership bit-vector.  A robot is included when a fresh uniform draw
exceeds its velocity, so a *low* velocity means likely inclusion.  Velocities
are pulled towards the particle's best position and the archive leader
through the alpha/beta encoding of their bits.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import CriteriaWeights, promethee_rank
from .model import InvalidInputError, Scenario
from .objectives import (
    DEFAULT_FEASIBILITY_WEIGHTS,
    Evaluator,
    FeasibilityReport,
    ObjectiveVector,
    Outcome,
    Population,
    beats_matrix,
    constrained_better,
    nondominated_mask,
)
from .timing import TimingBreakdown


@dataclass(frozen=True)
class QmopsoParams:
    population: int = 100
    iterations: int = 100
    w: float = 0.25
    c1: float = 0.25
    c2: float = 0.5
    alpha: float = 0.3
    beta: float = 0.7
    weights: CriteriaWeights = CriteriaWeights()
    feasibility_weights: tuple[float, float] = DEFAULT_FEASIBILITY_WEIGHTS
    seed: int = 0
    # flips the sampling rule to the usual "draw < velocity" for ablations
    conventional_sampling: bool = False

    def __post_init__(self):
        if self.population <= 0:
            raise InvalidInputError("population must be positive")
        if self.iterations < 0:
            raise InvalidInputError("iterations must be non-negative")
        if not (0 < self.alpha < 1 and 0 < self.beta < 1 and math.isclose(self.alpha + self.beta, 1.0)):
            raise InvalidInputError("alpha and beta must lie in (0, 1) and sum to 1")
        if min(self.w, self.c1, self.c2) < 0:
            raise InvalidInputError("w, c1 and c2 must be non-negative")


@dataclass
class Particle:
    velocity: np.ndarray
    position: np.ndarray
    local_best: tuple[np.ndarray, ObjectiveVector, FeasibilityReport]


def sample_position(velocity: np.ndarray, rng: np.random.Generator, conventional: bool = False) -> np.ndarray:
    # with u uniform on [0, 1), 1 - u is uniform on (0, 1]; compare without materialising it
    u = rng.random(np.shape(velocity))
    return u > 1.0 - velocity if conventional else u < 1.0 - velocity


def update_velocity(velocity: np.ndarray, local_best: np.ndarray, global_best: np.ndarray,
                    params: QmopsoParams) -> np.ndarray:
    """New velocity from the current one and the best-position bits (broadcasts)."""
    a, b = params.alpha, params.beta
    c1, c2 = params.c1, params.c2
    # the pull term takes one of four values, indexed by (local bit, global bit)
    pull = np.array([c1 * b + c2 * b, c1 * b + c2 * a, c1 * a + c2 * b, c1 * a + c2 * a])
    idx = np.left_shift(np.asarray(local_best, dtype=bool).view(np.uint8), 1)
    idx = idx | np.asarray(global_best, dtype=bool).view(np.uint8)
    out = params.w * np.asarray(velocity, dtype=float)
    out += np.take(pull, idx)
    return out


def update_local_best(particle: Particle, evaluation: tuple[ObjectiveVector, FeasibilityReport]) -> None:
    """Replace the memory unless the stored best beats the current position."""
    _, stored_obj, stored_rep = particle.local_best
    if constrained_better((stored_obj, stored_rep), evaluation) is not Outcome.A_WINS:
        particle.local_best = (particle.position.copy(), *evaluation)


class Repository:
    """Unbounded archive of mutually non-dominated (constrained) solutions."""

    def __init__(self, n: int):
        self.pop = Population.empty(n)
        self._keys: set[bytes] = set()

    def __len__(self) -> int:
        return len(self.pop)

    @property
    def entries(self):
        return self.pop.entries()

    def update(self, candidates: Population) -> "Repository":
        cand = candidates.take(candidates.objectives[:, 2] > 0)  # empty coalitions never enter
        cand = cand.take(nondominated_mask(cand)).unique()
        if len(cand) == 0:
            return self
        keys = [row.tobytes() for row in np.packbits(cand.positions, axis=1)]
        fresh = np.array([k not in self._keys for k in keys])
        cand = cand.take(fresh)
        keys = [k for k, f in zip(keys, fresh) if f]
        if len(cand) == 0:
            return self
        if len(self.pop):
            keep_cand = ~beats_matrix(self.pop, cand).any(axis=0)
            keep_rep = ~beats_matrix(cand, self.pop).any(axis=0)
            if not keep_rep.all():
                self.pop = self.pop.take(keep_rep)
                self._keys = {row.tobytes() for row in np.packbits(self.pop.positions, axis=1)}
            cand = cand.take(keep_cand)
            keys = [k for k, f in zip(keys, keep_cand) if f]
        self.pop = Population.concat([self.pop, cand])
        self._keys.update(keys)
        return self


def update_repository(rep: Repository, candidates: Population) -> Repository:
    return rep.update(candidates)


def select_global_best(rep: Repository, weights: CriteriaWeights = CriteriaWeights()) -> np.ndarray:
    if len(rep) == 0:
        raise RuntimeError("global best requested from an empty repository")
    top = promethee_rank(rep.pop.objectives, weights).order[0]
    return rep.pop.positions[top]


def init_swarm(params: QmopsoParams, scenario: Scenario, rng: np.random.Generator,
               evaluator: Optional[Evaluator] = None) -> list[Particle]:
    evaluator = evaluator or Evaluator(scenario, params.feasibility_weights)
    velocity = rng.random((params.population, scenario.n))
    position = sample_position(velocity, rng, params.conventional_sampling)
    pop = evaluator.evaluate(position)
    return [
        Particle(velocity[i], position[i], (position[i].copy(), pop.objective_vector(i), pop.report(i)))
        for i in range(params.population)
    ]


@dataclass
class QmopsoResult:
    repository: Repository
    timing: TimingBreakdown
    iterations_run: int = 0
    history: list[int] = field(default_factory=list)  # archive size after each generation

    @property
    def front(self) -> Population:
        return self.repository.pop


def run(scenario: Scenario, params: QmopsoParams = QmopsoParams(),
        on_iteration: Optional[Callable[[int, Repository], None]] = None) -> QmopsoResult:
    """Run the optimizer; the same seed always yields the same archive."""
    start = time.perf_counter()
    timing = TimingBreakdown()
    rng = np.random.default_rng(params.seed)
    ev = Evaluator(scenario, params.feasibility_weights)
    n = scenario.n
    rep = Repository(n)
    history = []

    def evaluate(position: np.ndarray) -> Population:
        objectives = ev.objectives(position)
        t0 = time.perf_counter()
        feas = ev.feasibility(position)
        t_feas = time.perf_counter() - t0
        return Population(position, objectives, *feas), t_feas

    def archive(pop: Population, t_feas: float) -> None:
        t0 = time.perf_counter()
        rep.update(pop)
        timing.feasibility_check.append(t_feas)
        timing.repository_update.append(t_feas + time.perf_counter() - t0)
        history.append(len(rep))

    velocity = rng.random((params.population, n))
    position = sample_position(velocity, rng, params.conventional_sampling)
    current, t_feas = evaluate(position)
    archive(current, t_feas)
    best = current
    if on_iteration:
        on_iteration(0, rep)

    for t in range(1, params.iterations + 1):
        leader = select_global_best(rep, params.weights) if len(rep) else best.positions[0]
        velocity = update_velocity(velocity, best.positions, leader, params)
        position = sample_position(velocity, rng, params.conventional_sampling)
        current, t_feas = evaluate(position)
        stored_wins = _pairwise_beats(best, current)
        best = Population.concat([best, current]).take(
            np.where(stored_wins, np.arange(len(best)), len(best) + np.arange(len(current)))
        )
        archive(current, t_feas)
        if on_iteration:
            on_iteration(t, rep)

    timing.total = time.perf_counter() - start
    return QmopsoResult(rep, timing, params.iterations, history)


def _pairwise_beats(a: Population, b: Population) -> np.ndarray:
    """Row-wise constrained comparison: ``a[i]`` beats ``b[i]``."""
    fa, fb = a.feasible, b.feasible
    le = np.all(a.objectives <= b.objectives, axis=1)
    lt = np.any(a.objectives < b.objectives, axis=1)
    return (fa & fb & le & lt) | (fa & ~fb) | (~fa & ~fb & (a.degree > b.degree))
