"""NSGA-II and SPEA-II over the binary coalition encoding.

Both share :class:`~coalform.objectives.Evaluator` with the swarm and use
the constrained comparison (feasible first, then Pareto dominance among
feasible, then feasibility degree among infeasible) wherever the textbook
algorithms use plain dominance.

Variation is one-point crossover plus per-bit flip mutation at rate
``mutation_prob / n``.  The real-coded distribution indices are carried in
:class:`EvoParams` for the record but have no effect on bit-vectors.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import InvalidInputError, Scenario
from .objectives import DEFAULT_FEASIBILITY_WEIGHTS, Evaluator, Population, beats_matrix
from .timing import TimingBreakdown


@dataclass(frozen=True)
class EvoParams:
    population: int = 100
    generations: int = 100
    tournament_size: int = 2
    pool_size: Optional[int] = None        # default population // 2
    mutation_prob: float = 0.1
    crossover_prob: float = 0.9
    archive_size: Optional[int] = None     # SPEA-II only, default population
    crossover_distribution_index: float = 20.0
    mutation_distribution_index: float = 20.0
    feasibility_weights: tuple[float, float] = DEFAULT_FEASIBILITY_WEIGHTS
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise InvalidInputError("population must be at least 2")
        if self.generations < 0:
            raise InvalidInputError("generations must be non-negative")
        if self.tournament_size < 2:
            raise InvalidInputError("tournament size must be at least 2")
        for name in ("mutation_prob", "crossover_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidInputError(f"{name} must be a probability")
        if self.pool_size is not None and self.pool_size < 2:
            raise InvalidInputError("mating pool needs at least two slots")
        if self.archive_size is not None and self.archive_size < 1:
            raise InvalidInputError("archive size must be positive")

    @property
    def pool(self) -> int:
        return self.pool_size if self.pool_size is not None else max(2, self.population // 2)

    @property
    def archive(self) -> int:
        return self.archive_size if self.archive_size is not None else self.population


@dataclass
class EvoResult:
    front: Population
    timing: TimingBreakdown


def fast_nondominated_sort(pop: Population) -> list[np.ndarray]:
    """Index arrays of successive fronts under the constrained comparison."""
    if len(pop) == 0:
        return []
    beats = beats_matrix(pop, pop)
    remaining = beats.sum(axis=0)
    fronts = []
    current = np.flatnonzero(remaining == 0)
    while current.size:
        fronts.append(current)
        remaining = remaining - beats[current].sum(axis=0)
        remaining[current] = -1
        current = np.flatnonzero(remaining == 0)
    return fronts


def _finite(objectives: np.ndarray) -> np.ndarray:
    """Objectives with infinities (the empty coalition) pushed just past the worst finite value."""
    out = np.array(objectives, dtype=float)
    for col in out.T:
        bad = ~np.isfinite(col)
        if bad.any():
            good = col[~bad]
            top = good.max() + max(np.ptp(good), 1.0) if good.size else 1.0
            col[bad] = top
    return out


def crowding_distance(front) -> np.ndarray:
    objs = _finite(front.objectives if isinstance(front, Population) else np.atleast_2d(front))
    k, m = objs.shape
    dist = np.zeros(k)
    if k <= 2:
        return np.full(k, np.inf)
    for c in range(m):
        order = np.argsort(objs[:, c], kind="stable")
        vals = objs[order, c]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def _tournament(rng: np.random.Generator, better, size: int, tournament_size: int, k: int) -> np.ndarray:
    """``size`` winners of ``tournament_size``-way tournaments among ``k`` contestants.

    ``better(i, j)`` decides a match; ties go to the lower index.
    """
    picks = rng.integers(0, k, size=(size, tournament_size))
    winners = np.empty(size, dtype=int)
    for s, row in enumerate(picks):
        w = row[0]
        for c in row[1:]:
            if better(c, w) or (not better(w, c) and c < w):
                w = c
        winners[s] = w
    return winners


def _variation(rng: np.random.Generator, parents: np.ndarray, count: int, params: EvoParams) -> np.ndarray:
    n = parents.shape[1]
    pairs = (count + 1) // 2
    idx = rng.integers(0, len(parents), size=(pairs, 2))
    a, b = parents[idx[:, 0]].copy(), parents[idx[:, 1]].copy()
    if n > 1:
        cross = rng.random(pairs) < params.crossover_prob
        cut = rng.integers(1, n, size=pairs)
        tail = (np.arange(n)[None, :] >= cut[:, None]) & cross[:, None]
        a_tail = a[tail]
        a[tail] = b[tail]
        b[tail] = a_tail
    children = np.vstack([a, b])[:count]
    flips = rng.random(children.shape) < params.mutation_prob / n
    return children ^ flips


class _TimedEvaluator:
    def __init__(self, scenario: Scenario, params: EvoParams):
        self.ev = Evaluator(scenario, params.feasibility_weights)
        self.last_feasibility = 0.0

    def __call__(self, positions: np.ndarray) -> Population:
        objectives = self.ev.objectives(positions)
        t0 = time.perf_counter()
        feas = self.ev.feasibility(positions)
        self.last_feasibility = time.perf_counter() - t0
        return Population(positions, objectives, *feas)


def _first_front(pop: Population) -> Population:
    fronts = fast_nondominated_sort(pop)
    return pop.take(fronts[0]).unique() if fronts else pop


def run_nsga2(scenario: Scenario, params: EvoParams = EvoParams()) -> EvoResult:
    start = time.perf_counter()
    timing = TimingBreakdown()
    rng = np.random.default_rng(params.seed)
    evaluate = _TimedEvaluator(scenario, params)
    N = params.population

    def rank_and_crowd(pop: Population) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        rank = np.empty(len(pop), dtype=int)
        crowd = np.empty(len(pop))
        fronts = fast_nondominated_sort(pop)
        for r, f in enumerate(fronts):
            rank[f] = r
            crowd[f] = crowding_distance(pop.objectives[f])
        return rank, crowd, fronts

    pop = evaluate(rng.random((N, scenario.n)) < 0.5)
    t0 = time.perf_counter()
    rank, crowd, _ = rank_and_crowd(pop)
    timing.feasibility_check.append(evaluate.last_feasibility)
    timing.repository_update.append(evaluate.last_feasibility + time.perf_counter() - t0)

    for _ in range(params.generations):
        better = lambda i, j: rank[i] < rank[j] or (rank[i] == rank[j] and crowd[i] > crowd[j])
        pool = _tournament(rng, better, params.pool, params.tournament_size, N)
        offspring = evaluate(_variation(rng, pop.positions[pool], N, params))
        t0 = time.perf_counter()
        union = Population.concat([pop, offspring])
        _, union_crowd, fronts = rank_and_crowd(union)
        chosen: list[int] = []
        for f in fronts:
            if len(chosen) + len(f) <= N:
                chosen.extend(f.tolist())
            else:
                order = np.argsort(-union_crowd[f], kind="stable")
                chosen.extend(f[order[: N - len(chosen)]].tolist())
            if len(chosen) == N:
                break
        pop = union.take(np.array(chosen))
        rank, crowd, _ = rank_and_crowd(pop)
        timing.feasibility_check.append(evaluate.last_feasibility)
        timing.repository_update.append(evaluate.last_feasibility + time.perf_counter() - t0)

    front = _first_front(pop)
    timing.total = time.perf_counter() - start
    return EvoResult(front, timing)


def _spea2_fitness(pop: Population) -> np.ndarray:
    beats = beats_matrix(pop, pop)
    strength = beats.sum(axis=1)
    raw = (beats * strength[:, None]).sum(axis=0)
    k = len(pop)
    if k < 2:
        return raw.astype(float)
    dist = _normalized_distances(pop.objectives)
    kth = max(1, int(math.sqrt(k)))
    sigma = np.sort(dist, axis=1)[:, min(kth, k - 1) - 1]
    return raw + 1.0 / (sigma + 2.0)


def _normalized_distances(objectives: np.ndarray) -> np.ndarray:
    objs = _finite(objectives)
    span = np.ptp(objs, axis=0)
    objs = (objs - objs.min(axis=0)) / np.where(span > 0, span, 1.0)
    dist = np.sqrt(((objs[:, None, :] - objs[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    return dist


def _truncate(pop: Population, keep: int) -> np.ndarray:
    """Indices surviving SPEA-II archive truncation down to ``keep`` members."""
    alive = np.arange(len(pop))
    dist = _normalized_distances(pop.objectives)
    while len(alive) > keep:
        sub = np.sort(dist[np.ix_(alive, alive)], axis=1)
        # lexicographically smallest sorted-distance row is the most crowded
        victim = np.lexsort(sub.T[::-1])[0]
        alive = np.delete(alive, victim)
    return alive


def _environmental_selection(union: Population, size: int) -> tuple[Population, np.ndarray]:
    fitness = _spea2_fitness(union)
    nd = np.flatnonzero(fitness < 1)
    if len(nd) > size:
        chosen = nd[_truncate(union.take(nd), size)]
    elif len(nd) < size:
        rest = np.flatnonzero(fitness >= 1)
        rest = rest[np.argsort(fitness[rest], kind="stable")][: size - len(nd)]
        chosen = np.sort(np.concatenate([nd, rest]))
    else:
        chosen = nd
    return union.take(chosen), fitness[chosen]


def run_spea2(scenario: Scenario, params: EvoParams = EvoParams()) -> EvoResult:
    start = time.perf_counter()
    timing = TimingBreakdown()
    rng = np.random.default_rng(params.seed)
    evaluate = _TimedEvaluator(scenario, params)
    N = params.population
    archive = Population.empty(scenario.n)

    pop = evaluate(rng.random((N, scenario.n)) < 0.5)
    for gen in range(params.generations + 1):
        t0 = time.perf_counter()
        archive, fitness = _environmental_selection(Population.concat([pop, archive]).unique(), params.archive)
        timing.feasibility_check.append(evaluate.last_feasibility)
        timing.repository_update.append(evaluate.last_feasibility + time.perf_counter() - t0)
        if gen == params.generations:
            break
        better = lambda i, j: fitness[i] < fitness[j]
        pool = _tournament(rng, better, params.pool, params.tournament_size, len(archive))
        pop = evaluate(_variation(rng, archive.positions[pool], N, params))

    timing.total = time.perf_counter() - start
    return EvoResult(_first_front(archive), timing)
