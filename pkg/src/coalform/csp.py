"""Locational constraints as a small binary CSP over robot-valued variables.

A variable stands for one capability kind that appears in some constraint;
its domain is the coalition members owning at least one unit of that kind.
Constraints say two kinds must sit on the same robot or on different robots.
A robot may serve several variables at once unless a ``DIFFERENT``
constraint forbids it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .model import Scenario, Task


class ConstraintKind(str, enum.Enum):
    SAME = "same"
    DIFFERENT = "different"


@dataclass(frozen=True)
class Constraint:
    kind: ConstraintKind
    left: int   # flat capability kind index
    right: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if self.left == self.right:
            raise ValueError("a constraint must relate two different capability kinds")

    def holds(self, a: Optional[int], b: Optional[int]) -> bool:
        if a is None or b is None:
            return False
        return (a == b) if self.kind is ConstraintKind.SAME else (a != b)


@dataclass(frozen=True)
class CspInstance:
    variables: tuple[int, ...]               # kind index per variable, ascending
    domains: tuple[tuple[int, ...], ...]     # robot ids per variable, ascending
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        declared = set(self.variables)
        for c in self.constraints:
            if c.left not in declared or c.right not in declared:
                raise ValueError(f"constraint {c} references an undeclared variable")

    def _edges(self) -> list[tuple[Constraint, int, int]]:
        pos = {k: i for i, k in enumerate(self.variables)}
        return [(c, pos[c.left], pos[c.right]) for c in self.constraints]


def build_csp(task: "Task", coalition, scenario: "Scenario") -> CspInstance:
    from .model import as_coalition

    bits = as_coalition(coalition, scenario.n)
    constraints = task.constraints
    variables = tuple(sorted({k for c in constraints for k in (c.left, c.right)}))
    members = np.flatnonzero(bits)
    caps = scenario.capabilities
    domains = tuple(tuple(int(i) for i in members[caps[members, k] >= 1]) for k in variables)
    return CspInstance(variables, domains, constraints)


def solve_csp(instance: CspInstance) -> Optional[dict[int, int]]:
    """Backtracking with forward checking; returns ``{kind: robot id}`` or None."""
    edges = instance._edges()
    nvar = len(instance.variables)
    neighbours: list[list[tuple[Constraint, int, bool]]] = [[] for _ in range(nvar)]
    for c, i, j in edges:
        neighbours[i].append((c, j, True))
        neighbours[j].append((c, i, False))
    domains = [list(d) for d in instance.domains]
    if any(not d for d in domains):
        return None
    assignment: list[Optional[int]] = [None] * nvar

    def consistent(c: Constraint, mine: int, other: int, mine_is_left: bool) -> bool:
        return c.holds(mine, other) if mine_is_left else c.holds(other, mine)

    def backtrack(i: int) -> bool:
        if i == nvar:
            return True
        for value in domains[i]:
            ok = all(
                assignment[j] is None or consistent(c, value, assignment[j], left)
                for c, j, left in neighbours[i]
            )
            if not ok:
                continue
            assignment[i] = value
            saved = []
            wiped = False
            for c, j, left in neighbours[i]:
                if j > i:
                    keep = [v for v in domains[j] if consistent(c, value, v, left)]
                    saved.append((j, domains[j]))
                    domains[j] = keep
                    if not keep:
                        wiped = True
                        break
            if not wiped and backtrack(i + 1):
                return True
            for j, old in reversed(saved):
                domains[j] = old
            assignment[i] = None
        return False

    if not backtrack(0):
        return None
    return {k: v for k, v in zip(instance.variables, assignment)}


def _components(nvar: int, edges) -> list[list[int]]:
    parent = list(range(nvar))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, i, j in edges:
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for v in range(nvar):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _reduced_domains(domains: list[tuple[int, ...]]) -> list[list[Optional[int]]]:
    # Robots that belong to exactly the same set of domains are interchangeable
    # under =/!= constraints, and an assignment touches at most len(domains)
    # robots, so that many representatives per class keeps the optimum exact.
    cap = len(domains)
    membership: dict[int, list[int]] = {}
    for vi, dom in enumerate(domains):
        for rid in dom:
            membership.setdefault(rid, []).append(vi)
    kept: dict[tuple[int, ...], list[int]] = {}
    for rid in sorted(membership):
        reps = kept.setdefault(tuple(membership[rid]), [])
        if len(reps) < cap:
            reps.append(rid)
    allowed = {rid for reps in kept.values() for rid in reps}
    return [[rid for rid in dom if rid in allowed] or [None] for dom in domains]


def _max_sat_component(domains, edges) -> int:
    nvar = len(domains)
    # constraints are scored when their later variable gets a value
    closing: list[list[tuple[Constraint, int, int]]] = [[] for _ in range(nvar)]
    for c, i, j in edges:
        closing[max(i, j)].append((c, i, j))
    remaining_after = [0] * (nvar + 1)
    for i in range(nvar - 1, -1, -1):
        remaining_after[i] = remaining_after[i + 1] + len(closing[i])
    total = remaining_after[0]
    best = -1
    assignment: list[Optional[int]] = [None] * nvar

    def search(i: int, sat: int) -> bool:
        nonlocal best
        if sat + remaining_after[i] <= best:
            return False
        if i == nvar:
            best = sat
            return best == total
        for value in domains[i]:
            assignment[i] = value
            gained = sum(1 for c, a, b in closing[i] if c.holds(assignment[a], assignment[b]))
            if search(i + 1, sat + gained):
                return True
        assignment[i] = None
        return False

    search(0, 0)
    return best


def max_satisfied_constraints(instance: CspInstance) -> tuple[int, int]:
    """``(m, M)``: most constraints any single assignment satisfies, and the total.

    Exact branch and bound, run separately on each connected component of the
    constraint graph.
    """
    edges = instance._edges()
    total = len(edges)
    if total == 0:
        return 0, 0
    m = 0
    for comp in _components(len(instance.variables), edges):
        local = {v: k for k, v in enumerate(comp)}
        comp_edges = [(c, local[i], local[j]) for c, i, j in edges if i in local]
        if not comp_edges:
            continue
        domains = _reduced_domains([instance.domains[v] for v in comp])
        m += _max_sat_component(domains, comp_edges)
    return m, total


_DENSE_TABLE_LIMIT = 1 << 20


class LocationalScorer:
    """Batched ``m`` (satisfied locational constraints) for many coalitions.

    Works per connected component of the constraint graph.  Within a
    component the max-CSP value depends only on how many members fall in each
    membership class (which of the component's kinds a robot owns), capped at
    the component's variable count.  That capped profile is the memo key, so
    each distinct profile is solved once per scenario.
    """

    def __init__(self, scenario: "Scenario"):
        constraints = scenario.task.constraints
        self.total = len(constraints)
        variables = tuple(sorted({k for c in constraints for k in (c.left, c.right)}))
        pos = {k: i for i, k in enumerate(variables)}
        edges = [(c, pos[c.left], pos[c.right]) for c in constraints]
        self._parts = []
        for comp in _components(len(variables), edges):
            kinds = tuple(variables[v] for v in comp)
            comp_constraints = tuple(c for c in constraints if c.left in kinds)
            owns = scenario.capabilities[:, list(kinds)] >= 1
            signature = owns.astype(np.int64) @ (1 << np.arange(len(kinds), dtype=np.int64))
            classes = np.unique(signature[signature > 0])
            onehot = (signature[:, None] == classes[None, :]).astype(float)
            self._parts.append((kinds, comp_constraints, classes, onehot, {}))
        self._memo: dict[int, int] = {}
        # column caps and mixed-radix place values for the profile code
        caps = [len(part[0]) for part in self._parts for _ in part[2]]
        self._cap_vec = np.array(caps, dtype=float)
        radix = [c + 1 for c in caps]
        self._place = None
        self._table = None
        if np.sum(np.log2(radix)) < 62:
            self._place = np.cumprod([1] + radix[:-1], dtype=np.int64)
            size = int(np.prod(radix, dtype=np.int64)) if radix else 1
            if size <= _DENSE_TABLE_LIMIT:
                self._table = np.full(size, -1, dtype=np.int64)

    @staticmethod
    def _solve_profile(kinds, constraints, classes, counts) -> int:
        robot = 0
        domains: list[list[int]] = [[] for _ in kinds]
        for cls, count in zip(classes, counts):
            for _ in range(int(count)):
                for vi in range(len(kinds)):
                    if cls >> vi & 1:
                        domains[vi].append(robot)
                robot += 1
        return max_satisfied_constraints(CspInstance(kinds, tuple(tuple(d) for d in domains), constraints))[0]

    def _profile_value(self, code, profile: np.ndarray) -> int:
        m = self._memo.get(code)
        if m is None:
            m, col = 0, 0
            for kinds, constraints, classes, _, memo in self._parts:
                row = profile[col : col + len(classes)]
                col += len(classes)
                key = row.tobytes()
                part = memo.get(key)
                if part is None:
                    part = memo[key] = self._solve_profile(kinds, constraints, classes, row)
                m += part
            self._memo[code] = m
        return m

    @property
    def class_matrix(self) -> np.ndarray:
        """(n, C) one-hot membership classes of all components side by side."""
        if not self._parts:
            return np.zeros((0, 0))
        return np.hstack([part[3] for part in self._parts])

    def satisfied(self, positions: np.ndarray, class_counts: Optional[np.ndarray] = None) -> np.ndarray:
        """``m`` for every row of a (P, n) boolean position matrix.

        ``class_counts`` may pass in ``positions @ class_matrix`` when the
        caller already has it.
        """
        positions = np.atleast_2d(positions)
        out = np.zeros(len(positions), dtype=int)
        if not self._parts:
            return out
        if class_counts is None:
            class_counts = positions.astype(float) @ self.class_matrix
        capped = np.minimum(class_counts, self._cap_vec).astype(np.int64)
        if self._table is not None:
            # dense lookup: only never-seen profiles reach the solver
            codes = capped @ self._place
            values = self._table[codes]
            missing = values < 0
            if missing.any():
                _, first = np.unique(codes[missing], return_index=True)
                rows = np.flatnonzero(missing)[first]
                for i in rows:
                    self._table[codes[i]] = self._profile_value(int(codes[i]), capped[i])
                values = self._table[codes]
            out[:] = values
            return out
        if self._place is not None:
            uniq, first, inverse = np.unique(capped @ self._place, return_index=True, return_inverse=True)
            keys = uniq.tolist()
        else:
            _, first, inverse = np.unique(capped, axis=0, return_index=True, return_inverse=True)
            keys = [capped[i].tobytes() for i in first]
        values = np.array([self._profile_value(key, capped[i]) for key, i in zip(keys, first)], dtype=int)
        out[:] = values[inverse.reshape(-1)]
        return out
