"""Robots, tasks and scenarios for single-task coalition formation.

Capability vectors are plain float arrays.  Sensing kinds are named
``s1..sr`` and actuating kinds ``a1..ad``; wherever a single flat index is
needed the sensing kinds come first (``s1`` is 0, ``a1`` is ``r``).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .csp import Constraint, ConstraintKind

SCENARIO_SCHEMA_VERSION = 1


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class RobotState(str, enum.Enum):
    IDLE = "Idle"
    ALLOCATED = "Allocated"
    BUSY = "Busy"


# Allocated -> Idle releases robots that were locked for a run but not selected.
_TRANSITIONS = {
    RobotState.IDLE: {RobotState.ALLOCATED},
    RobotState.ALLOCATED: {RobotState.BUSY, RobotState.IDLE},
    RobotState.BUSY: {RobotState.IDLE},
}


def capability_vector(values: Iterable[float]) -> np.ndarray:
    vec = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if vec.ndim != 1:
        raise InvalidInputError("capability vector must be one-dimensional")
    if np.any(vec < 0) or not np.all(np.isfinite(vec)):
        raise InvalidInputError(f"capabilities must be finite and non-negative, got {vec.tolist()}")
    return vec


def kind_names(r: int, d: int) -> list[str]:
    return [f"s{i + 1}" for i in range(r)] + [f"a{i + 1}" for i in range(d)]


def kind_index(name: str, r: int, d: int) -> int:
    """Flat index of a capability kind name such as ``"s2"`` or ``"a1"``."""
    try:
        return kind_names(r, d).index(name)
    except ValueError:
        raise InvalidInputError(f"unknown capability kind {name!r} (r={r}, d={d})") from None


@dataclass(eq=False)
class Robot:
    id: int
    sensing: np.ndarray
    actuating: np.ndarray
    position: tuple[float, float]
    speed: float
    deploy_cost: float
    battery: float
    state: RobotState = RobotState.IDLE

    def __post_init__(self):
        self.sensing = capability_vector(self.sensing)
        self.actuating = capability_vector(self.actuating)
        self.position = (float(self.position[0]), float(self.position[1]))
        if not self.speed > 0:
            raise InvalidInputError(f"robot {self.id}: speed must be positive")
        if self.deploy_cost < 0:
            raise InvalidInputError(f"robot {self.id}: deploy cost must be non-negative")
        if not 0 <= self.battery <= 100:
            raise InvalidInputError(f"robot {self.id}: battery must be in [0, 100]")
        self.state = RobotState(self.state)

    def transition(self, new: RobotState) -> None:
        new = RobotState(new)
        if new not in _TRANSITIONS[self.state]:
            raise InvalidInputError(f"robot {self.id}: illegal transition {self.state.value} -> {new.value}")
        self.state = new

    def copy(self, **changes) -> "Robot":
        fields = dict(
            id=self.id, sensing=self.sensing.copy(), actuating=self.actuating.copy(),
            position=self.position, speed=self.speed, deploy_cost=self.deploy_cost,
            battery=self.battery, state=self.state,
        )
        fields.update(changes)
        return Robot(**fields)


@dataclass(frozen=True, eq=False)
class SubTask:
    sensing_req: np.ndarray
    actuating_req: np.ndarray
    locational_constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sensing_req", capability_vector(self.sensing_req))
        object.__setattr__(self, "actuating_req", capability_vector(self.actuating_req))
        object.__setattr__(self, "locational_constraints", tuple(self.locational_constraints))


@dataclass(frozen=True)
class Thresholds:
    """Upper limits a selected coalition may not exceed (inclusive)."""

    max_time: float = math.inf
    max_cost: float = math.inf
    max_robots: float = math.inf

    def __post_init__(self):
        for name in ("max_time", "max_cost", "max_robots"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"threshold {name} must be positive")


@dataclass(frozen=True, eq=False)
class Task:
    subtasks: tuple[SubTask, ...]
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        if not self.subtasks:
            raise InvalidInputError("a task needs at least one sub-task")
        widths = {(len(z.sensing_req), len(z.actuating_req)) for z in self.subtasks}
        if len(widths) != 1:
            raise InvalidInputError("all sub-tasks must use the same capability widths")

    @property
    def r(self) -> int:
        return len(self.subtasks[0].sensing_req)

    @property
    def d(self) -> int:
        return len(self.subtasks[0].actuating_req)

    @property
    def sensing_req(self) -> np.ndarray:
        return np.sum([z.sensing_req for z in self.subtasks], axis=0)

    @property
    def actuating_req(self) -> np.ndarray:
        return np.sum([z.actuating_req for z in self.subtasks], axis=0)

    @property
    def requirement(self) -> np.ndarray:
        """Aggregate requirement over the flat kind index (sensing then actuating)."""
        return np.concatenate([self.sensing_req, self.actuating_req])

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return tuple(c for z in self.subtasks for c in z.locational_constraints)


@dataclass(frozen=True, eq=False)
class Scenario:
    robots: tuple[Robot, ...]
    target: tuple[float, float]
    task: Task
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        object.__setattr__(self, "target", (float(self.target[0]), float(self.target[1])))
        if [rb.id for rb in self.robots] != list(range(len(self.robots))):
            raise InvalidInputError("robot ids must be dense and ordered 0..n-1")
        for rb in self.robots:
            if len(rb.sensing) != self.task.r or len(rb.actuating) != self.task.d:
                raise InvalidInputError(f"robot {rb.id}: capability widths do not match the task")
        for c in self.task.constraints:
            for k in (c.left, c.right):
                if not 0 <= k < self.task.r + self.task.d:
                    raise InvalidInputError(f"constraint references unknown kind index {k}")

    @property
    def n(self) -> int:
        return len(self.robots)

    @cached_property
    def capabilities(self) -> np.ndarray:
        """(n, r + d) matrix of sensing then actuating quantities."""
        if not self.robots:
            return np.zeros((0, self.task.r + self.task.d))
        return np.array([np.concatenate([rb.sensing, rb.actuating]) for rb in self.robots])

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([rb.deploy_cost for rb in self.robots], dtype=float)

    @cached_property
    def travel_times(self) -> np.ndarray:
        if not self.robots:
            return np.zeros(0)
        pos = np.array([rb.position for rb in self.robots])
        dist = np.hypot(pos[:, 0] - self.target[0], pos[:, 1] - self.target[1])
        return dist / np.array([rb.speed for rb in self.robots])

    def subset(self, indices: Sequence[int]) -> "Scenario":
        """Scenario restricted to ``indices``, with robots renumbered densely.

        Robot ``k`` of the result is a copy of ``self.robots[indices[k]]``.
        """
        robots = [self.robots[i].copy(id=k) for k, i in enumerate(indices)]
        return Scenario(robots=robots, target=self.target, task=self.task, seed=self.seed)


def as_coalition(members, n: int) -> np.ndarray:
    bits = np.asarray(members).astype(bool)
    if bits.shape != (n,):
        raise InvalidInputError(f"coalition must be a bit-vector of length {n}, got shape {bits.shape}")
    return bits


def coalition_capabilities(coalition, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    bits = as_coalition(coalition, scenario.n)
    total = scenario.capabilities[bits].sum(axis=0)
    return total[: scenario.task.r], total[scenario.task.r :]


def meets_capability_requirements(coalition, scenario: Scenario) -> bool:
    # An all-zero requirement vector is satisfied by anything, so checking both
    # vectors element-wise covers the sensing-only and actuating-only tasks.
    sensing, actuating = coalition_capabilities(coalition, scenario)
    return bool(np.all(sensing >= scenario.task.sensing_req) and np.all(actuating >= scenario.task.actuating_req))


def filter_robots(robots: Sequence[Robot], threshold: float) -> list[Robot]:
    """Drop robots whose battery is strictly below ``threshold`` percent."""
    if not 0 <= threshold <= 100:
        raise InvalidInputError("filter threshold must be a percentage in [0, 100]")
    return [rb for rb in robots if rb.battery >= threshold]


@dataclass(frozen=True)
class GenerationRanges:
    battery: tuple[float, float] = (0.0, 100.0)
    speed: tuple[float, float] = (1.0, 10.0)
    cost: tuple[float, float] = (1.0, 100.0)
    area: float = 1000.0
    capability: tuple[int, int] = (0, 3)
    r: int = 3
    d: int = 3
    subtasks: int = 3
    subtask_requirement: tuple[int, int] = (0, 2)
    # pairs (sensing k, actuating k) that must sit on one robot, one per sub-task
    same_robot_pairs: int = 3


def generate_scenario(seed: int, n: int, ranges: GenerationRanges = GenerationRanges()) -> Scenario:
    """Random scenario, a pure function of its arguments.

    Robot capabilities and sub-task requirements are integer unit counts.
    Every capability kind ends up with a non-zero aggregate requirement.
    """
    if n < 1:
        raise InvalidInputError("a scenario needs at least one robot")
    rng = np.random.default_rng(seed)
    kinds = ranges.r + ranges.d
    lo, hi = ranges.capability
    caps = rng.integers(lo, hi + 1, size=(n, kinds))
    xy = rng.uniform(0.0, ranges.area, size=(n, 2))
    speed = rng.uniform(*ranges.speed, size=n)
    cost = rng.uniform(*ranges.cost, size=n)
    battery = rng.uniform(*ranges.battery, size=n)
    target = rng.uniform(0.0, ranges.area, size=2)

    rlo, rhi = ranges.subtask_requirement
    req = rng.integers(rlo, rhi + 1, size=(ranges.subtasks, kinds))
    for k in np.flatnonzero(req.sum(axis=0) == 0):
        req[rng.integers(ranges.subtasks), k] += 1

    pairs = min(ranges.same_robot_pairs, ranges.r, ranges.d)
    constraints: list[list[Constraint]] = [[] for _ in range(ranges.subtasks)]
    for k in range(pairs):
        constraints[k % ranges.subtasks].append(Constraint(ConstraintKind.SAME, k, ranges.r + k))

    robots = [
        Robot(
            id=i, sensing=caps[i, : ranges.r], actuating=caps[i, ranges.r :],
            position=tuple(xy[i]), speed=float(speed[i]), deploy_cost=float(cost[i]),
            battery=float(battery[i]),
        )
        for i in range(n)
    ]
    subtasks = [
        SubTask(req[j, : ranges.r], req[j, ranges.r :], tuple(constraints[j])) for j in range(ranges.subtasks)
    ]
    return Scenario(robots=robots, target=tuple(target), task=Task(subtasks), seed=seed)


# -- serialization ---------------------------------------------------------


def _num(x: float):
    return x if math.isfinite(x) else None


def scenario_to_dict(scenario: Scenario) -> dict:
    task = scenario.task
    names = kind_names(task.r, task.d)
    th = task.thresholds
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "seed": scenario.seed,
        "target": list(scenario.target),
        "capability_kinds": names,
        "robots": [
            {
                "id": rb.id,
                "sensing": rb.sensing.tolist(),
                "actuating": rb.actuating.tolist(),
                "position": list(rb.position),
                "speed": rb.speed,
                "deploy_cost": rb.deploy_cost,
                "battery": rb.battery,
                "state": rb.state.value,
            }
            for rb in scenario.robots
        ],
        "task": {
            "thresholds": {"max_time": _num(th.max_time), "max_cost": _num(th.max_cost),
                           "max_robots": _num(th.max_robots)},
            "subtasks": [
                {
                    "sensing_req": z.sensing_req.tolist(),
                    "actuating_req": z.actuating_req.tolist(),
                    "constraints": [[c.kind.value, names[c.left], names[c.right]] for c in z.locational_constraints],
                }
                for z in task.subtasks
            ],
        },
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        version = data.get("schema_version", SCENARIO_SCHEMA_VERSION)
        if version != SCENARIO_SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported scenario schema version {version}")
        tdata = data["task"]
        th = {k: (math.inf if v is None else float(v)) for k, v in tdata.get("thresholds", {}).items()}
        first = tdata["subtasks"][0]
        r, d = len(first["sensing_req"]), len(first["actuating_req"])
        subtasks = [
            SubTask(
                z["sensing_req"], z["actuating_req"],
                tuple(Constraint(ConstraintKind(kind), kind_index(a, r, d), kind_index(b, r, d))
                      for kind, a, b in z.get("constraints", [])),
            )
            for z in tdata["subtasks"]
        ]
        robots = [
            Robot(
                id=int(rb["id"]), sensing=rb["sensing"], actuating=rb["actuating"],
                position=tuple(rb["position"]), speed=float(rb["speed"]),
                deploy_cost=float(rb["deploy_cost"]), battery=float(rb["battery"]),
                state=RobotState(rb.get("state", "Idle")),
            )
            for rb in data["robots"]
        ]
        return Scenario(robots=robots, target=tuple(data["target"]), task=Task(subtasks, Thresholds(**th)),
                        seed=int(data.get("seed", 0)))
    except (KeyError, IndexError, TypeError) as exc:
        raise InvalidInputError(f"malformed scenario document: {exc!r}") from exc


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        return scenario_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not a JSON scenario ({exc.msg})") from exc
