import numpy as np
import pytest

from coalform.csp import Constraint, ConstraintKind
from coalform.model import Robot, Scenario, SubTask, Task, Thresholds


def make_scenario(caps, req, constraints=(), xy=None, speed=None, cost=None, battery=None,
                  target=(0.0, 0.0), r=None, thresholds=Thresholds()):
    """Tiny hand-built scenario.  ``caps`` rows are sensing then actuating."""
    caps = np.asarray(caps, dtype=float)
    n, kinds = caps.shape
    r = kinds // 2 if r is None else r
    xy = xy if xy is not None else [(1.0, 0.0)] * n
    speed = speed if speed is not None else [1.0] * n
    cost = cost if cost is not None else [1.0] * n
    battery = battery if battery is not None else [100.0] * n
    robots = [Robot(i, caps[i, :r], caps[i, r:], xy[i], speed[i], cost[i], battery[i]) for i in range(n)]
    req = np.asarray(req, dtype=float)
    cons = tuple(Constraint(ConstraintKind(k), a, b) for k, a, b in constraints)
    task = Task((SubTask(req[:r], req[r:], cons),), thresholds)
    return Scenario(robots, target, task)


@pytest.fixture
def pair_scenario():
    """Two kinds (s1, a1) tied by s1 = a1; robot 0 owns both, 1 and 2 one each."""
    return make_scenario(
        caps=[[1, 1], [1, 0], [0, 1]],
        req=[1, 1],
        constraints=[("same", 0, 1)],
        xy=[(3.0, 4.0), (1.0, 0.0), (2.0, 0.0)],
        speed=[5.0, 1.0, 1.0],
        cost=[7.0, 3.0, 4.0],
    )


# acceptance tests append "ACn PASS|FAIL ..." lines here; shown after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
