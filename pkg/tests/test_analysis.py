import math

import numpy as np
import pytest

from coalform.analysis import (
    CriteriaWeights,
    Front,
    UndefinedMetricError,
    brute_force_front,
    error_ratio,
    pareto_filter,
    promethee_rank,
    reference_front,
    set_coverage,
    spacing,
)
from coalform.model import InvalidInputError, generate_scenario
from coalform.objectives import Evaluator, feasibility_degree
from conftest import make_scenario


def test_error_ratio():
    assert error_ratio([[1, 1]], [[1, 1], [0, 3]]) == 0
    assert error_ratio([[1, 1], [2, 2]], [[1, 1]]) == 0.5
    assert error_ratio([[5, 5]], [[1, 1]]) == 1
    assert error_ratio([[100.0 + 1e-8, 1]], [[100.0, 1]]) == 0
    with pytest.raises(UndefinedMetricError):
        error_ratio([], [[1, 1]])


def test_set_coverage():
    a = [[1, 1], [0, 3]]
    assert set_coverage(a, a) == 1
    assert set_coverage([[1, 1]], [[2, 2], [0, 3]]) == 0.5
    assert set_coverage([[0, 0]], [[1, 1], [2, 3]]) == 1
    assert set_coverage([], [[1, 1]]) == 0
    with pytest.raises(UndefinedMetricError):
        set_coverage([[1, 1]], [])


def test_spacing():
    assert spacing([[0, 0], [1, 1], [2, 2]]) == 0
    assert spacing([[0, 0], [4, 1]]) == 0
    assert spacing([[0, 0], [1, 0], [3, 0]]) == math.sqrt(2 / 9)
    with pytest.raises(UndefinedMetricError):
        spacing([[1, 1]])


def test_reference_front():
    assert reference_front([Front([[1, 1], [0, 3]])]).objectives.tolist() == [[1, 1], [0, 3]]
    assert reference_front([Front([[1, 1]]), Front([[2, 2]])]).objectives.tolist() == [[1, 1]]
    assert len(reference_front([Front([[1, 2]]), Front([[2, 1]])])) == 2
    with pytest.raises(UndefinedMetricError):
        reference_front([Front(np.zeros((0, 2)))])


def test_pareto_filter_against_quadratic_check():
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 6, size=(200, 3)).astype(float)
    keep = set(pareto_filter(pts).tolist())
    for i, p in enumerate(pts):
        dominated = np.any(np.all(pts <= p, axis=1) & np.any(pts < p, axis=1))
        if dominated:
            assert i not in keep
    assert len({tuple(pts[i]) for i in keep}) == len(keep)
    assert {tuple(p) for p in pts[list(keep)]} == {
        tuple(p) for p in pts if not np.any(np.all(pts <= p, axis=1) & np.any(pts < p, axis=1))
    }


def test_brute_force_single_robot():
    sc = make_scenario([[1, 1]], req=[1, 1], constraints=[("same", 0, 1)])
    front = brute_force_front(sc)
    assert front.positions.tolist() == [[True]]


def test_brute_force_infeasible_flag():
    sc = make_scenario([[1, 0], [0, 1]], req=[1, 1], constraints=[("same", 0, 1)])
    front = brute_force_front(sc)
    assert len(front) == 0 and front.infeasible


def test_brute_force_refuses_large_n():
    with pytest.raises(InvalidInputError):
        brute_force_front(generate_scenario(0, 23))


def test_brute_force_matches_scalar_enumeration():
    sc = generate_scenario(8, 9)
    ev = Evaluator(sc)
    rows = []
    for code in range(1, 1 << sc.n):
        bits = np.array([(code >> j) & 1 for j in range(sc.n)], dtype=bool)
        if feasibility_degree(bits, sc).feasible:
            rows.append(ev.objectives(bits)[0])
    rows = np.array(rows)
    expected = rows[pareto_filter(rows)]
    got = brute_force_front(sc, chunk=37).objectives
    assert sorted(map(tuple, got.tolist())) == sorted(map(tuple, expected.tolist()))


def test_promethee_cases():
    single = promethee_rank([[3, 3, 3]])
    assert single.order == [0] and single.net_flow.tolist() == [0]
    tie = promethee_rank([[1, 2], [2, 1]], [0.5, 0.5])
    assert tie.order == [0, 1] and tie.net_flow.tolist() == [0, 0]
    dom = promethee_rank([[2, 2, 2], [1, 1, 1]], CriteriaWeights(0.2, 0.3, 0.5))
    assert dom.order == [1, 0] and dom.net_flow.tolist() == [-1, 1]
    favor_time = promethee_rank([[1, 5, 1], [5, 1, 1]], CriteriaWeights(0.5, 0.25, 0.25))
    assert favor_time.order == [0, 1] and favor_time.net_flow.tolist() == [0.25, -0.25]


def test_criteria_weights():
    assert CriteriaWeights.parse("0.6,0.2,0.2") == CriteriaWeights(0.6, 0.2, 0.2)
    with pytest.raises(InvalidInputError):
        CriteriaWeights.parse("1,1")
    with pytest.raises(InvalidInputError):
        CriteriaWeights(0.5, 0.5, 0.5)
