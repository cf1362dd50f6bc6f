import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from targetopt.baselines import (
    Nsga2Config,
    crowding_distance,
    dominates,
    nondominated_sort,
    nsga2_run,
    polynomial_mutation,
    random_search_run,
    sbx_crossover,
)
from targetopt.dataspace import ParameterSpace, TargetSpec
from targetopt.simbench import TestModel, make_target, search_space


def brute_force_fronts(F):
    remaining = set(range(len(F)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining if not any(dominates(F[j], F[i]) for j in remaining))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def test_small_example():
    F = np.array([[1, 2], [2, 1], [3, 3]], dtype=float)
    assert nondominated_sort(F) == [[0, 1], [2]]


def test_identical_points_single_front():
    assert nondominated_sort(np.ones((5, 2))) == [[0, 1, 2, 3, 4]]


@given(st.integers(1, 60), st.integers(1, 4), st.integers(0, 10_000))
def test_sort_matches_brute_force(n, M, seed):
    r = np.random.default_rng(seed)
    F = r.integers(0, 5, size=(n, M)).astype(float)  # many ties
    assert nondominated_sort(F) == brute_force_fronts(F)


def test_crowding_boundaries_infinite():
    F = np.array([[0.0, 3.0], [1.0, 2.0], [2.0, 1.5], [3.0, 0.0]])
    d = crowding_distance(F)
    assert np.isinf(d[0]) and np.isinf(d[3]) and np.all(np.isfinite(d[1:3]))


def test_config_validation():
    with pytest.raises(ValueError):
        Nsga2Config(population_size=5)
    with pytest.raises(ValueError):
        Nsga2Config(crossover_prob=1.5)


@given(st.integers(0, 10_000))
def test_operators_stay_in_bounds(seed):
    r = np.random.default_rng(seed)
    lo, hi = np.array([-5.0, 0.0]), np.array([5.0, 1.0])
    a, b = r.uniform(lo, hi), r.uniform(lo, hi)
    c1, c2 = sbx_crossover(a, b, lo, hi, 15, 1.0, r)
    m = polynomial_mutation(c1, lo, hi, 20, 1.0, r)
    for v in (c1, c2, m):
        assert np.all(v >= lo) and np.all(v <= hi)


def _setup():
    model = TestModel(12)
    return model, make_target(12), search_space()


def test_budget_equal_population_is_initial_population():
    model, target, space = _setup()
    tr = nsga2_run(model.measure, target, space, 20, Nsga2Config(seed=3), truth=model.mean)
    assert len(tr) == 20 and set(tr.provenance) == {"initial"}


def test_nsga2_deterministic_budget_and_bounds():
    model, target, space = _setup()
    a = nsga2_run(model.measure, target, space, 57, Nsga2Config(seed=5), truth=model.mean)
    b = nsga2_run(model.measure, target, space, 57, Nsga2Config(seed=5), truth=model.mean)
    assert len(a) == 57 and a.equals(b)
    assert all(space.contains(p) for p in a.points)
    with pytest.raises(ValueError):
        nsga2_run(model.measure, target, space, 10, Nsga2Config())


def test_nsga2_improves_on_initial_population():
    model, target, space = _setup()
    better = 0
    for seed in range(100):
        tr = nsga2_run(model.measure, target, space, 100, Nsga2Config(seed=seed), truth=model.mean)
        act = np.array(tr.actual)
        better += act.min() < act[:20].min()
    assert better >= 90


def test_random_search():
    model, target, space = _setup()
    tr = random_search_run(model.measure, target, space, 1, seed=1)
    assert len(tr) == 1 and space.contains(tr.points[0])
    a = random_search_run(model.measure, target, space, 30, seed=2, initial=[[1.0, 1.0]])
    assert a.equals(random_search_run(model.measure, target, space, 30, seed=2, initial=[[1.0, 1.0]]))
    assert a.provenance[0] == "initial" and a.observed[0] == 0.0
    assert np.all(np.diff(a.running_min()) <= 0)


def test_replicates_counted_per_point():
    model = TestModel(1, 0.2)
    tr = random_search_run(model.measure, make_target(1), search_space(), 6, seed=0, replicates=5)
    assert len(tr) == 6 and all(m.shape == (5, 1) for m in tr.measurements)
