import numpy as np
import pytest

from targetopt.dataspace import Dataset, ParameterSpace, TargetSpec
from targetopt.errors import InsufficientData, OracleFailure
from targetopt.optimizer import ApproachConfig, RunConfig, RunTrace, iterate, run
from targetopt.simbench import TestModel, make_target, search_space


def dataset_from(points, f, D=1):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ds = Dataset(points.shape[1], D)
    for p in points:
        ds.add_measurement(ds.add_point(p), np.atleast_1d(f(p)))
    return ds


def test_approach_config_validation():
    with pytest.raises(ValueError):
        ApproachConfig(6)
    with pytest.raises(ValueError):
        ApproachConfig(3, component_count="median")
    assert ApproachConfig(1).components(4) == 1
    assert ApproachConfig(3).components(4) == 4
    assert ApproachConfig(3, component_count=9).components(2) == 2
    cfg = ApproachConfig(4, component_count="kaiser", neighbor_count=7)
    assert ApproachConfig.from_dict(cfg.to_dict()) == cfg


def test_iterate_needs_three_measurements():
    ds = dataset_from([[0.0, 0.0], [1.0, 1.0]], lambda p: p.sum())
    with pytest.raises(InsufficientData):
        iterate(ds, TargetSpec([0.0], 0.1), search_space(), ApproachConfig(3))


def test_two_roots_give_two_candidates():
    ds = dataset_from([[-3.0], [-1.5], [0.5], [2.0], [3.0]], lambda p: p[0] ** 2)
    cands = iterate(ds, TargetSpec([1.0], 0.1), ParameterSpace([-5], [5]), ApproachConfig(1))
    xs = sorted(c.p[0] for c in cands)
    assert xs == pytest.approx([-1.0, 1.0], abs=1e-8)
    assert {c.provenance for c in cands} == {"root"}


def test_no_root_uses_fallback():
    ds = dataset_from([[-3.0], [-1.0], [0.5], [2.0], [3.0]], lambda p: p[0] ** 2 + 1)
    cands = iterate(ds, TargetSpec([0.0], 0.1), ParameterSpace([-5], [5]), ApproachConfig(1))
    assert len(cands) == 1 and cands[0].provenance == "fallback"
    assert -5 <= cands[0].p[0] <= 5


def test_linear_model_hits_target_quickly():
    # typical rather than guaranteed: some designs need a few more iterations
    model = TestModel(1)
    best = []
    for seed in range(50):
        init = np.random.default_rng(seed).uniform(-4, 4, size=(4, 2))
        cfg = RunConfig(max_iterations=3, initial_points=init)
        tr = run(model.measure, make_target(1), search_space(), ApproachConfig(3), cfg, truth=model.mean)
        best.append(min(tr.actual[4:]))
    assert np.median(best) <= 0.05


def test_approach_one_and_three_agree_when_second_component_is_empty():
    pts = [[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]
    ds = dataset_from(pts, lambda p: 0.8 * p[0])
    target = TargetSpec([0.4], 0.1)
    a = iterate(ds, target, search_space(), ApproachConfig(1))
    b = iterate(ds, target, search_space(), ApproachConfig(3))
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x.p, y.p)
    np.testing.assert_allclose(a[0].p, [0.5, 0.0], atol=1e-10)


def test_degenerate_descriptor_still_returns_candidate():
    ds = dataset_from([[0.0, 0.0], [1.0, 2.0], [-2.0, 1.0]], lambda p: 3.0)
    cands = iterate(ds, TargetSpec([0.0], 0.1), search_space(), ApproachConfig(3))
    assert len(cands) >= 1


@pytest.mark.parametrize("approach", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("model_id,sigma", [(1, 0.0), (3, 0.2), (12, 0.0), (123, 0.2)])
def test_run_invariants(approach, model_id, sigma):
    model = TestModel(model_id, sigma)
    space = ParameterSpace([-5, -5], [5, 5], resolution=[1e-3, 1e-3])
    cfg = RunConfig(max_iterations=8, seed=approach, branch_cap=5, replicates=2 if sigma else 1)
    tr = run(model.measure, make_target(model_id), space, ApproachConfig(approach), cfg, truth=model.mean)
    P = np.array(tr.points)
    assert all(space.contains(p) for p in P)
    assert max(tr.iteration.count(i) for i in range(1, 9)) <= 5
    for i in range(len(P)):
        for j in range(i):
            assert not np.all(np.abs(P[i] - P[j]) < 1e-3)
    assert all(o >= 0 for o in tr.observed)
    again = run(model.measure, make_target(model_id), space, ApproachConfig(approach), cfg, truth=model.mean)
    assert tr.equals(again)


def test_zero_iterations_is_initial_design():
    model = TestModel(2)
    tr = run(model.measure, make_target(2), search_space(), ApproachConfig(3),
             RunConfig(max_iterations=0, design_size=5, seed=4))
    assert len(tr) == 5 and set(tr.provenance) == {"initial"}


def test_budget_truncates_and_records_hits():
    model = TestModel(1)
    cfg = RunConfig(max_iterations=40, max_points=10, seed=1)
    tr = run(model.measure, make_target(1), search_space(), ApproachConfig(3), cfg, truth=model.mean)
    assert len(tr) == 10
    stop = run(model.measure, make_target(1), search_space(), ApproachConfig(3),
               RunConfig(max_iterations=40, seed=1, stop_on_hit=True), truth=model.mean)
    last = stop.iteration[-1]
    assert any(h for h, it in zip(stop.hit, stop.iteration) if it == last)
    assert not any(h for h, it in zip(stop.hit, stop.iteration) if it < last)


def test_linear_model_converges():
    model = TestModel(1)
    tr = run(model.measure, make_target(1), search_space(), ApproachConfig(3),
             RunConfig(max_iterations=40, seed=0, max_points=44), truth=model.mean)
    assert min(tr.actual) <= 1e-3


def test_oracle_failure_keeps_partial_trace():
    calls = []

    def flaky(p, rng):
        calls.append(p)
        if len(calls) > 5:
            raise RuntimeError("instrument offline")
        return np.array([p[0] - p[1]])

    with pytest.raises(OracleFailure) as info:
        run(flaky, TargetSpec([0.5], 0.1), search_space(), ApproachConfig(3), RunConfig(seed=2))
    assert isinstance(info.value.trace, RunTrace) and len(info.value.trace) == 5


def test_running_min_kinds():
    tr = RunTrace()
    for i, (o, a) in enumerate([(3.0, 2.0), (1.0, 2.5), (2.0, 0.1), (0.5, 1.0)]):
        tr.append([0.0], i, [[0.0]], o, a, "initial", 0, False)
    np.testing.assert_array_equal(tr.running_min("observed"), [3, 1, 1, 0.5])
    np.testing.assert_array_equal(tr.running_min("actual"), [2, 2, 0.1, 0.1])
    np.testing.assert_array_equal(tr.running_min("incumbent"), [2, 2.5, 2.5, 1.0])
    with pytest.raises(ValueError):
        tr.running_min("best")
    assert tr.truncated(2).observed == [3.0, 1.0]
