import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from targetopt.dataspace import (
    Dataset,
    ParameterSpace,
    TargetSpec,
    in_target,
    initial_design,
    proximity_conflict,
    standardize,
    standardize_arrays,
)
from targetopt.errors import DegenerateColumn, InsufficientData, SchemaMismatch


def test_target_spec_broadcasts_scalar_halfwidth():
    t = TargetSpec([1.0, 2.0], 0.1)
    np.testing.assert_array_equal(t.halfwidths, [0.1, 0.1])
    assert TargetSpec.from_dict(t.to_dict()).target.tolist() == [1.0, 2.0]


@pytest.mark.parametrize("bad", [dict(target=[1.0], halfwidths=[0.0]),
                                 dict(target=[1.0, 2.0], halfwidths=[0.1, 0.1, 0.1]),
                                 dict(target=[np.nan], halfwidths=[0.1])])
def test_target_spec_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        TargetSpec(**bad)


def test_parameter_space_validation_and_clip():
    space = ParameterSpace([-5, -5], [5, 5])
    assert space.contains([5, -5]) and not space.contains([5.1, 0])
    np.testing.assert_array_equal(space.clip([7, -9]), [5, -5])
    with pytest.raises(ValueError):
        ParameterSpace([0, 0], [0, 1])
    with pytest.raises(ValueError):
        ParameterSpace([0, 0], [1, 1], resolution=[2, 0.1])


def test_standardize_hand_values():
    P = np.array([[1.0, 1.0], [3.0, 3.0]])
    D = np.array([[0.0], [1.0]])
    stats, P_std, Z = standardize_arrays(P, D, [0.5])
    np.testing.assert_allclose(stats.predictor_means, [2, 2])
    np.testing.assert_allclose(stats.predictor_sds, [np.sqrt(2)] * 2)
    np.testing.assert_allclose(P_std, [[-1 / np.sqrt(2)] * 2, [1 / np.sqrt(2)] * 2])


def test_descriptor_transform_symmetric_column():
    D = np.array([[2.0, 0.0], [-2.0, 1.0], [0.0, 3.0]])
    stats, _, Z = standardize_arrays(np.arange(6.0).reshape(3, 2) ** 2, D, [0.0, 0.0])
    assert stats.descriptor_sds[0] == pytest.approx(2.0)
    np.testing.assert_allclose(Z[:, 0], [1.0, -1.0, 0.0])


def test_constant_descriptor_is_degenerate():
    with pytest.raises(DegenerateColumn) as info:
        standardize_arrays(np.array([[0.0], [1.0], [2.0]]), np.array([[1.0, 0.1], [2.0, 0.1], [3, 0.1]]), [0, 0])
    assert tuple(info.value.columns) == (1,)


def test_constant_predictor_keeps_zero_sd_and_unit_scale():
    P = np.array([[0.3, 1.0], [0.3, 2.0], [0.3, 4.0]])
    stats, P_std, _ = standardize_arrays(P, np.array([[1.0], [2.0], [3.0]]), [0.0])
    assert stats.predictor_sds[0] == 0.0 and stats.degenerate_predictors == (0,)
    np.testing.assert_array_equal(P_std[:, 0], 0.0)


def test_standardize_needs_two_rows():
    with pytest.raises(InsufficientData):
        standardize_arrays(np.zeros((1, 2)), np.zeros((1, 1)), [0.0])


@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 10_000))
def test_standardize_roundtrip_and_target_at_origin(n, P, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, P)) * r.uniform(0.1, 10, size=P) + r.normal(size=P)
    D = r.normal(size=(n, 2))
    target = r.normal(size=2)
    stats, P_std, Z = standardize_arrays(X, D, target)
    np.testing.assert_allclose(stats.destandardize(P_std), X, rtol=1e-12, atol=1e-12 * np.abs(X).max())
    np.testing.assert_array_equal((target - target) / stats.descriptor_sds, 0.0)


def test_dataset_replicates_and_rows():
    ds = Dataset(2, 1)
    a = ds.add_point([0.0, 1.0])
    b = ds.add_point([1.0, 0.0])
    ds.add_measurement(a, [1.0])
    ds.add_measurement(a, [3.0])
    ds.add_measurement(b, [5.0])
    assert len(ds) == 3 and ds.n_points == 2
    assert ds.replicate_count(a) == 2 and ds.has_measurement(a, 1)
    np.testing.assert_array_equal(ds.mean_descriptor(a), [2.0])
    np.testing.assert_array_equal(ds.predictors()[:, 0], [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        ds.add_point([1.0], a + 10)
    with pytest.raises(KeyError):
        ds.add_measurement(99, [0.0])


def test_dataset_csv_roundtrip_exact():
    r = np.random.default_rng(3)
    ds = Dataset(3, 2)
    for _ in range(5):
        pid = ds.add_point(r.normal(size=3))
        for _ in range(2):
            ds.add_measurement(pid, r.normal(size=2))
    text = ds.to_csv()
    assert text.splitlines()[0] == "p1,p2,p3,d1,d2,point_id,replicate"
    again = Dataset.from_csv(text)
    assert again.to_csv() == text
    np.testing.assert_array_equal(again.descriptors(), ds.descriptors())


@pytest.mark.parametrize("text", ["", "p1,d1\n", "p1,d1,point_id,replicate\n1,x,0,0\n",
                                  "p1,d1,point_id,replicate\n1,2,0\n",
                                  "p1,d1,point_id,replicate\n1,2,0,0\n2,2,0,1\n"])
def test_dataset_csv_schema_errors(text):
    with pytest.raises(SchemaMismatch):
        Dataset.from_csv(text)


def test_standardize_dataset_matches_arrays():
    ds = Dataset(1, 1)
    for x in (0.0, 1.0, 3.0):
        ds.add_measurement(ds.add_point([x]), [x * x])
    stats, P_std, Z = standardize(ds, TargetSpec([1.0], 0.1))
    np.testing.assert_allclose(Z[:, 0], (np.array([0, 1, 9]) - 1) / np.std([0, 1, 9], ddof=1))


def test_latin_hypercube_strata():
    pts = initial_design("latin-hypercube", 4, ParameterSpace([0, 0], [4, 4]), seed=7)
    for dim in range(2):
        assert sorted(np.floor(pts[:, dim]).astype(int).tolist()) == [0, 1, 2, 3]


@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_latin_hypercube_marginals_are_permutations(k, P, seed):
    space = ParameterSpace(-np.ones(P), 3 * np.ones(P))
    pts = initial_design("latin-hypercube", k, space, seed)
    strata = np.floor((pts - space.lower) / (space.upper - space.lower) * k).clip(0, k - 1)
    for dim in range(P):
        assert sorted(strata[:, dim].astype(int).tolist()) == list(range(k))


def test_uniform_design_is_deterministic_and_in_bounds():
    space = ParameterSpace([-4, -4], [4, 4])
    a = initial_design("uniform-random", 4, space, 11)
    np.testing.assert_array_equal(a, initial_design("uniform-random", 4, space, 11))
    assert np.all((a >= -4) & (a <= 4))
    with pytest.raises(ValueError):
        initial_design("latin-hypercube", 1, space, 0)
    with pytest.raises(ValueError):
        initial_design("sobol", 4, space, 0)


def test_proximity_conflict_examples():
    space = ParameterSpace([0, 0], [10, 10], resolution=[0.1, 0.1])
    assert proximity_conflict([1.05, 2.05], [[1.0, 2.0]], space)
    assert not proximity_conflict([1.05, 2.5], [[1.0, 2.0]], space)
    assert not proximity_conflict([1.0, 2.0], [[1.0, 2.0]], ParameterSpace([0, 0], [10, 10]))


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.floats(0.01, 0.5), st.floats(1.0, 3.0))
def test_proximity_conflict_monotone_in_resolution(delta, res, grow):
    small = ParameterSpace([-5, -5], [5, 5], resolution=[res, res])
    big = ParameterSpace([-5, -5], [5, 5], resolution=[min(res * grow, 10), res])
    cand = np.array(delta) * 0.3
    if proximity_conflict(cand, [[0.0, 0.0]], small):
        assert proximity_conflict(cand, [[0.0, 0.0]], big)
    assert proximity_conflict(cand, [[0.0, 0.0]], small) == proximity_conflict([0.0, 0.0], [cand], small)


def test_in_target_closed_box():
    t = TargetSpec([1.0, 2.0], [0.25, 0.5])
    assert in_target([1.0, 2.0], t)
    assert in_target([1.25, 2.0], t)
    assert not in_target([1.5, 2.0], t)
