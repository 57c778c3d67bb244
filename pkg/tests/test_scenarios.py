import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d4orm.dynamics import ModelKind
from d4orm.errors import ScenarioError
from d4orm.reward import ObstacleSet, RewardConfig
from d4orm.scenarios import (OBSTACLE_PRESETS, Scenario, add_obstacles, antipodal_circle,
                             antipodal_sphere, fibonacci_sphere, obstacle_preset, random_square)


def min_gap(pts):
    return min(np.linalg.norm(a - b) for a, b in itertools.combinations(pts, 2))


def assert_valid(sc):
    ra = sc.reward_config.robot_radius
    if sc.n > 1:
        assert min_gap(sc.start_positions) > 2 * ra
        assert min_gap(sc.goals) > 2 * ra


def test_antipodal_circle_examples():
    sc = antipodal_circle(2, 4.0)
    np.testing.assert_allclose(sc.start_positions, [[2, 0], [-2, 0]], atol=1e-12)
    np.testing.assert_allclose(sc.goals, [[-2, 0], [2, 0]], atol=1e-12)
    np.testing.assert_array_equal(sc.starts[:, 2:], 0.0)

    sc = antipodal_circle(4, 4.0)
    ang = np.arctan2(sc.start_positions[:, 1], sc.start_positions[:, 0])
    np.testing.assert_allclose(np.diff(np.unwrap(ang)), math.pi / 2, atol=1e-12)
    np.testing.assert_array_equal(sc.goals, -sc.start_positions)
    assert sc.name == "antipodal-circle-4"


def test_antipodal_circle_spacing_error_names_minimum():
    with pytest.raises(ScenarioError, match="diameter > "):
        antipodal_circle(64, 4.0)
    with pytest.raises(ScenarioError):
        antipodal_circle(2, 4.0, model_kind="holo3d")


def test_diffdrive_starts_face_goals():
    sc = antipodal_circle(4, 4.0, model_kind="diffdrive")
    heading = sc.starts[:, 2]
    to_goal = sc.goals - sc.start_positions
    np.testing.assert_allclose(np.cos(heading), to_goal[:, 0] / np.linalg.norm(to_goal, axis=1),
                               atol=1e-12)
    np.testing.assert_array_equal(sc.starts[:, 3], 0.0)


def test_antipodal_sphere_examples():
    sc = antipodal_sphere(8, 4.0)
    assert sc.model_kind is ModelKind.HOLO3D and sc.starts.shape == (8, 6)
    np.testing.assert_array_equal(sc.goals, -sc.start_positions)
    assert min_gap(sc.start_positions) > 0.2
    np.testing.assert_allclose(fibonacci_sphere(2), [[0, 0, 1], [0, 0, -1]], atol=1e-12)
    np.testing.assert_allclose(antipodal_sphere(2).start_positions, [[0, 0, 2], [0, 0, -2]],
                               atol=1e-12)


def test_fibonacci_sphere_unit_vectors():
    v = fibonacci_sphere(50)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, rtol=1e-12)


def test_random_square_examples():
    a, b = random_square(10, 4.0, seed=3), random_square(10, 4.0, seed=3)
    np.testing.assert_array_equal(a.starts, b.starts)
    np.testing.assert_array_equal(a.goals, b.goals)
    assert not np.array_equal(a.starts, random_square(10, 4.0, seed=4).starts)
    assert np.all(np.abs(a.start_positions) <= 2.0) and np.all(np.abs(a.goals) <= 2.0)


def test_random_square_density_error():
    with pytest.raises(ScenarioError, match="rejections"):
        random_square(200, 1.0)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.integers(1, 16))
def test_generated_scenarios_satisfy_invariants(seed, n):
    sc = random_square(n, 4.0, seed=seed)
    assert_valid(sc)
    travel = np.linalg.norm(sc.goals - sc.start_positions, axis=1)
    assert np.all(travel > 2 * sc.reward_config.robot_radius)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 16, 30])
def test_antipodal_generators_satisfy_invariants(n):
    assert_valid(antipodal_circle(n, 4.0))
    assert_valid(antipodal_sphere(n, 4.0))


def test_add_obstacles():
    sc = antipodal_circle(2, 4.0)
    assert add_obstacles(sc, []) is sc
    with_obs = add_obstacles(sc, [((0.0, 0.5), 0.3)])
    assert len(with_obs.obstacles) == 1
    with pytest.raises(ScenarioError, match="inside inflated obstacle"):
        add_obstacles(sc, [((2.0, 0.0), 0.3)])
    with pytest.raises(ScenarioError):
        add_obstacles(sc, [((0.0, 0.0, 0.0), 0.3)])


def test_obstacle_presets_fit_antipodal_circle():
    for name in OBSTACLE_PRESETS:
        for D in (4.0, 6.0):
            add_obstacles(antipodal_circle(8, D), obstacle_preset(name, D / 4))
    with pytest.raises(ScenarioError, match="unknown obstacle preset"):
        obstacle_preset("obs9")


def test_scenario_validation_errors():
    with pytest.raises(ScenarioError, match="apart"):
        Scenario("holo2d", [[0, 0, 0, 0], [0.1, 0, 0, 0]], [[1, 0], [-1, 0]])
    with pytest.raises(ScenarioError, match="starts at its goal"):
        Scenario("holo2d", [[0, 0, 0, 0]], [[0, 0]])
    with pytest.raises(ScenarioError, match="shape"):
        Scenario("holo2d", [[0, 0, 0]], [[1, 0]])
    with pytest.raises(ScenarioError, match="horizon"):
        Scenario("holo2d", [[0, 0, 0, 0]], [[1, 0]], horizon=1)
    with pytest.raises(ScenarioError, match="dt"):
        Scenario("holo2d", [[0, 0, 0, 0]], [[1, 0]], dt=0.0)


def test_json_round_trip(tmp_path):
    sc = add_obstacles(random_square(5, 4.0, seed=2, reward_config=RewardConfig(epsilon=0.02),
                                     horizon=40, dt=0.05), [((5.0, 5.0), 0.5)])
    path = tmp_path / "s.json"
    sc.save(path)
    back = Scenario.load(path)
    np.testing.assert_array_equal(back.starts, sc.starts)
    np.testing.assert_array_equal(back.goals, sc.goals)
    assert back.reward_config == sc.reward_config
    assert (back.horizon, back.dt, back.name) == (40, 0.05, sc.name)
    np.testing.assert_array_equal(back.obstacles.centers, sc.obstacles.centers)
    assert back.to_dict() == sc.to_dict()


def test_from_dict_errors():
    good = antipodal_circle(2).to_dict()
    with pytest.raises(ScenarioError, match="schema_version"):
        Scenario.from_dict({**good, "schema_version": 2})
    bad = dict(good)
    del bad["goals"]
    with pytest.raises(ScenarioError, match="malformed"):
        Scenario.from_dict(bad)


def test_scenario_arrays_are_read_only():
    sc = antipodal_circle(2)
    with pytest.raises(ValueError):
        sc.starts[0, 0] = 1.0
    assert isinstance(sc.obstacles, ObstacleSet)
