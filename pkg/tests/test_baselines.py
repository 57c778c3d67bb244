import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import d4orm.baselines as bl
from d4orm.baselines import (CemConfig, MppiConfig, cem_solve, cem_update, gaussian_batch,
                             mppi_solve, mppi_update, select_elites)
from d4orm.denoiser import DenoiserConfig, mc_average, score_weights
from d4orm.dynamics import DynamicsModel
from d4orm.errors import ConfigError
from d4orm.optimizer import OptimizerConfig, solve
from d4orm.scenarios import Scenario, antipodal_circle

HOLO2D = DynamicsModel.from_kind("holo2d")


def line(H=25):
    return Scenario("holo2d", [[-2, 0, 0, 0]], [[2, 0]], horizon=H)


def test_config_validation():
    with pytest.raises(ConfigError):
        MppiConfig(sigma=0)
    with pytest.raises(ConfigError):
        MppiConfig(M=1)
    with pytest.raises(ConfigError):
        CemConfig(M=5, elite_fraction=0.1)
    with pytest.raises(ConfigError):
        CemConfig(elite_fraction=1.0)
    assert CemConfig(M=40, elite_fraction=0.1).n_elites == 4


def test_mppi_update_is_mc_average():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(6, 1, 4, 2))
    r = rng.normal(size=6)
    np.testing.assert_array_equal(mppi_update(S, r, 0.3), mc_average(S, score_weights(r, 0.3)))


def test_mppi_two_sample_oracle():
    S = np.stack([np.zeros((1, 3, 2)), np.ones((1, 3, 2))])
    r = np.array([-1.0, 1.0])
    e = np.exp(-2.0)
    expected = np.full((1, 3, 2), 1 / (1 + e))
    np.testing.assert_allclose(mppi_update(S, r, 1.0), expected, rtol=1e-12)


def test_select_elites_sort_oracle():
    assert list(select_elites([0.5, 0.9, 0.9, 0.1], 2)) == [1, 2]
    assert list(select_elites([1.0, 1.0, 1.0, 1.0], 2)) == [0, 1]


@settings(max_examples=200)
@given(st.lists(st.integers(-3, 3).map(float), min_size=2, max_size=30), st.data())
def test_select_elites_matches_naive_sort(rewards, data):
    n = data.draw(st.integers(1, len(rewards)))
    naive = sorted(range(len(rewards)), key=lambda m: (-rewards[m], m))[:n]
    assert list(select_elites(rewards, n)) == naive


def test_cem_update_identical_samples_keep_mean():
    S = np.repeat(np.full((1, 1, 3, 2), 0.7), 5, axis=0)
    mean, std = cem_update(S, np.arange(5.0), 2, 0.05)
    np.testing.assert_array_equal(mean, S[0])
    np.testing.assert_array_equal(std, 0.05)


def test_cem_update_refits_elites():
    S = np.arange(4.0).reshape(4, 1, 1, 1) * np.ones((4, 1, 2, 2))
    mean, std = cem_update(S, [0.0, 3.0, 2.0, 1.0], 2, 0.0)
    np.testing.assert_allclose(mean, 1.5)
    np.testing.assert_allclose(std, 0.5)


def test_gaussian_batch_workers_independent():
    mean = np.random.default_rng(1).normal(size=(2, 5, 2))
    a = gaussian_batch(mean, 0.5, 17, 3, (1, 4), workers=1)
    b = gaussian_batch(mean, 0.5, 17, 3, (1, 4), workers=4)
    assert np.array_equal(a, b)


def test_mppi_tiny_sigma_keeps_mean():
    res = mppi_solve(line(), HOLO2D, MppiConfig(M=8, sigma=1e-300, iterations=3,
                                                stop_on_success=False))
    rewards = [r.reward for r in res.per_iteration]
    assert rewards == [rewards[0]] * 3
    assert np.abs(res.best_trajectory.controls).max() < 1e-290


def test_mppi_single_iteration_matches_hand_average(monkeypatch):
    captured = {}
    real = bl.evaluate_controls

    def spy(controls, scenario, model, workers=1):
        r = real(controls, scenario, model, workers)
        captured["samples"], captured["rewards"] = controls.copy(), r
        return r

    monkeypatch.setattr(bl, "evaluate_controls", spy)
    sc = line()
    res = mppi_solve(sc, HOLO2D, MppiConfig(M=2, iterations=1, lambda_=1.0))
    S, r = captured["samples"], captured["rewards"]
    z = (r - r.mean()) / r.std()
    w = np.exp(z - z.max())
    w /= w.sum()
    expected = np.clip(w[0] * S[0] + w[1] * S[1], -2, 2)
    np.testing.assert_allclose(res.best_trajectory.controls, expected, rtol=1e-12, atol=1e-15)


def run_all(sc, workers=1, seed=0, iters=2, M=16):
    return {
        "d4orm": solve(sc, HOLO2D, OptimizerConfig(iters, None, False,
                                                   DenoiserConfig(N=3, M=M, seed=seed)), workers),
        "mppi": mppi_solve(sc, HOLO2D, MppiConfig(M=M, iterations=iters, seed=seed,
                                                  stop_on_success=False), workers),
        "cem": cem_solve(sc, HOLO2D, CemConfig(M=M, elite_fraction=0.25, iterations=iters,
                                               seed=seed, stop_on_success=False), workers),
    }


def test_shared_result_conformance():
    sc = antipodal_circle(2, 4.0, horizon=20)
    for name, res in run_all(sc).items():
        assert res.solver == name
        assert res.iterations_used == 2 == len(res.per_iteration)
        assert res.total_steps == res.iterations_used * res.steps_per_iteration
        assert res.total_rollouts == res.total_steps * 16
        assert res.best_reward == max(r.reward for r in res.per_iteration)
        assert res.best_trajectory.states.shape == (2, 21, 4)
        assert res.per_iteration[-1].cumulative_rollouts == res.total_rollouts
    assert run_all(sc)["mppi"].steps_per_iteration == 1


def test_baselines_deterministic_across_workers():
    sc = antipodal_circle(2, 4.0, horizon=20)
    a, b = run_all(sc, workers=1, seed=3), run_all(sc, workers=4, seed=3)
    for name in a:
        assert np.array_equal(a[name].best_trajectory.states, b[name].best_trajectory.states)


def test_model_mismatch_rejected():
    with pytest.raises(ConfigError):
        mppi_solve(line(), DynamicsModel.from_kind("diffdrive"))
    with pytest.raises(ConfigError):
        cem_solve(line(), DynamicsModel.from_kind("diffdrive"))
