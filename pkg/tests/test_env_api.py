import copy

import numpy as np
import pytest

from pdppo.checks import (
    check_determinism_split,
    check_phase_alternation,
    check_reward_split,
    check_seed_reproducibility,
)
from pdppo.envs import (
    ActionSpec,
    FrozenLakeEnv,
    InstanceSpec,
    LotSizingEnv,
    PhaseOrderError,
    TwoArmBanditEnv,
    make_instance,
)


def lake():
    return FrozenLakeEnv(n=5, m=5, hole_prob=0.3, p_slip=0.5, episode_cap=60)


def lot():
    rng = np.random.default_rng(99)
    return LotSizingEnv(make_instance(InstanceSpec(items=4, machines=2, i_max=15, horizon=25), rng))


ENV_FACTORIES = {"lake": lake, "lot": lot, "bandit": TwoArmBanditEnv}


def random_action(env, rng):
    idx = np.array([int(rng.integers(n)) for n in env.action_spec.arities], dtype=np.int64)
    return int(idx[0]) if env.action_spec.n_components == 1 else idx


class TestActionSpec:
    def test_discrete(self):
        spec = ActionSpec.discrete(4)
        assert spec.arities == (4,)
        assert spec.n_components == 1
        assert spec.total_choices == 4

    def test_multi_discrete(self):
        spec = ActionSpec.multi_discrete([6, 6])
        assert spec.arities == (6, 6)
        assert spec.total_choices == 12

    def test_rejects_empty_or_degenerate(self):
        with pytest.raises(ValueError):
            ActionSpec(())
        with pytest.raises(ValueError):
            ActionSpec.discrete(0)


class TestPhaseAlternation:
    @pytest.mark.parametrize("name", list(ENV_FACTORIES))
    def test_violations_raise(self, name):
        result = check_phase_alternation(ENV_FACTORIES[name]())
        assert result.passed, result.detail

    def test_step_before_reset(self):
        env = lake()
        with pytest.raises(PhaseOrderError):
            env.step_deterministic(0)

    def test_step_after_done_requires_reset(self):
        env = TwoArmBanditEnv()
        env.reset(0)
        env.step(0)  # bandit episode ends immediately
        with pytest.raises(PhaseOrderError):
            env.step_deterministic(0)
        env.reset()
        env.step(1)  # fine again


class TestDeterminismSplit:
    @pytest.mark.parametrize("name", list(ENV_FACTORIES))
    def test_deterministic_phase_is_rng_free(self, name):
        result = check_determinism_split(ENV_FACTORIES[name](), trials=150)
        assert result.passed, result.detail

    def test_repeated_deterministic_phase_is_bitwise_identical(self):
        env = lake()
        env.reset(5)
        rng = np.random.default_rng(0)
        for _ in range(50):
            action = random_action(env, rng)
            clones = [copy.deepcopy(env) for _ in range(4)]
            ref_post, ref_r = env.step_deterministic(action)
            for clone in clones:
                post, r = clone.step_deterministic(action)
                assert r == ref_r
                assert np.array_equal(post, ref_post)
            _, _, done = env.step_stochastic()
            if done:
                env.reset()

    @pytest.mark.parametrize("factory", [lake, lot])
    def test_thousand_replays_of_one_state_action(self, factory):
        env = factory()
        env.reset(9)
        rng = np.random.default_rng(2)
        action = random_action(env, rng)
        ref_post, ref_r = copy.deepcopy(env).step_deterministic(action)
        for _ in range(1000):
            post, r = copy.deepcopy(env).step_deterministic(action)
            assert r == ref_r
            assert np.array_equal(post, ref_post)


class TestSeedReproducibility:
    @pytest.mark.parametrize("name", list(ENV_FACTORIES))
    def test_full_trajectory(self, name):
        result = check_seed_reproducibility(ENV_FACTORIES[name], steps=200)
        assert result.passed, result.detail

    def test_same_seed_same_initial_observation(self):
        for factory in ENV_FACTORIES.values():
            a, b = factory(), factory()
            assert np.array_equal(a.reset(1234), b.reset(1234))


class TestStepOutcome:
    @pytest.mark.parametrize("name", list(ENV_FACTORIES))
    def test_total_minus_det_is_stochastic_reward(self, name):
        result = check_reward_split(ENV_FACTORIES[name](), steps=200)
        assert result.passed, result.detail

    def test_combined_step_matches_phases(self):
        env_a, env_b = lake(), lake()
        env_a.reset(17)
        env_b.reset(17)
        rng = np.random.default_rng(4)
        for _ in range(80):
            action = random_action(env_a, rng)
            outcome = env_a.step(action)
            post, det_r = env_b.step_deterministic(action)
            nxt, stoch_r, done = env_b.step_stochastic()
            assert np.array_equal(outcome.post_obs, post)
            assert outcome.det_reward == det_r
            assert np.array_equal(outcome.next_obs, nxt)
            assert outcome.total_reward == det_r + stoch_r
            assert outcome.done == done
            if done:
                env_a.reset()
                env_b.reset()
            # keep both environments on identical RNG streams
            assert repr(env_a.rng.bit_generator.state) == repr(env_b.rng.bit_generator.state)

    def test_observations_finite_and_fixed_length(self):
        for factory in ENV_FACTORIES.values():
            env = factory()
            obs = env.reset(3)
            assert obs.shape == (env.observation_dim,)
            assert np.all(np.isfinite(obs))
            rng = np.random.default_rng(1)
            outcome = env.step(random_action(env, rng))
            for vec in (outcome.post_obs, outcome.next_obs):
                assert vec.shape == (env.observation_dim,)
                assert np.all(np.isfinite(vec))
