import numpy as np
import pytest

from paip.errors import AgentStepError, IndexOutOfRange, ShapeMismatch
from paip.loop import (EnvironmentSpec, History, env_step, init_history, memory_append,
                       run_episode, stochastic_table)
from paip.errors import InvalidDistribution


def identity_env(n=2):
    return EnvironmentSpec(np.eye(n)[0], np.stack([np.eye(n)] * 2), np.eye(n))


def flip_env(noise=0.0):
    stay = np.eye(2)
    flip = stay[::-1]
    sensor = np.array([[1 - noise, noise], [noise, 1 - noise]])
    return EnvironmentSpec([0.5, 0.5], np.stack([stay, flip]), sensor)


class TestEnvStep:
    def test_identity(self):
        assert env_step(identity_env(), 1, 0, np.random.default_rng(0)) == (1, 1)

    def test_flip(self):
        e, s = env_step(flip_env(), 0, 1, np.random.default_rng(0))
        assert (e, s) == (1, 1)

    def test_noisy_sensor_frequency(self):
        env = flip_env(0.1)
        rng = np.random.default_rng(5)
        s = [env_step(env, 0, 0, rng)[1] for _ in range(100_000)]
        assert abs(1 - np.mean(s) - 0.9) < 0.01

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            env_step(flip_env(), 2, 0, np.random.default_rng(0))
        with pytest.raises(IndexOutOfRange):
            env_step(flip_env(), 0, 5, np.random.default_rng(0))


class TestHistory:
    def test_append(self):
        h = memory_append(init_history(1), 0, 1)
        assert h.sensors == (1, 0) and h.actions == (1,)

    def test_init(self):
        h = init_history(3)
        assert h.sensors == (3,) and h.actions == () and h.t == 1

    def test_original_unchanged_and_growth(self):
        h0 = init_history(0)
        h1 = memory_append(h0, 1, 0)
        assert h0.t == 1 and h1.t == 2
        assert len(h1.actions) == len(h0.actions) + 1

    def test_inconsistent_lengths(self):
        with pytest.raises(ShapeMismatch):
            History((0, 1), ())


class TestTables:
    def test_row_sum_rejected(self):
        with pytest.raises(InvalidDistribution, match=r"\[1\]"):
            stochastic_table([[1.0, 0.0], [0.5, 0.4]])


class TestRunEpisode:
    def test_forced_trajectory(self):
        traj = run_episode(identity_env(), lambda h: [1.0, 0.0], 1, seed=0)
        assert [(r.t, r.e, r.s, r.a) for r in traj.records] == [(0, 0, 0, None), (1, 0, 0, 0)]

    def test_history_length_matches_step(self):
        seen = []

        def agent(h):
            seen.append(h.t)
            return [0.5, 0.5]

        run_episode(flip_env(0.1), agent, 6, seed=3)
        assert seen == [1, 2, 3, 4, 5, 6]

    def test_determinism(self):
        def key(tr):
            return [(r.e, r.s, r.a) for r in tr.records]

        a = run_episode(flip_env(0.1), lambda h: [0.5, 0.5], 20, seed=11)
        b = run_episode(flip_env(0.1), lambda h: [0.5, 0.5], 20, seed=11)
        assert key(a) == key(b)

    def test_occupancy(self):
        env = flip_env(0.0)
        occ = []
        for ep in range(10_000):
            tr = run_episode(env, lambda h: [0.5, 0.5], 3, seed=ep)
            occ.append(tr.records[-1].e)
        assert abs(np.mean(occ) - 0.5) < 0.02

    def test_agent_error_has_step(self):
        def agent(h):
            if h.t == 3:
                raise RuntimeError("boom")
            return [1.0, 0.0]

        with pytest.raises(AgentStepError) as info:
            run_episode(flip_env(), agent, 5, seed=0)
        assert info.value.step == 3

    def test_support(self):
        env = flip_env(0.0)
        tr = run_episode(env, lambda h: [0.3, 0.7], 30, seed=2)
        for r in tr.records:
            assert env.sensor[r.e, r.s] > 0
