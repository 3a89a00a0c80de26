"""Arena dynamics, reward formula, observations, termination."""

import numpy as np
import pytest

from crossplay.envs.mppmr import ACTION_NAMES, MppmrEnv, MppmrParams, MppmrState


@pytest.fixture
def env():
    return MppmrEnv()


class TestReset:
    def test_reset_is_deterministic(self, env):
        a = env.reset()
        b = env.reset()
        assert np.array_equal(a.pos, b.pos)
        assert np.array_equal(a.vel, b.vel)
        assert a.t == b.t == 0

    def test_start_inside_arena(self, env):
        assert not env.out_of_bounds(env.reset())

    def test_start_velocities_zero(self, env):
        assert np.array_equal(env.reset().vel, np.zeros((2, 2)))


class TestStep:
    def test_stay_with_zero_velocity_keeps_position(self, env):
        s = env.reset()
        nxt, _, _, _ = env.step(s, (0, 0))
        assert np.array_equal(nxt.pos, s.pos)
        assert np.array_equal(nxt.vel, np.zeros((2, 2)))

    def test_stated_update_rule(self):
        env = MppmrEnv(MppmrParams(timestep=0.1, damping=0.5, sensitivity=5.0))
        s = env.reset()
        nxt, _, _, _ = env.step(s, (1, 1))  # both push up
        assert np.allclose(nxt.vel, [[0.0, 0.5], [0.0, 0.5]])
        assert np.allclose(nxt.pos - s.pos, [[0.0, 0.05], [0.0, 0.05]])

    def test_out_of_bounds_terminates(self, env):
        s = env.reset()
        done = False
        for _ in range(env.horizon):
            s, _, _, done = env.step(s, (4, 4))  # both sprint right
            if done:
                break
        assert done and env.out_of_bounds(s)
        assert s.t < env.horizon

    def test_horizon_terminates(self, env):
        s = env.reset()
        for _ in range(env.horizon):
            s, _, _, done = env.step(s, (0, 0))
        assert done and s.t == env.horizon

    def test_step_after_termination_raises(self, env):
        s = env.reset()
        for _ in range(env.horizon):
            s, _, _, _ = env.step(s, (0, 0))
        with pytest.raises(RuntimeError):
            env.step(s, (0, 0))

    def test_action_names_cover_space(self, env):
        assert len(ACTION_NAMES) == env.n_actions


class TestReward:
    def test_both_on_landmark_equals_one(self, env):
        lm = env.params.landmarks[0]
        s = MppmrState(pos=np.array([lm, lm]), vel=np.zeros((2, 2)), t=0)
        assert env.reward(s) == pytest.approx(1.0)

    def test_coincident_players_off_landmark(self, env):
        p = env.params.landmarks[0] + np.array([0.3, 0.0])
        s = MppmrState(pos=np.array([p, p]), vel=np.zeros((2, 2)), t=0)
        assert env.reward(s) == pytest.approx(0.7)

    def test_straddling_a_landmark(self):
        env = MppmrEnv(MppmrParams(landmark_radius=1.0))
        # centroid on the (0, +1) landmark, players 1.0 apart
        pos = np.array([[-0.5, 1.0], [0.5, 1.0]])
        s = MppmrState(pos=pos, vel=np.zeros((2, 2)), t=0)
        assert env.reward(s) == pytest.approx(0.0)

    def test_reward_never_exceeds_one(self, env):
        rng = np.random.default_rng(0)
        for _ in range(500):
            pos = rng.uniform(-1.5, 1.5, size=(2, 2))
            s = MppmrState(pos=pos, vel=np.zeros((2, 2)), t=0)
            assert env.reward(s) <= 1.0 + 1e-12


class TestObserve:
    def test_length_is_sixteen(self, env):
        o1, o2 = env.observe(env.reset())
        assert o1.shape == (16,) and o2.shape == (16,)

    def test_identity_swap_swaps_blocks(self, env):
        rng = np.random.default_rng(1)
        s = MppmrState(pos=rng.normal(size=(2, 2)), vel=rng.normal(size=(2, 2)), t=3)
        o1, o2 = env.observe(s)
        assert np.array_equal(o1[0:4], o2[4:8])
        assert np.array_equal(o1[4:8], o2[0:4])

    def test_coincident_players_share_landmark_offsets(self, env):
        p = np.array([0.2, -0.4])
        s = MppmrState(pos=np.array([p, p]), vel=np.zeros((2, 2)), t=0)
        o1, o2 = env.observe(s)
        assert np.array_equal(o1[8:], o2[8:])
        assert np.array_equal(o1, o2)


class TestExactness:
    def test_step_is_pure(self, env):
        s = env.reset()
        pos_before = s.pos.copy()
        env.step(s, (1, 4))
        assert np.array_equal(s.pos, pos_before)

    def test_same_action_sequence_is_bit_identical(self, env):
        rng = np.random.default_rng(2)
        actions = rng.integers(0, 5, size=(20, 2))
        runs = []
        for _ in range(2):
            s = env.reset()
            hist = []
            for a in actions:
                if s.terminated:
                    break
                s, r, _, _ = env.step(s, tuple(a))
                hist.append((env.state_array(s), r))
            runs.append(hist)
        for (sa, ra), (sb, rb) in zip(*runs):
            assert np.array_equal(sa, sb) and ra == rb
