"""Two-particle rendezvous arena with exact linear dynamics.

Both players steer point masses toward a shared landmark; the joint reward
prefers the pair being close together and close to the nearest landmark.
The episode ends early if either particle leaves the square arena, which
is what makes deliberate episode destruction ("run out of bounds")
observable as early termination.

Because the step function is closed-form, the very same function doubles
as the forward dynamics model for simulated rollouts: simulated and live
trajectories under identical seeds are bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = ["MppmrParams", "MppmrState", "MppmrAction", "MppmrEnv", "ACTION_NAMES"]

ACTION_NAMES = ("stay", "up", "down", "left", "right")

_ACTION_VECTORS = np.array([
    [0.0, 0.0],   # stay
    [0.0, 1.0],   # up
    [0.0, -1.0],  # down
    [-1.0, 0.0],  # left
    [1.0, 0.0],   # right
])


@dataclass(frozen=True)
class MppmrParams:
    timestep: float = 0.1
    damping: float = 0.25
    sensitivity: float = 5.0
    bound: float = 1.5                      # half-width of the square arena
    landmark_radius: float = 1.0
    horizon: int = 50
    start_offset: float = 0.3

    @property
    def landmarks(self) -> np.ndarray:
        d = self.landmark_radius
        return np.array([[d, 0.0], [-d, 0.0], [0.0, d], [0.0, -d]])


@dataclass(frozen=True)
class MppmrState:
    pos: np.ndarray       # [2, 2] player positions
    vel: np.ndarray       # [2, 2] player velocities
    t: int
    terminated: bool = False

    def copy(self) -> "MppmrState":
        return MppmrState(self.pos.copy(), self.vel.copy(), self.t, self.terminated)


MppmrAction = int  # index into ACTION_NAMES


class MppmrEnv:
    """Deterministic two-player point-mass arena."""

    n_actions = 5
    obs_dim = 16           # own pos/vel, partner pos/vel, 4 landmark offsets
    has_events = False
    supports_early_termination = True

    def __init__(self, params: Optional[MppmrParams] = None):
        self.params = params or MppmrParams()

    @property
    def horizon(self) -> int:
        return self.params.horizon

    @property
    def state_dim(self) -> int:
        return 2 * self.obs_dim + 1

    def reset(self, rng=None) -> MppmrState:
        d = self.params.start_offset
        pos = np.array([[-d, 0.0], [d, 0.0]])
        vel = np.zeros((2, 2))
        return MppmrState(pos=pos, vel=vel, t=0)

    def reward(self, state: MppmrState) -> float:
        centroid = state.pos.mean(axis=0)
        lm_dist = np.linalg.norm(self.params.landmarks - centroid, axis=1).min()
        gap = np.linalg.norm(state.pos[0] - state.pos[1])
        return float(1.0 - lm_dist - gap)

    def out_of_bounds(self, state: MppmrState) -> bool:
        return bool(np.any(np.abs(state.pos) > self.params.bound))

    def step(self, state: MppmrState, actions) -> tuple[MppmrState, float, None, bool]:
        """Advance one tick. Returns (state', reward, events, terminated)."""
        if state.terminated:
            raise RuntimeError("cannot step a terminated episode")
        if state.t >= self.params.horizon:
            raise RuntimeError("cannot step past the horizon")
        p = self.params
        a = np.asarray(actions, dtype=int)
        if a.shape != (2,) or np.any(a < 0) or np.any(a >= self.n_actions):
            raise ValueError(f"bad joint action {actions!r}")
        force = p.sensitivity * _ACTION_VECTORS[a]
        vel = state.vel * (1.0 - p.damping) + force * p.timestep
        pos = state.pos + vel * p.timestep
        t_next = state.t + 1
        nxt = MppmrState(pos=pos, vel=vel, t=t_next)
        terminated = self.out_of_bounds(nxt) or t_next == p.horizon
        nxt = replace(nxt, terminated=terminated)
        return nxt, self.reward(nxt), None, terminated

    def observe(self, state: MppmrState) -> tuple[np.ndarray, np.ndarray]:
        """Per-player view: own pos/vel, partner pos/vel, landmark offsets
        from self. Swapping player identities swaps the own/partner blocks."""
        obs = []
        for i in (0, 1):
            j = 1 - i
            offsets = (self.params.landmarks - state.pos[i]).reshape(-1)
            obs.append(np.concatenate([
                state.pos[i], state.vel[i], state.pos[j], state.vel[j], offsets,
            ]))
        return obs[0], obs[1]

    def state_features(self, state: MppmrState) -> np.ndarray:
        """Centralized-critic features: both observations plus phase."""
        o1, o2 = self.observe(state)
        return np.concatenate([o1, o2, [state.t / self.params.horizon]])

    def state_array(self, state: MppmrState) -> np.ndarray:
        """Canonical numeric encoding, used for exact trajectory comparison."""
        return np.concatenate([state.pos.reshape(-1), state.vel.reshape(-1),
                               [float(state.t), float(state.terminated)]])


# -- artifact emitters -------------------------------------------------------

def trajectory_csv(env: MppmrEnv, traj, path) -> None:
    """Dump (t, p1x, p1y, p2x, p2y, reward, terminated) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "p1x", "p1y", "p2x", "p2y", "reward", "terminated"])
        for step in traj.steps:
            s = step.state
            writer.writerow([s.t,
                             f"{s.pos[0, 0]:.6f}", f"{s.pos[0, 1]:.6f}",
                             f"{s.pos[1, 0]:.6f}", f"{s.pos[1, 1]:.6f}",
                             f"{step.reward:.6f}", int(step.cont == 0.0)])
        s = traj.final_state
        writer.writerow([s.t,
                         f"{s.pos[0, 0]:.6f}", f"{s.pos[0, 1]:.6f}",
                         f"{s.pos[1, 0]:.6f}", f"{s.pos[1, 1]:.6f}",
                         "", int(s.terminated)])


def trajectory_svg(env: MppmrEnv, trajs, path, size: int = 360) -> None:
    """Render player paths and landmarks for one or more trajectories."""
    from ..svg import SvgCanvas

    bound = env.params.bound * 1.1
    canvas = SvgCanvas(size, size, (-bound, bound))
    canvas.rect(-env.params.bound, -env.params.bound,
                2 * env.params.bound, 2 * env.params.bound,
                fill="none", stroke="#888")
    for lm in env.params.landmarks:
        canvas.circle(lm[0], lm[1], 0.06, fill="#4477cc")
    colors = [("#cc3333", "#ee9999"), ("#33aa33", "#99dd99")]
    for k, traj in enumerate(trajs if isinstance(trajs, (list, tuple)) else [trajs]):
        states = [s.state for s in traj.steps] + [traj.final_state]
        for i in (0, 1):
            pts = [(st.pos[i, 0], st.pos[i, 1]) for st in states]
            canvas.polyline(pts, stroke=colors[k % 2][i], width=0.02)
            canvas.circle(pts[0][0], pts[0][1], 0.035, fill=colors[k % 2][i])
    canvas.write(path)
