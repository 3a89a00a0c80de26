"""Trajectory collection: live self-play, cross-play, and mixed-play.

One stepping core (`run_episode`) serves live collection, the mixed-play
suffix, and exact-dynamics simulation, so a simulated rollout seeded like
a live one reproduces it float-for-float.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .nn import sample_categorical_np, softmax_np

__all__ = [
    "Step",
    "Trajectory",
    "PairController",
    "run_episode",
    "collect_episode",
    "collect_mixed_play",
    "collect_episodes_batched",
    "simulate_env",
    "MixedPlayError",
]


class MixedPlayError(RuntimeError):
    """Raised when no valid switch point can be found for mixed play."""


@dataclass
class Step:
    state: Any                      # snapshot before the transition
    obs: tuple[np.ndarray, np.ndarray]
    actions: tuple[int, int]
    reward: float
    cont: float                     # 0.0 only on the final step of a
    events: Optional[np.ndarray] = None  # terminated episode


@dataclass
class Trajectory:
    kind: str                       # SP | XP | MP | simulated
    steps: list[Step]
    final_state: Any
    seats: tuple[Optional[int], Optional[int]] = (None, None)
    partner_index: Optional[int] = None
    switch_time: Optional[int] = None
    suffix_seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def undiscounted_return(self) -> float:
        return float(sum(s.reward for s in self.steps))

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and self.steps[-1].cont == 0.0

    def states(self) -> list:
        return [s.state for s in self.steps]


class PairController:
    """Stateless joint policy: seat one samples first, then seat two,
    both from the same stream."""

    def __init__(self, policy_a, policy_b):
        self.policy_a = policy_a
        self.policy_b = policy_b

    def begin(self, env, state) -> None:
        pass

    def act(self, env, state, obs, rng) -> tuple[int, int]:
        a1 = self.policy_a.act(obs[0], rng)
        a2 = self.policy_b.act(obs[1], rng)
        return a1, a2


def run_episode(env, controller, rng, *, start_state=None, max_steps=None,
                kind: str, seats=(None, None), partner_index=None) -> Trajectory:
    """Roll the joint policy until termination or a step cap."""
    state = env.reset(rng) if start_state is None else start_state
    controller.begin(env, state)
    steps: list[Step] = []
    budget = max_steps if max_steps is not None else env.horizon
    for _ in range(budget):
        if getattr(state, "terminated", False):
            break
        obs = env.observe(state)
        actions = controller.act(env, state, obs, rng)
        nxt, reward, events, terminated = env.step(state, actions)
        steps.append(Step(state=state, obs=obs, actions=actions, reward=reward,
                          cont=0.0 if terminated else 1.0, events=events))
        state = nxt
        if terminated:
            break
    return Trajectory(kind=kind, steps=steps, final_state=state, seats=seats,
                      partner_index=partner_index)


def collect_episode(env, policy_a, policy_b, rng,
                    partner_index: Optional[int] = None) -> Trajectory:
    """One live episode; kind is SP exactly when the same policy object
    occupies both seats."""
    _check_policy(env, policy_a)
    _check_policy(env, policy_b)
    kind = "SP" if policy_a is policy_b else "XP"
    if kind == "XP" and partner_index is None:
        partner_index = getattr(policy_b, "index", None)
    seats = (getattr(policy_a, "index", None), getattr(policy_b, "index", None))
    return run_episode(env, PairController(policy_a, policy_b), rng,
                       kind=kind, seats=seats, partner_index=partner_index)


def _check_policy(env, policy) -> None:
    actor = getattr(policy, "actor", None)
    if actor is not None and actor.in_dim != env.obs_dim:
        raise ValueError(
            f"policy expects {actor.in_dim}-dim observations, "
            f"env produces {env.obs_dim}")


def collect_mixed_play(env, policy_self, policy_partner, rng,
                       max_retries: int = 20) -> Trajectory:
    """Cross-play prefix to a random switch time, then a self-play suffix.

    Only the suffix is returned; its first state is the state the
    cross-play pair reached at the switch. The suffix draws its actions
    from a dedicated seed recorded on the trajectory, so a simulated
    self-play rollout from the same state and seed reproduces it exactly.
    """
    if policy_self is policy_partner:
        raise ValueError("mixed play needs two distinct policies")
    horizon = env.horizon
    for _ in range(max_retries):
        t_star = int(rng.integers(1, horizon))
        prefix = run_episode(env, PairController(policy_self, policy_partner),
                             rng, max_steps=t_star, kind="XP")
        if prefix.terminated:
            # ended before the switch: redraw within the surviving prefix
            if len(prefix) < 2:
                continue
            t_star = int(rng.integers(1, len(prefix)))
            switch_state = prefix.steps[t_star].state
        else:
            switch_state = prefix.final_state
            t_star = len(prefix)
        suffix_seed = int(rng.integers(2 ** 63))
        suffix = run_episode(env, PairController(policy_self, policy_self),
                             np.random.default_rng(suffix_seed),
                             start_state=switch_state, kind="MP")
        return Trajectory(kind="MP", steps=suffix.steps,
                          final_state=suffix.final_state,
                          seats=(getattr(policy_self, "index", None),) * 2,
                          partner_index=getattr(policy_partner, "index", None),
                          switch_time=t_star, suffix_seed=suffix_seed)
    raise MixedPlayError(
        f"no usable switch point in {max_retries} attempts "
        "(episodes keep terminating immediately)")


def simulate_env(env, start_state, policy_a, policy_b, horizon, rng) -> Trajectory:
    """Roll the environment's own step function as a dynamics model from
    an arbitrary start state."""
    traj = run_episode(env, PairController(policy_a, policy_b), rng,
                       start_state=start_state, max_steps=horizon,
                       kind="simulated",
                       seats=(getattr(policy_a, "index", None),
                              getattr(policy_b, "index", None)))
    return traj


def collect_episodes_batched(env, pairs: Sequence[tuple], rngs: Sequence,
                             partner_indices: Optional[Sequence] = None,
                             start_states: Optional[Sequence] = None,
                             max_steps: Optional[int] = None,
                             kind: Optional[str] = None) -> list[Trajectory]:
    """Collect many episodes in lockstep, batching actor forwards.

    Each episode keeps its own RNG stream and consumes it in the same
    order as `run_episode` (seat one, then seat two), so per-episode
    determinism depends only on that episode's seed.
    """
    n = len(pairs)
    states = [env.reset(rngs[e]) if start_states is None else start_states[e]
              for e in range(n)]
    steps: list[list[Step]] = [[] for _ in range(n)]
    live = [not getattr(states[e], "terminated", False) for e in range(n)]
    budget = max_steps if max_steps is not None else env.horizon
    for _ in range(budget):
        idx = [e for e in range(n) if live[e]]
        if not idx:
            break
        all_obs = {e: env.observe(states[e]) for e in idx}
        # group actor rows by policy object to batch the matmuls
        rows: dict[int, list[tuple[int, int]]] = {}
        policies: dict[int, Any] = {}
        for e in idx:
            for seat in (0, 1):
                p = pairs[e][seat]
                rows.setdefault(id(p), []).append((e, seat))
                policies[id(p)] = p
        probs: dict[tuple[int, int], np.ndarray] = {}
        for pid, entries in rows.items():
            obs_mat = np.stack([all_obs[e][seat] for e, seat in entries])
            pr = softmax_np(policies[pid].logits(obs_mat))
            for k, (e, seat) in enumerate(entries):
                probs[(e, seat)] = pr[k]
        for e in idx:
            a1 = int(sample_categorical_np(probs[(e, 0)], rngs[e]))
            a2 = int(sample_categorical_np(probs[(e, 1)], rngs[e]))
            nxt, reward, events, terminated = env.step(states[e], (a1, a2))
            steps[e].append(Step(state=states[e], obs=all_obs[e],
                                 actions=(a1, a2), reward=reward,
                                 cont=0.0 if terminated else 1.0,
                                 events=events))
            states[e] = nxt
            if terminated:
                live[e] = False
    out = []
    for e in range(n):
        pa, pb = pairs[e]
        k = kind or ("SP" if pa is pb else "XP")
        partner = (partner_indices[e] if partner_indices is not None
                   else (getattr(pb, "index", None) if pa is not pb else None))
        out.append(Trajectory(kind=k, steps=steps[e], final_state=states[e],
                              seats=(getattr(pa, "index", None),
                                     getattr(pb, "index", None)),
                              partner_index=partner))
    return out
