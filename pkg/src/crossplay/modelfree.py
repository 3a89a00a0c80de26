"""On-policy REINFORCE trainer with centralized critics and GAE.

Implements the two live-rollout population objectives: the plain
cross-play-minimization update (maximize self-play return, minimize the
worst cross-play return) and its mixed-play augmentation (additionally
train the self-play suffix of partner-switched episodes). Both share one
optimizer core so the comparison isolates the objective.

Loss layout, as a minimization:

    L = -E_SP[log pi * A] - ent * H(SP rows) + MSE(v_j)
        + lam_xp * E_XP[log pi * A]          + MSE(v_k*)   (if partners)
        + lam_mp * -E_MP[log pi * A]         + MSE(v_j)    (mixed play)

The cross-play advantages enter negated, which is how "minimize the
cross-play return" rides the same REINFORCE machinery. Components with a
zero weight are skipped outright, so zero-weight updates are gradient-
identical to the reduced objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .agents import FrozenAgentError, PolicyAgent
from .autodiff import Graph, mlp_forward
from .nn import Adam, MlpParams
from .returns import gae_advantages
from .rollout import Trajectory, collect_episodes_batched, collect_mixed_play

__all__ = [
    "PgConfig",
    "XpmWeights",
    "PgBatch",
    "UpdateReport",
    "build_pg_batch",
    "pg_loss",
    "population_loss",
    "AgentTrainer",
    "lipo_update",
    "comedi_update",
]


@dataclass
class PgConfig:
    gamma: float = 0.99
    lam: float = 0.95
    entropy_coef: float = 1e-4
    actor_lr: float = 5e-4
    critic_lr: float = 5e-4
    grad_clip: float = 10.0
    normalize_advantages: bool = True
    hidden: tuple[int, ...] = (64, 64)
    n_sp_episodes: int = 8
    n_xp_episodes: int = 4      # per partner, seats alternating
    n_mp_episodes: int = 8


@dataclass
class XpmWeights:
    lam_xp: float = 0.0
    lam_mp: float = 0.0

    def __post_init__(self):
        if self.lam_xp < 0 or self.lam_mp < 0:
            raise ValueError("objective weights must be nonnegative")


@dataclass
class PgBatch:
    """Flattened actor/critic rows from a set of trajectories."""

    actor_obs: np.ndarray       # [R, obs_dim]
    actor_actions: np.ndarray   # [R]
    advantages: np.ndarray      # [R], normalized if requested
    critic_feats: np.ndarray    # [T, state_dim]
    value_targets: np.ndarray   # [T]
    n_steps: int
    mean_return: float

    @property
    def n_rows(self) -> int:
        return self.actor_obs.shape[0]


def build_pg_batch(env, trajs: list[Trajectory], agent: PolicyAgent,
                   critic_key: int, cfg: PgConfig,
                   normalize: Optional[bool] = None) -> PgBatch:
    """Run the critic over every trajectory, compute GAE, and gather the
    actor rows belonging to `agent`'s seats (both seats in self-play)."""
    actor_obs, actions, advs = [], [], []
    critic_feats, targets = [], []
    n_steps = 0
    for traj in trajs:
        feats = np.stack([env.state_features(s.state) for s in traj.steps]
                         + [env.state_features(traj.final_state)])
        values = agent.values(critic_key, feats)
        rewards = np.array([s.reward for s in traj.steps])
        conts = np.array([s.cont for s in traj.steps])
        adv, tgt = gae_advantages(rewards, values, conts, cfg.gamma, cfg.lam)
        critic_feats.append(feats[:-1])
        targets.append(tgt)
        n_steps += len(traj)
        for t, step in enumerate(traj.steps):
            for seat in (0, 1):
                if traj.seats[seat] == agent.index:
                    actor_obs.append(step.obs[seat])
                    actions.append(step.actions[seat])
                    advs.append(adv[t])
    advs = np.array(advs)
    do_norm = cfg.normalize_advantages if normalize is None else normalize
    if do_norm:
        advs = (advs - advs.mean()) / (advs.std() + 1e-8)
    return PgBatch(
        actor_obs=np.stack(actor_obs),
        actor_actions=np.array(actions, dtype=int),
        advantages=advs,
        critic_feats=np.concatenate(critic_feats),
        value_targets=np.concatenate(targets),
        n_steps=n_steps,
        mean_return=float(np.mean([t.undiscounted_return for t in trajs])),
    )


def _policy_term(g: Graph, actor: MlpParams, batch: PgBatch,
                 negate_advantages: bool = False):
    """-E[log pi(a|o) * adv]; returns (loss node, entropy node)."""
    logits = mlp_forward(g, actor, batch.actor_obs, actor.activation)
    logp_all = g.log_softmax(logits)
    onehot = np.zeros(logits.shape)
    onehot[np.arange(batch.n_rows), batch.actor_actions] = 1.0
    logp = g.rowsum(g.cmul(logp_all, onehot))
    adv = -batch.advantages if negate_advantages else batch.advantages
    pg = g.neg(g.mean(g.cmul(logp, adv)))
    entropy = g.neg(g.mean(g.rowsum(g.mul(g.softmax(logits), logp_all))))
    return pg, entropy

def _value_term(g: Graph, critic: MlpParams, batch: PgBatch):
    v = mlp_forward(g, critic, batch.critic_feats, critic.activation)
    v = g.reshape(v, (batch.value_targets.shape[0],))
    err = g.cadd(v, -batch.value_targets)
    return g.mean(g.mul(err, err))


def pg_loss(g: Graph, agent: PolicyAgent, batch: PgBatch, entropy_coef: float,
            critic_key: Optional[int] = None, negate_advantages: bool = False):
    """Single-batch REINFORCE loss with entropy bonus and value regression.

    Advantages arrive as constants (already detached); gradients flow only
    into the actor and, when `critic_key` is given, that one critic.
    """
    if agent.frozen:
        raise FrozenAgentError(f"agent {agent.index} is frozen")
    pg, entropy = _policy_term(g, agent.actor, batch, negate_advantages)
    loss = g.sub(pg, g.scale(entropy, entropy_coef))
    if critic_key is not None:
        loss = g.add(loss, _value_term(g, agent.critics[critic_key], batch))
    return loss, {"pg": pg.item(), "entropy": entropy.item()}


def population_loss(g: Graph, agent: PolicyAgent, weights: XpmWeights,
                    entropy_coef: float,
                    sp_batch: PgBatch, sp_key: int,
                    xp_batch: Optional[PgBatch] = None,
                    xp_key: Optional[int] = None,
                    mp_batch: Optional[PgBatch] = None):
    """Composite objective over SP / XP / MP component batches.

    Zero-weight or absent components contribute nothing, including their
    value-regression terms.
    """
    if agent.frozen:
        raise FrozenAgentError(f"agent {agent.index} is frozen")
    sp_pg, entropy = _policy_term(g, agent.actor, sp_batch)
    loss = g.sub(sp_pg, g.scale(entropy, entropy_coef))
    loss = g.add(loss, _value_term(g, agent.critics[sp_key], sp_batch))
    parts = {"sp_pg": sp_pg.item(), "entropy": entropy.item()}
    if xp_batch is not None and weights.lam_xp > 0.0:
        xp_pg, _ = _policy_term(g, agent.actor, xp_batch, negate_advantages=True)
        loss = g.add(loss, g.scale(xp_pg, weights.lam_xp))
        loss = g.add(loss, _value_term(g, agent.critics[xp_key], xp_batch))
        parts["xp_pg"] = xp_pg.item()
    if mp_batch is not None and weights.lam_mp > 0.0:
        mp_pg, _ = _policy_term(g, agent.actor, mp_batch)
        loss = g.add(loss, g.scale(mp_pg, weights.lam_mp))
        loss = g.add(loss, _value_term(g, agent.critics[sp_key], mp_batch))
        parts["mp_pg"] = mp_pg.item()
    parts["total"] = loss.item()
    return loss, parts


@dataclass
class UpdateReport:
    sp_return: float
    xp_returns: dict[int, float] = field(default_factory=dict)
    mp_return: Optional[float] = None
    k_star: Optional[int] = None
    real_steps: int = 0
    sim_steps: int = 0
    entropy: float = 0.0
    grad_norm: float = 0.0
    loss_parts: dict[str, float] = field(default_factory=dict)


class AgentTrainer:
    """Owns the optimizers for one trainable agent."""

    def __init__(self, env, agent: PolicyAgent, cfg: PgConfig,
                 critic_rng: np.random.Generator):
        if agent.frozen:
            raise FrozenAgentError(f"agent {agent.index} is frozen")
        self.env = env
        self.agent = agent
        self.cfg = cfg
        self._critic_rng = critic_rng
        agent.ensure_critic(agent.index, critic_rng, env.state_dim, list(cfg.hidden))
        self.adam_actor = Adam(agent.actor.tensors(), lr=cfg.actor_lr,
                               clip_norm=cfg.grad_clip)
        self.adam_critics: dict[int, Adam] = {}
        self._critic_opt(agent.index)

    def _critic_opt(self, key: int) -> Adam:
        if key not in self.adam_critics:
            critic = self.agent.ensure_critic(key, self._critic_rng,
                                              self.env.state_dim,
                                              list(self.cfg.hidden))
            self.adam_critics[key] = Adam(critic.tensors(), lr=self.cfg.critic_lr,
                                          clip_norm=self.cfg.grad_clip)
        return self.adam_critics[key]

    def apply(self, g: Graph, loss, critic_keys: list[int]) -> float:
        g.backward(loss)
        norm = self.adam_actor.step([g.grad(t) for t in self.agent.actor.tensors()])
        for key in critic_keys:
            opt = self._critic_opt(key)
            opt.step([g.grad(t) for t in self.agent.critics[key].tensors()])
        return norm


def _collect_sp(env, agent, n, rng):
    rngs = [np.random.default_rng(rng.integers(2 ** 63)) for _ in range(n)]
    return collect_episodes_batched(env, [(agent, agent)] * n, rngs)


def _collect_xp(env, agent, partner, n, rng):
    """Alternate seats so the symmetric cross-play return is estimated."""
    pairs = [(agent, partner) if e % 2 == 0 else (partner, agent)
             for e in range(n)]
    rngs = [np.random.default_rng(rng.integers(2 ** 63)) for _ in range(n)]
    return collect_episodes_batched(env, pairs, rngs,
                                    partner_indices=[partner.index] * n)


def _fresh_xp_sweep(trainer, population, rng):
    """Sample cross-play episodes against every partner; return them plus
    the partner with the highest mean sampled return."""
    env, cfg, agent = trainer.env, trainer.cfg, trainer.agent
    xp_trajs: dict[int, list[Trajectory]] = {}
    xp_returns: dict[int, float] = {}
    for partner in population:
        trajs = _collect_xp(env, agent, partner, cfg.n_xp_episodes, rng)
        xp_trajs[partner.index] = trajs
        xp_returns[partner.index] = float(
            np.mean([t.undiscounted_return for t in trajs]))
    k_star = min((k for k in xp_returns),
                 key=lambda k: (-xp_returns[k], k))
    return xp_trajs, xp_returns, k_star


def lipo_update(trainer: AgentTrainer, population: list[PolicyAgent],
                weights: XpmWeights, rng: np.random.Generator) -> UpdateReport:
    """One update of: maximize SP return, minimize the max-partner XP
    return. With an empty population this is plain self-play REINFORCE."""
    env, cfg, agent = trainer.env, trainer.cfg, trainer.agent
    sp_trajs = _collect_sp(env, agent, cfg.n_sp_episodes, rng)
    real_steps = sum(len(t) for t in sp_trajs)

    xp_batch = xp_key = k_star = None
    xp_returns: dict[int, float] = {}
    if population:
        xp_trajs, xp_returns, k_star = _fresh_xp_sweep(trainer, population, rng)
        real_steps += sum(len(t) for ts in xp_trajs.values() for t in ts)
        trainer._critic_opt(k_star)
        xp_batch = build_pg_batch(env, xp_trajs[k_star], agent, k_star, cfg)
        xp_key = k_star

    sp_batch = build_pg_batch(env, sp_trajs, agent, agent.index, cfg)
    g = Graph()
    loss, parts = population_loss(g, agent, weights, cfg.entropy_coef,
                                  sp_batch, agent.index, xp_batch, xp_key)
    keys = [agent.index] + ([k_star] if xp_batch is not None else [])
    norm = trainer.apply(g, loss, keys)
    return UpdateReport(sp_return=sp_batch.mean_return, xp_returns=xp_returns,
                        k_star=k_star, real_steps=real_steps,
                        entropy=parts["entropy"], grad_norm=norm,
                        loss_parts=parts)


def comedi_update(trainer: AgentTrainer, population: list[PolicyAgent],
                  weights: XpmWeights, rng: np.random.Generator) -> UpdateReport:
    """The mixed-play-augmented update: self-play suffixes of episodes that
    started as cross-play are trained toward the self-play objective."""
    env, cfg, agent = trainer.env, trainer.cfg, trainer.agent
    sp_trajs = _collect_sp(env, agent, cfg.n_sp_episodes, rng)
    real_steps = sum(len(t) for t in sp_trajs)

    xp_batch = xp_key = k_star = mp_batch = None
    mp_return = None
    xp_returns: dict[int, float] = {}
    if population:
        xp_trajs, xp_returns, k_star = _fresh_xp_sweep(trainer, population, rng)
        real_steps += sum(len(t) for ts in xp_trajs.values() for t in ts)
        trainer._critic_opt(k_star)
        xp_batch = build_pg_batch(env, xp_trajs[k_star], agent, k_star, cfg)
        xp_key = k_star
        partner = next(p for p in population if p.index == k_star)
        mp_trajs = []
        for _ in range(cfg.n_mp_episodes):
            mp = collect_mixed_play(env, agent, partner,
                                    np.random.default_rng(rng.integers(2 ** 63)))
            mp_trajs.append(mp)
            # the discarded prefix consumed real environment steps too
            real_steps += mp.switch_time + len(mp)
        mp_batch = build_pg_batch(env, mp_trajs, agent, agent.index, cfg)
        mp_return = mp_batch.mean_return

    sp_batch = build_pg_batch(env, sp_trajs, agent, agent.index, cfg)
    g = Graph()
    loss, parts = population_loss(g, agent, weights, cfg.entropy_coef,
                                  sp_batch, agent.index, xp_batch, xp_key,
                                  mp_batch)
    keys = [agent.index] + ([k_star] if xp_batch is not None else [])
    norm = trainer.apply(g, loss, keys)
    return UpdateReport(sp_return=sp_batch.mean_return, xp_returns=xp_returns,
                        mp_return=mp_return, k_star=k_star,
                        real_steps=real_steps, entropy=parts["entropy"],
                        grad_norm=norm, loss_parts=parts)
