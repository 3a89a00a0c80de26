"""Two-player recurrent state-space world model.

A GRU carries a deterministic state h conditioned on both players' last
actions; a categorical latent z sits on top, partitioned into a joint
block and one block per player, so each player's decoder (and actor) only
reads the slices that player should condition on. Heads predict per-player
observation vectors, a Bernoulli event vector (whose fixed linear readout
is the scalar reward), and episode continuation.

Training teacher-forces stored trajectories under the reconstruction /
event / continue log-losses plus a balanced, floored posterior-prior KL.
When the model is fine-tuned during the training of a later population
member, an anchor KL pins its posterior to the frozen snapshot left by
the previous member, so frozen partners keep seeing familiar latents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import Graph, Node, Tensor, categorical_sample_st, gru_step, \
    kl_categorical_rows, mlp_forward
from .nn import GruParams, MlpParams, gru_np, init_gru, init_mlp, mlp_np, \
    sample_categorical_np, softmax_np

__all__ = [
    "LatentLayout",
    "RssmConfig",
    "RssmParams",
    "RSSMState",
    "WmLossConfig",
    "SeqBatch",
    "init_rssm",
    "rssm_observe",
    "wm_loss",
    "wm_anchor_loss",
    "filter_states_np",
    "rssm_imagine",
    "ImaginedRollout",
]


@dataclass(frozen=True)
class LatentLayout:
    """Partition of the categorical latent into joint and per-player blocks."""

    n_dists: int
    n_joint: int
    n_classes: int

    def __post_init__(self):
        if self.n_dists <= self.n_joint:
            raise ValueError("need more distributions than joint ones")
        if (self.n_dists - self.n_joint) % 2 != 0:
            raise ValueError("player-specific distributions must split evenly")

    @property
    def per_player(self) -> int:
        return (self.n_dists - self.n_joint) // 2

    @property
    def z_dim(self) -> int:
        return self.n_dists * self.n_classes

    @property
    def player_z_dim(self) -> int:
        return (self.n_joint + self.per_player) * self.n_classes

    def player_cols(self, player: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Column ranges (joint block, own block) in the flattened latent."""
        c = self.n_classes
        joint = (0, self.n_joint * c)
        start = (self.n_joint + player * self.per_player) * c
        own = (start, start + self.per_player * c)
        return joint, own

    def player_slice_np(self, z_flat: np.ndarray, player: int) -> np.ndarray:
        (j0, j1), (o0, o1) = self.player_cols(player)
        return np.concatenate([z_flat[..., j0:j1], z_flat[..., o0:o1]], axis=-1)


@dataclass(frozen=True)
class RssmConfig:
    layout: LatentLayout
    obs_dim: int              # per player
    n_actions: int
    n_events: int
    event_weights: tuple[float, ...]
    h_dim: int = 64
    mlp_width: int = 64
    enc_layers: int = 2
    dec_layers: int = 2
    head_layers: int = 2
    unimix: float = 0.01

    @property
    def gru_in_dim(self) -> int:
        return self.layout.z_dim + 2 * self.n_actions

    @property
    def actor_in_dim(self) -> int:
        # actors read the recurrent state alongside their latent slice
        return self.h_dim + self.layout.player_z_dim

    @property
    def critic_in_dim(self) -> int:
        return self.h_dim + self.layout.z_dim


@dataclass
class RssmParams:
    gru: GruParams
    encoder: MlpParams
    prior: MlpParams
    dec1: MlpParams
    dec2: MlpParams
    reward: MlpParams
    cont: MlpParams

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        named = [("gru.wx", self.gru.wx), ("gru.wh", self.gru.wh),
                 ("gru.b", self.gru.b)]
        for part in ("encoder", "prior", "dec1", "dec2", "reward", "cont"):
            mlp: MlpParams = getattr(self, part)
            for i, (w, b) in enumerate(mlp.layers):
                named.append((f"{part}.{i}.w", w))
                named.append((f"{part}.{i}.b", b))
        return named

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors()]

    def checksum(self) -> str:
        import hashlib
        digest = hashlib.sha256()
        for name, t in self.named_tensors():
            digest.update(name.encode())
            digest.update(t.tobytes())
        return digest.hexdigest()

    def clone(self) -> "RssmParams":
        import copy

        def cp(mlp: MlpParams) -> MlpParams:
            return MlpParams([(w.copy(), b.copy()) for w, b in mlp.layers],
                             activation=mlp.activation)

        return RssmParams(
            gru=GruParams(self.gru.wx.copy(), self.gru.wh.copy(), self.gru.b.copy()),
            encoder=cp(self.encoder), prior=cp(self.prior),
            dec1=cp(self.dec1), dec2=cp(self.dec2),
            reward=cp(self.reward), cont=cp(self.cont))


@dataclass(frozen=True)
class RSSMState:
    h: np.ndarray        # [h_dim]
    z: np.ndarray        # [z_dim] flattened one-hot rows


@dataclass
class WmLossConfig:
    beta: float = 1.0
    free_nats: float = 1.0
    kl_balance: tuple[float, float] = (0.5, 0.1)   # (toward prior, toward posterior)
    anchor_coef: float = 1.0

    def __post_init__(self):
        if self.beta < 0 or self.free_nats < 0 or self.anchor_coef < 0 \
                or min(self.kl_balance) < 0:
            raise ValueError("loss weights must be nonnegative")


def init_rssm(rng: np.random.Generator, cfg: RssmConfig) -> RssmParams:
    lay = cfg.layout
    w = cfg.mlp_width

    def mlp(in_dim, out_dim, n_layers):
        sizes = [in_dim] + [w] * (n_layers - 1) + [out_dim]
        return init_mlp(rng, sizes)

    return RssmParams(
        gru=init_gru(rng, cfg.gru_in_dim, cfg.h_dim),
        encoder=mlp(cfg.h_dim + 2 * cfg.obs_dim, lay.z_dim, cfg.enc_layers),
        prior=mlp(cfg.h_dim, lay.z_dim, cfg.enc_layers),
        dec1=mlp(cfg.h_dim + lay.player_z_dim, cfg.obs_dim, cfg.dec_layers),
        dec2=mlp(cfg.h_dim + lay.player_z_dim, cfg.obs_dim, cfg.dec_layers),
        reward=mlp(cfg.h_dim + lay.z_dim, cfg.n_events, cfg.head_layers),
        cont=mlp(cfg.h_dim + lay.z_dim, 1, cfg.head_layers),
    )


# -- graph-side building blocks ---------------------------------------------

def _onehot(indices: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((len(indices), n))
    out[np.arange(len(indices)), np.asarray(indices, dtype=int)] = 1.0
    return out


def _core_step(g: Graph, params: RssmParams, cfg: RssmConfig,
               h_prev, z_prev_flat, a_onehots: np.ndarray) -> Node:
    x = g.concat([z_prev_flat, g.constant(a_onehots)], axis=1)
    return gru_step(g, params.gru, h_prev, x)


def _player_slice(g: Graph, cfg: RssmConfig, z_flat, player: int):
    (j0, j1), (o0, o1) = cfg.layout.player_cols(player)
    return g.concat([g.slice_cols(z_flat, j0, j1),
                     g.slice_cols(z_flat, o0, o1)], axis=1)


def _sample_block(g: Graph, cfg: RssmConfig, logits, rng, uniforms=None,
                  soft: bool = False):
    """[B, z_dim] logits -> straight-through one-hot sample, flat again.

    `soft` swaps the one-hot draw for the mixed probabilities themselves;
    the backward path is identical (that is what straight-through means),
    which makes composite losses finite-difference checkable."""
    b = logits.shape[0]
    lay = cfg.layout
    rows = g.reshape(logits, (b * lay.n_dists, lay.n_classes))
    if soft:
        probs = _graph_mixed_probs(g, rows, cfg.unimix)
        return g.reshape(probs, (b, lay.z_dim)), None
    block = categorical_sample_st(g, rows, rng, unimix=cfg.unimix,
                                  uniforms=uniforms)
    return g.reshape(block.sample, (b, lay.z_dim)), block


def _graph_mixed_probs(g: Graph, logits, unimix: float):
    probs = g.softmax(logits)
    if unimix > 0.0:
        n = probs.shape[-1]
        probs = g.cadd(g.scale(probs, 1.0 - unimix),
                       np.full(probs.shape, unimix / n))
    return probs


def rssm_observe(g: Graph, params: RssmParams, cfg: RssmConfig,
                 h_prev, z_prev_flat, actions: np.ndarray,
                 obs_pair: np.ndarray, rng, uniforms=None,
                 soft_latents: bool = False):
    """One posterior step over a batch.

    actions: [B, 2] int; obs_pair: [B, 2, obs_dim]. Returns a dict with the
    new recurrent state, sampled posterior, prior logits, and all heads.
    Decoders read only their player's latent slice.
    """
    b = actions.shape[0]
    a_oh = np.concatenate([_onehot(actions[:, 0], cfg.n_actions),
                           _onehot(actions[:, 1], cfg.n_actions)], axis=1)
    h = _core_step(g, params, cfg, h_prev, z_prev_flat, a_oh)
    obs_flat = np.concatenate([obs_pair[:, 0], obs_pair[:, 1]], axis=1)
    enc_in = g.concat([h, g.constant(obs_flat)], axis=1)
    post_logits = mlp_forward(g, params.encoder, enc_in)
    z, block = _sample_block(g, cfg, post_logits, rng, uniforms,
                             soft=soft_latents)
    prior_logits = mlp_forward(g, params.prior, h)
    heads = {
        "obs1": mlp_forward(g, params.dec1,
                            g.concat([h, _player_slice(g, cfg, z, 0)], axis=1)),
        "obs2": mlp_forward(g, params.dec2,
                            g.concat([h, _player_slice(g, cfg, z, 1)], axis=1)),
        "reward_logits": mlp_forward(g, params.reward, g.concat([h, z], axis=1)),
        "cont_logit": mlp_forward(g, params.cont, g.concat([h, z], axis=1)),
    }
    return {"h": h, "z": z, "post_logits": post_logits,
            "prior_logits": prior_logits, "heads": heads, "block": block}


def _mixed_log_probs(g: Graph, logits, unimix: float):
    probs = g.softmax(logits)
    if unimix > 0.0:
        n = probs.shape[-1]
        probs = g.cadd(g.scale(probs, 1.0 - unimix), np.full(probs.shape, unimix / n))
    return g.log(probs)


def _bce_rows(g: Graph, logits, targets: np.ndarray):
    """Bernoulli negative log-likelihood, summed over the last axis."""
    # softplus(l) - y*l  ==  -log p(y|l)
    per = g.sub(g.softplus(logits), g.cmul(logits, targets))
    return g.rowsum(per) if per.ndim == 2 else per


@dataclass
class SeqBatch:
    """Teacher-forcing windows cut from stored trajectories.

    obs: [B, L, 2, obs_dim]; actions: [B, L, 2] (the action taken at each
    step); events: [B, L, n_events]; conts: [B, L]. The reward and
    continue heads at model step t >= 1 predict the transition that led
    into t, i.e. events[:, t-1] and conts[:, t-1].
    """

    obs: np.ndarray
    actions: np.ndarray
    events: np.ndarray
    conts: np.ndarray

    @property
    def batch(self) -> int:
        return self.obs.shape[0]

    @property
    def length(self) -> int:
        return self.obs.shape[1]


def _teacher_force(g: Graph, params: RssmParams, cfg: RssmConfig,
                   batch: SeqBatch, rng, shared_uniforms=None,
                   soft_latents: bool = False):
    """Unroll the posterior chain over a window; returns per-step dicts."""
    b, length = batch.batch, batch.length
    h = g.constant(np.zeros((b, cfg.h_dim)))
    z = g.constant(np.zeros((b, cfg.layout.z_dim)))
    zero_actions = np.zeros((b, 2), dtype=int)
    steps = []
    for t in range(length):
        actions = zero_actions if t == 0 else batch.actions[:, t - 1]
        uni = None if shared_uniforms is None else shared_uniforms[t]
        out = rssm_observe(g, params, cfg, h, z, actions, batch.obs[:, t],
                           rng, uniforms=uni, soft_latents=soft_latents)
        h, z = out["h"], out["z"]
        steps.append(out)
    return steps


def wm_loss(g: Graph, params: RssmParams, cfg: RssmConfig, wcfg: WmLossConfig,
            batch: SeqBatch, rng, soft_latents: bool = False):
    """Eq-style world-model loss over a window batch.

    Components (each a per-step batch mean) sum exactly to the total:
    recon1, recon2, reward, cont, kl. The KL is balanced between a
    stop-posterior term that trains the prior and a stop-prior term that
    trains the posterior, with a per-distribution floor below which it
    contributes a constant.
    """
    if batch.conts is None:
        raise ValueError("sequence batch lacks continue flags")
    steps = _teacher_force(g, params, cfg, batch, rng,
                           soft_latents=soft_latents)
    total, parts = _loss_over_chain(g, params, cfg, wcfg, batch, steps)
    parts = dict(parts)
    parts["total"] = total.item()
    return total, parts


def sum_nodes(g: Graph, nodes: Sequence[Node]) -> Node:
    total = nodes[0]
    for n in nodes[1:]:
        total = g.add(total, n)
    return total


def wm_anchor_loss(g: Graph, params: RssmParams, frozen: RssmParams,
                   cfg: RssmConfig, wcfg: WmLossConfig, batch: SeqBatch,
                   rng, soft_latents: bool = False):
    """World-model loss plus a KL pinning the current posterior to the
    frozen snapshot's posterior on the same (cross-play) windows.

    The frozen chain is evaluated outside the graph, so no gradient can
    reach it. Both chains consume identical uniform draws: if the two
    parameter sets are equal, their sampled latents coincide and the
    anchor term is exactly zero.
    """
    if frozen is None:
        raise ValueError("anchor loss needs the frozen predecessor snapshot")
    b, length = batch.batch, batch.length
    lay = cfg.layout
    uniforms = [rng.random(b * lay.n_dists) for _ in range(length)]
    frozen_lp = _frozen_posterior_log_probs_np(frozen, cfg, batch, uniforms,
                                               soft=soft_latents)
    steps = _teacher_force(g, params, cfg, batch,
                           np.random.default_rng(0), shared_uniforms=uniforms,
                           soft_latents=soft_latents)
    anchor_rows = []
    for t, out in enumerate(steps):
        post_rows = g.reshape(out["post_logits"], (b * lay.n_dists, lay.n_classes))
        post_lp = _mixed_log_probs(g, post_rows, cfg.unimix)
        anchor_rows.append(g.sum(kl_categorical_rows(g, post_lp,
                                                     g.constant(frozen_lp[t]),
                                                     "none")))
    anchor = g.scale(sum_nodes(g, anchor_rows), 1.0 / (b * length))
    # rebuild the base loss on the same windows and uniforms
    base, parts = _loss_over_chain(g, params, cfg, wcfg, batch, steps)
    total = g.add(base, g.scale(anchor, wcfg.anchor_coef))
    parts = dict(parts)
    parts["anchor"] = anchor.item()
    parts["total"] = total.item()
    return total, parts


def _loss_over_chain(g, params, cfg, wcfg, batch, steps):
    """Loss components over an already-unrolled posterior chain."""
    b, length = batch.batch, batch.length
    lay = cfg.layout
    dyn_w, rep_w = wcfg.kl_balance
    recon = [[], []]
    kls, reward_terms, cont_terms = [], [], []
    for t, out in enumerate(steps):
        for i, key in enumerate(("obs1", "obs2")):
            err = g.cadd(out["heads"][key], -batch.obs[:, t, i])
            recon[i].append(g.scale(g.rowsum(g.mul(err, err)), 0.5))
        post_rows = g.reshape(out["post_logits"], (b * lay.n_dists, lay.n_classes))
        prior_rows = g.reshape(out["prior_logits"], (b * lay.n_dists, lay.n_classes))
        post_lp = _mixed_log_probs(g, post_rows, cfg.unimix)
        prior_lp = _mixed_log_probs(g, prior_rows, cfg.unimix)
        balanced = g.add(
            g.scale(kl_categorical_rows(g, post_lp, prior_lp, "p"), dyn_w),
            g.scale(kl_categorical_rows(g, post_lp, prior_lp, "q"), rep_w))
        kls.append(g.sum(g.maximum_const(balanced, wcfg.free_nats)))
        if t >= 1:
            reward_terms.append(_bce_rows(g, out["heads"]["reward_logits"],
                                          batch.events[:, t - 1]))
            cont_terms.append(_bce_rows(g, out["heads"]["cont_logit"],
                                        batch.conts[:, t - 1:t]))

    def mean_of(nodes, rows):
        return g.scale(g.sum(g.concat(nodes, axis=0)), 1.0 / rows)

    recon1 = mean_of(recon[0], b * length)
    recon2 = mean_of(recon[1], b * length)
    reward = mean_of(reward_terms, b * (length - 1))
    cont = mean_of(cont_terms, b * (length - 1))
    kl = g.scale(sum_nodes(g, kls), wcfg.beta / (b * length))
    total = g.add(g.add(g.add(g.add(recon1, recon2), reward), cont), kl)
    parts = {"recon1": recon1.item(), "recon2": recon2.item(),
             "reward": reward.item(), "cont": cont.item(), "kl": kl.item()}
    return total, parts


def _frozen_posterior_log_probs_np(frozen: RssmParams, cfg: RssmConfig,
                                   batch: SeqBatch, uniforms,
                                   soft: bool = False) -> list[np.ndarray]:
    """Posterior mixed log-probs per step of the frozen chain (numpy)."""
    b, length = batch.batch, batch.length
    lay = cfg.layout
    h = np.zeros((b, cfg.h_dim))
    z = np.zeros((b, lay.z_dim))
    out = []
    for t in range(length):
        actions = np.zeros((b, 2), dtype=int) if t == 0 else batch.actions[:, t - 1]
        a_oh = np.concatenate([_onehot(actions[:, 0], cfg.n_actions),
                               _onehot(actions[:, 1], cfg.n_actions)], axis=1)
        h = gru_np(frozen.gru, h, np.concatenate([z, a_oh], axis=1))
        obs_flat = np.concatenate([batch.obs[:, t, 0], batch.obs[:, t, 1]], axis=1)
        logits = mlp_np(frozen.encoder, np.concatenate([h, obs_flat], axis=1))
        rows = logits.reshape(b * lay.n_dists, lay.n_classes)
        probs = softmax_np(rows, unimix=cfg.unimix)
        out.append(np.log(probs))
        if soft:
            z = probs.reshape(b, lay.z_dim)
            continue
        # draw the shared uniforms to sample the frozen chain's latent
        cdf = np.cumsum(probs, axis=1)
        idx = (uniforms[t][:, None] >= cdf).sum(axis=1)
        idx = np.minimum(idx, lay.n_classes - 1)
        onehot = np.zeros_like(probs)
        onehot[np.arange(rows.shape[0]), idx] = 1.0
        z = onehot.reshape(b, lay.z_dim)
    return out


# -- filtering and imagination (numpy fast paths) -----------------------------

def filter_states_np(params: RssmParams, cfg: RssmConfig,
                     prefixes: list[tuple[np.ndarray, np.ndarray]],
                     rng) -> list[RSSMState]:
    """Posterior state after teacher-forcing each observation prefix.

    Each prefix is (obs [T, 2, obs_dim], actions [T-1, 2]); ragged lengths
    are run in lockstep with per-row freezing at their own final step.
    """
    n = len(prefixes)
    lengths = [p[0].shape[0] for p in prefixes]
    max_len = max(lengths)
    lay = cfg.layout
    h = np.zeros((n, cfg.h_dim))
    z = np.zeros((n, lay.z_dim))
    done_h = [None] * n
    done_z = [None] * n
    for t in range(max_len):
        obs_flat = np.zeros((n, 2 * cfg.obs_dim))
        actions = np.zeros((n, 2), dtype=int)
        for r, (obs_seq, act_seq) in enumerate(prefixes):
            tt = min(t, lengths[r] - 1)
            obs_flat[r] = np.concatenate([obs_seq[tt, 0], obs_seq[tt, 1]])
            if t >= 1:
                actions[r] = act_seq[min(t - 1, lengths[r] - 2)] \
                    if lengths[r] > 1 else 0
        a_oh = np.concatenate([_onehot(actions[:, 0], cfg.n_actions),
                               _onehot(actions[:, 1], cfg.n_actions)], axis=1)
        h = gru_np(params.gru, h, np.concatenate([z, a_oh], axis=1))
        logits = mlp_np(params.encoder, np.concatenate([h, obs_flat], axis=1))
        rows = logits.reshape(n * lay.n_dists, lay.n_classes)
        probs = softmax_np(rows, unimix=cfg.unimix)
        u = rng.random(n * lay.n_dists)
        cdf = np.cumsum(probs, axis=1)
        idx = np.minimum((u[:, None] >= cdf).sum(axis=1), lay.n_classes - 1)
        onehot = np.zeros_like(probs)
        onehot[np.arange(rows.shape[0]), idx] = 1.0
        z = onehot.reshape(n, lay.z_dim)
        for r in range(n):
            if t == lengths[r] - 1:
                done_h[r] = h[r].copy()
                done_z[r] = z[r].copy()
    return [RSSMState(h=done_h[r], z=done_z[r]) for r in range(n)]


@dataclass
class ImaginedRollout:
    """Latent-space rollout; features are constants for the actor/critic."""

    actor_feats: np.ndarray    # [B, T, 2, actor_in_dim]
    critic_feats: np.ndarray   # [B, T+1, critic_in_dim]
    actions: np.ndarray        # [B, T, 2]
    rewards: np.ndarray        # [B, T]
    continues: np.ndarray      # [B, T] predicted continuation, in (0,1)
    event_probs: np.ndarray    # [B, T, n_events]

    @property
    def batch(self) -> int:
        return self.actions.shape[0]

    @property
    def length(self) -> int:
        return self.actions.shape[1]


def rssm_imagine(params: RssmParams, cfg: RssmConfig,
                 starts: list[RSSMState], actors, horizon: int, rng,
                 sample_rewards: bool = False) -> ImaginedRollout:
    """Closed-loop rollout from posterior states using the prior only.

    `actors` is a pair of policies (seat 0, seat 1) acting on
    [h, z^player] features. Rewards are the event-weight readout of the
    predicted event probabilities (or of sampled events when requested).
    """
    n = len(starts)
    lay = cfg.layout
    h = np.stack([s.h for s in starts])
    z = np.stack([s.z for s in starts])
    w = np.asarray(cfg.event_weights)
    actor_feats = np.zeros((n, horizon, 2, cfg.actor_in_dim))
    critic_feats = np.zeros((n, horizon + 1, cfg.critic_in_dim))
    actions = np.zeros((n, horizon, 2), dtype=int)
    rewards = np.zeros((n, horizon))
    continues = np.zeros((n, horizon))
    event_probs = np.zeros((n, horizon, cfg.n_events))
    for t in range(horizon):
        critic_feats[:, t] = np.concatenate([h, z], axis=1)
        acts = np.zeros((n, 2), dtype=int)
        for seat in (0, 1):
            feats = np.concatenate([h, lay.player_slice_np(z, seat)], axis=1)
            actor_feats[:, t, seat] = feats
            probs = softmax_np(actors[seat].logits(feats))
            acts[:, seat] = sample_categorical_np(probs, rng)
        actions[:, t] = acts
        a_oh = np.concatenate([_onehot(acts[:, 0], cfg.n_actions),
                               _onehot(acts[:, 1], cfg.n_actions)], axis=1)
        h = gru_np(params.gru, h, np.concatenate([z, a_oh], axis=1))
        logits = mlp_np(params.prior, h).reshape(n * lay.n_dists, lay.n_classes)
        probs = softmax_np(logits, unimix=cfg.unimix)
        u = rng.random(n * lay.n_dists)
        cdf = np.cumsum(probs, axis=1)
        idx = np.minimum((u[:, None] >= cdf).sum(axis=1), lay.n_classes - 1)
        onehot = np.zeros_like(probs)
        onehot[np.arange(len(idx)), idx] = 1.0
        z = onehot.reshape(n, lay.z_dim)
        hz = np.concatenate([h, z], axis=1)
        ev = 1.0 / (1.0 + np.exp(-mlp_np(params.reward, hz)))
        event_probs[:, t] = ev
        if sample_rewards:
            drawn = (rng.random(ev.shape) < ev).astype(float)
            rewards[:, t] = drawn @ w
        else:
            rewards[:, t] = ev @ w
        continues[:, t] = 1.0 / (1.0 + np.exp(-mlp_np(params.cont, hz)[:, 0]))
    critic_feats[:, horizon] = np.concatenate([h, z], axis=1)
    return ImaginedRollout(actor_feats=actor_feats, critic_feats=critic_feats,
                           actions=actions, rewards=rewards,
                           continues=continues, event_probs=event_probs)
