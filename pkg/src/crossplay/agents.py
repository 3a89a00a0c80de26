"""Policy agents: an actor head plus one centralized critic per partner.

Critic keys are agent indices; an agent's own index keys its self-play
critic, so a population trained sequentially accumulates 1 + 2 + ... + M
critic parameter sets in total.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import Tensor
from .nn import MlpParams, init_mlp, mlp_np, sample_categorical_np, softmax_np

__all__ = ["PolicyAgent", "FrozenAgentError", "new_agent"]


class FrozenAgentError(RuntimeError):
    """Raised when an update is attempted on a frozen agent."""


@dataclass
class PolicyAgent:
    index: int
    actor: MlpParams
    critics: dict[int, MlpParams] = field(default_factory=dict)
    frozen: bool = False

    # -- acting ---------------------------------------------------------------

    def logits(self, obs: np.ndarray) -> np.ndarray:
        return mlp_np(self.actor, obs)

    def action_probs(self, obs: np.ndarray) -> np.ndarray:
        return softmax_np(self.logits(obs))

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> int:
        return int(sample_categorical_np(self.action_probs(obs), rng))

    def act_greedy(self, obs: np.ndarray) -> int:
        return int(np.argmax(self.logits(obs)))

    # -- critics ----------------------------------------------------------------

    def critic_for(self, partner_index: int) -> MlpParams:
        return self.critics[partner_index]

    def ensure_critic(self, partner_index: int, rng: np.random.Generator,
                      state_dim: int, hidden: list[int]) -> MlpParams:
        """Create the centralized critic for a partnering on first use."""
        if partner_index not in self.critics:
            if self.frozen:
                raise FrozenAgentError(f"agent {self.index} is frozen")
            self.critics[partner_index] = init_mlp(rng, [state_dim, *hidden, 1])
        return self.critics[partner_index]

    def values(self, partner_index: int, feats: np.ndarray) -> np.ndarray:
        out = mlp_np(self.critics[partner_index], feats)
        return out.reshape(-1)

    # -- bookkeeping ---------------------------------------------------------

    def actor_tensors(self) -> list[Tensor]:
        return self.actor.tensors()

    def all_tensors(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, (w, b) in enumerate(self.actor.layers):
            named.append((f"actor.{i}.w", w))
            named.append((f"actor.{i}.b", b))
        for key in sorted(self.critics):
            for i, (w, b) in enumerate(self.critics[key].layers):
                named.append((f"critic.{key}.{i}.w", w))
                named.append((f"critic.{key}.{i}.b", b))
        return named

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, t in self.all_tensors():
            digest.update(name.encode())
            digest.update(t.tobytes())
        return digest.hexdigest()


def new_agent(index: int, rng: np.random.Generator, obs_dim: int,
              n_actions: int, hidden: list[int],
              actor_final_scale: float = 0.01,
              activation: str = "leaky_relu") -> PolicyAgent:
    actor = init_mlp(rng, [obs_dim, *hidden, n_actions],
                     activation=activation, final_scale=actor_final_scale)
    return PolicyAgent(index=index, actor=actor)
