"""Advantage and value-target estimators for on-policy updates.

`gae_advantages` serves live and exact-dynamics rollouts; `lambda_target`
serves rollouts imagined by the world model.
"""

from __future__ import annotations

import numpy as np

__all__ = ["gae_advantages", "lambda_target"]


def gae_advantages(rewards, values, continues, gamma: float, lam: float):
    """Generalized advantage estimation.

    rewards, continues: length T. values: length T+1 (bootstrap tail).
    Returns (advantages, value_targets), both length T, with
    value_targets = advantages + values[:T].
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    c = np.asarray(continues, dtype=np.float64)
    t_len = r.shape[0]
    if c.shape[0] != t_len or v.shape[0] != t_len + 1:
        raise ValueError(
            f"length mismatch: rewards {t_len}, continues {c.shape[0]}, "
            f"values {v.shape[0]} (need T+1)")
    adv = np.zeros(t_len, dtype=np.float64)
    carry = 0.0
    for t in range(t_len - 1, -1, -1):
        delta = r[t] + gamma * v[t + 1] * c[t] - v[t]
        carry = delta + gamma * lam * c[t] * carry
        adv[t] = carry
    return adv, adv + v[:t_len]


def lambda_target(rewards, values, continues, gamma: float, lam: float):
    """Recursive bootstrapped value targets.

    V_t = r_t + gamma * c_t * ((1 - lam) * v_{t+1} + lam * V_{t+1}), with
    V_T = v_T as the recursion base. rewards/continues length T, values
    length T+1; returns targets of length T.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    c = np.asarray(continues, dtype=np.float64)
    t_len = r.shape[0]
    if c.shape[0] != t_len or v.shape[0] != t_len + 1:
        raise ValueError(
            f"length mismatch: rewards {t_len}, continues {c.shape[0]}, "
            f"values {v.shape[0]} (need T+1)")
    targets = np.zeros(t_len, dtype=np.float64)
    nxt = v[t_len]
    for t in range(t_len - 1, -1, -1):
        targets[t] = r[t] + gamma * c[t] * ((1.0 - lam) * v[t + 1] + lam * nxt)
        nxt = targets[t]
    return targets
