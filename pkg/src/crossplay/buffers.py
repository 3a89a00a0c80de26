"""Bounded trajectory stores feeding simulated-rollout training.

Live self-play and cross-play episodes are the only things allowed in;
cross-play entries are keyed by partner, so every stored state really was
reached by live play of that particular pairing. Eviction is globally
oldest-first over a shared step budget.
"""

from __future__ import annotations

import pickle
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rollout import Trajectory

__all__ = ["ReplayBuffer", "EmptyBufferError", "save_buffer", "load_buffer"]

_CHECKPOINT_VERSION = 1


class EmptyBufferError(RuntimeError):
    """Raised when sampling from an empty partition."""


@dataclass
class _Entry:
    seq: int
    traj: Trajectory

    @property
    def n_steps(self) -> int:
        return len(self.traj)


class ReplayBuffer:
    """FIFO trajectory store split into a self-play partition and one
    cross-play partition per partner."""

    def __init__(self, capacity_steps: int = 200_000):
        self.capacity_steps = int(capacity_steps)
        self.sp: deque[_Entry] = deque()
        self.xp: dict[int, deque[_Entry]] = {}
        self._seq = 0
        self._total_steps = 0

    # -- insertion ----------------------------------------------------------

    def add(self, traj: Trajectory) -> None:
        if traj.kind == "SP":
            store = self.sp
        elif traj.kind == "XP":
            if traj.partner_index is None:
                raise ValueError("cross-play trajectory lacks a partner index")
            store = self.xp.setdefault(traj.partner_index, deque())
        else:
            raise ValueError(
                f"only live SP/XP trajectories are buffered, got {traj.kind!r}")
        if not traj.steps:
            raise ValueError("refusing to buffer an empty trajectory")
        store.append(_Entry(self._seq, traj))
        self._seq += 1
        self._total_steps += len(traj)
        self._evict()

    def _evict(self) -> None:
        while self._total_steps > self.capacity_steps:
            oldest = None
            for store in [self.sp, *self.xp.values()]:
                if store and (oldest is None or store[0].seq < oldest[0].seq):
                    oldest = store
            entry = oldest.popleft()
            self._total_steps -= entry.n_steps

    # -- inspection ------------------------------------------------------------

    @property
    def total_steps(self) -> int:
        return self._total_steps

    def sp_size(self) -> int:
        return sum(e.n_steps for e in self.sp)

    def xp_size(self, partner: Optional[int] = None) -> int:
        stores = [self.xp[partner]] if partner is not None else self.xp.values()
        return sum(e.n_steps for store in stores for e in store)

    def partners(self) -> list[int]:
        return sorted(self.xp)

    # -- sampling ------------------------------------------------------------

    def _pool(self, which: str, partner: Optional[int]) -> list:
        if which == "SP":
            entries = list(self.sp)
        elif which == "XP":
            if partner is not None:
                entries = list(self.xp.get(partner, ()))
            else:
                entries = [e for p in sorted(self.xp) for e in self.xp[p]]
        else:
            raise ValueError(f"unknown partition {which!r}")
        states = [s.state for e in entries for s in e.traj.steps]
        if not states:
            raise EmptyBufferError(f"partition {which}"
                                   + (f"[{partner}]" if partner is not None else "")
                                   + " is empty")
        return states

    def sample_states(self, which: str, n: int, rng: np.random.Generator,
                      partner: Optional[int] = None,
                      sp_ratio: float = 0.5) -> list:
        """Uniform draw of stored pre-step state snapshots.

        `both` mixes the SP pool and the pooled XP states: each draw picks
        the SP side with probability `sp_ratio`.
        """
        if which in ("SP", "XP"):
            pool = self._pool(which, partner)
            idx = rng.integers(0, len(pool), size=n)
            return [pool[i] for i in idx]
        if which == "both":
            sp_pool = self._pool("SP", None)
            xp_pool = self._pool("XP", partner)
            out = []
            for _ in range(n):
                pool = sp_pool if rng.random() < sp_ratio else xp_pool
                out.append(pool[int(rng.integers(0, len(pool)))])
            return out
        raise ValueError(f"unknown partition {which!r}")

    def sample_trajectories(self, which: str, n: int, rng: np.random.Generator,
                            partner: Optional[int] = None) -> list[Trajectory]:
        if which == "SP":
            entries = list(self.sp)
        elif which == "XP":
            if partner is not None:
                entries = list(self.xp.get(partner, ()))
            else:
                entries = [e for p in sorted(self.xp) for e in self.xp[p]]
        else:
            raise ValueError(f"unknown partition {which!r}")
        if not entries:
            raise EmptyBufferError(f"partition {which} is empty")
        idx = rng.integers(0, len(entries), size=n)
        return [entries[i].traj for i in idx]

    def max_xp_partner(self, window: int = 10) -> int:
        """Partner with the highest mean return over its latest `window`
        stored cross-play trajectories; ties go to the lowest id."""
        if not self.xp or all(not store for store in self.xp.values()):
            raise EmptyBufferError("no cross-play trajectories stored")
        best_id, best_mean = None, None
        for partner in sorted(self.xp):
            store = self.xp[partner]
            if not store:
                raise EmptyBufferError(f"partition XP[{partner}] is empty")
            recent = list(store)[-window:]
            mean = float(np.mean([e.traj.undiscounted_return for e in recent]))
            if best_mean is None or mean > best_mean:
                best_id, best_mean = partner, mean
        return best_id


def save_buffer(buf: ReplayBuffer, path) -> None:
    payload = {
        "version": _CHECKPOINT_VERSION,
        "capacity_steps": buf.capacity_steps,
        "seq": buf._seq,
        "sp": [(e.seq, e.traj) for e in buf.sp],
        "xp": {p: [(e.seq, e.traj) for e in store] for p, store in buf.xp.items()},
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_buffer(path) -> ReplayBuffer:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    version = payload.get("version")
    if version != _CHECKPOINT_VERSION:
        raise ValueError(f"unsupported buffer checkpoint version {version!r}")
    buf = ReplayBuffer(payload["capacity_steps"])
    buf._seq = payload["seq"]
    for seq, traj in payload["sp"]:
        buf.sp.append(_Entry(seq, traj))
        buf._total_steps += len(traj)
    for partner, entries in payload["xp"].items():
        store = buf.xp.setdefault(partner, deque())
        for seq, traj in entries:
            store.append(_Entry(seq, traj))
            buf._total_steps += len(traj)
    return buf
