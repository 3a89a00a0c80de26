"""Compact two-chef cooperative kitchen with event-based rewards.

Two chefs move on a small grid, load three onions into a pot, wait out the
cook timer, collect the soup with a bowl, and deliver it. Every scoring
interaction raises one bit in a per-player event vector; the scalar reward
is a fixed linear readout of that vector, so reward prediction reduces to
multi-label classification.

Layouts are ASCII maps. Legend:

    #  wall          C  counter (impassable, inert)
    O  onion source  B  bowl source
    P  pot           S  serving window
    .  floor         1/2  player start cells (floor)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

__all__ = [
    "KitchenLayout",
    "KitchenState",
    "KitchenEnv",
    "EVENT_NAMES",
    "EVENT_WEIGHTS",
    "event_reward_to_scalar",
    "parse_layout",
    "builtin_layout",
    "BUILTIN_LAYOUTS",
]

FLOOR, WALL, COUNTER, ONION_SOURCE, BOWL_SOURCE, POT, SERVE = range(7)

_TILE_CHARS = {"#": WALL, "C": COUNTER, "O": ONION_SOURCE, "B": BOWL_SOURCE,
               "P": POT, "S": SERVE, ".": FLOOR, "1": FLOOR, "2": FLOOR}

HOLD_NONE, HOLD_ONION, HOLD_BOWL, HOLD_SOUP = range(4)

POT_IDLE, POT_COOKING, POT_READY = range(3)

COOK_TIME = 20
POT_CAPACITY = 3

EVENT_NAMES = ("pickup_ingredient", "pickup_bowl", "put_in_pot",
               "pickup_soup", "deliver_soup")
EVENT_WEIGHTS = np.array([1.0, 1.0, 1.0, 3.0, 12.0])

# actions: movement in grid deltas, then noop and interact
UP, DOWN, LEFT, RIGHT, NOOP, INTERACT = range(6)
_DELTAS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


def event_reward_to_scalar(events: np.ndarray) -> float:
    """dot(e, w) with the per-player weight vector tiled twice."""
    e = np.asarray(events, dtype=np.float64)
    w = np.tile(EVENT_WEIGHTS, 2)
    if e.shape != w.shape:
        raise ValueError(f"event vector length {e.shape} != {w.shape}")
    return float(e @ w)


@dataclass(frozen=True)
class KitchenLayout:
    name: str
    grid: np.ndarray                 # [rows, cols] of tile codes
    starts: tuple[tuple[int, int], tuple[int, int]]
    horizon: int = 400

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def pots(self) -> list[tuple[int, int]]:
        return [tuple(rc) for rc in np.argwhere(self.grid == POT)]

    def tiles_of(self, code: int) -> list[tuple[int, int]]:
        return [tuple(rc) for rc in np.argwhere(self.grid == code)]


def parse_layout(name: str, text: str, horizon: int = 400) -> KitchenLayout:
    lines = [ln for ln in text.strip("\n").splitlines()]
    width = max(len(ln) for ln in lines)
    if any(len(ln) != width for ln in lines):
        raise ValueError("ragged layout: all rows must have equal width")
    grid = np.zeros((len(lines), width), dtype=np.int64)
    starts: dict[str, tuple[int, int]] = {}
    for r, ln in enumerate(lines):
        for c, ch in enumerate(ln):
            if ch not in _TILE_CHARS:
                raise ValueError(f"unknown layout character {ch!r}")
            grid[r, c] = _TILE_CHARS[ch]
            if ch in "12":
                starts[ch] = (r, c)
    if set(starts) != {"1", "2"}:
        raise ValueError("layout needs exactly one '1' and one '2' start cell")
    layout = KitchenLayout(name=name, grid=grid,
                           starts=(starts["1"], starts["2"]), horizon=horizon)
    _validate_layout(layout)
    return layout


def _validate_layout(layout: KitchenLayout) -> None:
    grid = layout.grid
    border = np.concatenate([grid[0, :], grid[-1, :], grid[:, 0], grid[:, -1]])
    if np.any(border == FLOOR):
        raise ValueError("layout must be fully bounded by impassable tiles")
    for code, label in ((POT, "pot"), (ONION_SOURCE, "onion source"),
                        (BOWL_SOURCE, "bowl source"), (SERVE, "serve tile")):
        if not np.any(grid == code):
            raise ValueError(f"layout needs at least one {label}")
    if layout.starts[0] == layout.starts[1]:
        raise ValueError("start cells must be distinct")


_CRAMPED = """
##P##
O.1.O
#.2.#
#CBS#
"""

_RING = """
##P##
#1..B
O.#.#
#..2S
##C##
"""

BUILTIN_LAYOUTS = {
    "cramped": _CRAMPED,
    "ring": _RING,
}


def builtin_layout(name: str, horizon: int = 400) -> KitchenLayout:
    if name not in BUILTIN_LAYOUTS:
        raise KeyError(f"unknown layout '{name}' (have {sorted(BUILTIN_LAYOUTS)})")
    return parse_layout(name, BUILTIN_LAYOUTS[name], horizon=horizon)


@dataclass(frozen=True)
class KitchenState:
    players: tuple[tuple[int, int], tuple[int, int]]   # cells
    facing: tuple[int, int]                            # movement action codes
    held: tuple[int, int]
    pots: tuple[tuple[int, int, int], ...]             # (onions, timer, state)
    t: int
    terminated: bool = False


class KitchenEnv:
    """Grid kitchen; pure step function over immutable states."""

    n_actions = 6
    has_events = True
    supports_early_termination = False
    n_events = 2 * len(EVENT_NAMES)

    def __init__(self, layout: KitchenLayout):
        self.layout = layout
        rows, cols = layout.shape
        self._pot_cells = layout.pots
        # observation = [own block, partner block, pot scalars]; each block
        # holds pose/held one-hots plus offsets to that player's nearest
        # interactive tiles, so swapping identities swaps the blocks exactly
        self._block_dim = rows + cols + 4 + 4 + 8
        self._obs_dim = 2 * self._block_dim + 3 * len(self._pot_cells)

    @property
    def horizon(self) -> int:
        return self.layout.horizon

    @property
    def obs_dim(self) -> int:
        return self._obs_dim

    @property
    def state_dim(self) -> int:
        return 2 * self._obs_dim + 1

    def reset(self, rng=None) -> KitchenState:
        pots = tuple((0, 0, POT_IDLE) for _ in self._pot_cells)
        return KitchenState(players=self.layout.starts, facing=(DOWN, DOWN),
                            held=(HOLD_NONE, HOLD_NONE), pots=pots, t=0)

    # -- dynamics -----------------------------------------------------------

    def _passable(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        rows, cols = self.layout.shape
        return 0 <= r < rows and 0 <= c < cols and self.layout.grid[r, c] == FLOOR

    def _resolve_moves(self, state: KitchenState, actions) -> tuple[tuple, tuple]:
        cur = list(state.players)
        facing = list(state.facing)
        targets = []
        for i, act in enumerate(actions):
            if act in _DELTAS:
                facing[i] = act
                dr, dc = _DELTAS[act]
                tgt = (cur[i][0] + dr, cur[i][1] + dc)
                targets.append(tgt if self._passable(tgt) else cur[i])
            else:
                targets.append(cur[i])
        # same-cell collision: both bounce; swapping through is forbidden
        if targets[0] == targets[1]:
            targets = cur
        elif targets[0] == cur[1] and targets[1] == cur[0]:
            targets = cur
        else:
            # moving into a cell the other occupies and keeps is a bounce
            if targets[0] == cur[1] and targets[1] == cur[1]:
                targets[0] = cur[0]
            if targets[1] == cur[0] and targets[0] == cur[0]:
                targets[1] = cur[1]
        return (tuple(targets[0]), tuple(targets[1])), tuple(facing)

    def _faced_cell(self, cell, facing) -> tuple[int, int]:
        dr, dc = _DELTAS[facing]
        return (cell[0] + dr, cell[1] + dc)

    def _interact(self, grid_code, held, pots, pot_idx) -> tuple[int, list, Optional[int]]:
        """Returns (new held, new pots, event index or None)."""
        if grid_code == ONION_SOURCE and held == HOLD_NONE:
            return HOLD_ONION, pots, 0
        if grid_code == BOWL_SOURCE and held == HOLD_NONE:
            return HOLD_BOWL, pots, 1
        if grid_code == POT and pot_idx is not None:
            onions, timer, pstate = pots[pot_idx]
            if held == HOLD_ONION and pstate == POT_IDLE and onions < POT_CAPACITY:
                onions += 1
                if onions == POT_CAPACITY:
                    pstate = POT_COOKING  # cooking auto-starts on the third onion
                pots[pot_idx] = (onions, timer, pstate)
                return HOLD_NONE, pots, 2
            if held == HOLD_BOWL and pstate == POT_READY:
                pots[pot_idx] = (0, 0, POT_IDLE)
                return HOLD_SOUP, pots, 3
        if grid_code == SERVE and held == HOLD_SOUP:
            return HOLD_NONE, pots, 4
        return held, pots, None

    def step(self, state: KitchenState, actions) -> tuple[KitchenState, float, np.ndarray, bool]:
        if state.terminated:
            raise RuntimeError("cannot step a terminated episode")
        a = tuple(int(x) for x in actions)
        if any(x < 0 or x >= self.n_actions for x in a):
            raise ValueError(f"bad joint action {actions!r}")

        players, facing = self._resolve_moves(state, a)
        held = list(state.held)
        pots = list(state.pots)
        events = np.zeros(self.n_events)
        for i in (0, 1):
            if a[i] != INTERACT:
                continue
            faced = self._faced_cell(players[i], facing[i])
            r, c = faced
            rows, cols = self.layout.shape
            if not (0 <= r < rows and 0 <= c < cols):
                continue
            code = self.layout.grid[r, c]
            pot_idx = self._pot_cells.index(faced) if code == POT else None
            held[i], pots, ev = self._interact(code, held[i], pots, pot_idx)
            if ev is not None:
                events[i * len(EVENT_NAMES) + ev] = 1.0
        # cook timers tick after interactions
        for k, (onions, timer, pstate) in enumerate(pots):
            if pstate == POT_COOKING:
                timer += 1
                if timer >= COOK_TIME:
                    pstate = POT_READY
                pots[k] = (onions, timer, pstate)
        t_next = state.t + 1
        terminated = t_next == self.layout.horizon
        nxt = KitchenState(players=players, facing=facing, held=tuple(held),
                           pots=tuple(pots), t=t_next, terminated=terminated)
        return nxt, event_reward_to_scalar(events), events, terminated

    # -- observations ---------------------------------------------------------

    def _player_block(self, state: KitchenState, i: int) -> np.ndarray:
        rows, cols = self.layout.shape
        r, c = state.players[i]
        row_oh = np.zeros(rows)
        col_oh = np.zeros(cols)
        row_oh[r] = 1.0
        col_oh[c] = 1.0
        face_oh = np.zeros(4)
        face_oh[state.facing[i]] = 1.0
        held_oh = np.zeros(4)
        held_oh[state.held[i]] = 1.0
        offsets = np.concatenate([
            self._nearest_offset(state.players[i], ONION_SOURCE),
            self._nearest_offset(state.players[i], BOWL_SOURCE),
            self._nearest_offset(state.players[i], POT),
            self._nearest_offset(state.players[i], SERVE)])
        return np.concatenate([row_oh, col_oh, face_oh, held_oh, offsets])

    def _nearest_offset(self, cell, code) -> np.ndarray:
        tiles = self.layout.tiles_of(code)
        best = min(tiles, key=lambda rc: abs(rc[0] - cell[0]) + abs(rc[1] - cell[1]))
        rows, cols = self.layout.shape
        return np.array([(best[0] - cell[0]) / rows, (best[1] - cell[1]) / cols])

    def observe(self, state: KitchenState) -> tuple[np.ndarray, np.ndarray]:
        pot_feats = np.concatenate([
            np.array([onions / POT_CAPACITY, timer / COOK_TIME,
                      1.0 if pstate == POT_READY else 0.0])
            for onions, timer, pstate in state.pots])
        blocks = [self._player_block(state, 0), self._player_block(state, 1)]
        o1 = np.concatenate([blocks[0], blocks[1], pot_feats])
        o2 = np.concatenate([blocks[1], blocks[0], pot_feats])
        return o1, o2

    def state_features(self, state: KitchenState) -> np.ndarray:
        o1, o2 = self.observe(state)
        return np.concatenate([o1, o2, [state.t / self.layout.horizon]])

    def state_array(self, state: KitchenState) -> np.ndarray:
        flat = [*state.players[0], *state.players[1], *state.facing, *state.held]
        for pot in state.pots:
            flat.extend(pot)
        flat.append(state.t)
        flat.append(float(state.terminated))
        return np.array(flat, dtype=np.float64)


# -- artifact emitters ---------------------------------------------------------

_TILE_COLORS = {WALL: "#555555", COUNTER: "#9a8866", ONION_SOURCE: "#caa133",
                BOWL_SOURCE: "#7799bb", POT: "#333344", SERVE: "#88bb88",
                FLOOR: "#f4efe6"}


def board_svg(env: KitchenEnv, state: KitchenState, path, cell: int = 40) -> None:
    """One-frame render of the kitchen board."""
    rows, cols = env.layout.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" '
             f'height="{rows * cell}" viewBox="0 0 {cols * cell} {rows * cell}">']
    for r in range(rows):
        for c in range(cols):
            color = _TILE_COLORS[int(env.layout.grid[r, c])]
            parts.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" '
                         f'height="{cell}" fill="{color}" stroke="#ffffff"/>')
    held_chars = {HOLD_NONE: "", HOLD_ONION: "o", HOLD_BOWL: "u", HOLD_SOUP: "*"}
    for i, color in ((0, "#cc3333"), (1, "#3366cc")):
        r, c = state.players[i]
        cx, cy = c * cell + cell / 2, r * cell + cell / 2
        parts.append(f'<circle cx="{cx:.0f}" cy="{cy:.0f}" r="{cell * 0.32:.0f}" '
                     f'fill="{color}"/>')
        tag = f"{i + 1}{held_chars[state.held[i]]}"
        parts.append(f'<text x="{cx:.0f}" y="{cy + 4:.0f}" font-size="12" '
                     f'fill="#fff" text-anchor="middle" '
                     f'font-family="monospace">{tag}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def trajectory_csv(env: KitchenEnv, traj, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t", "p1r", "p1c", "p2r", "p2c", "p1_held", "p2_held", "reward"]
        header += [f"ev_{name}_p{i}" for i in (1, 2) for name in EVENT_NAMES]
        writer.writerow(header)
        for step in traj.steps:
            s = step.state
            row = [s.t, s.players[0][0], s.players[0][1],
                   s.players[1][0], s.players[1][1],
                   s.held[0], s.held[1], f"{step.reward:.3f}"]
            row += [int(v) for v in (step.events if step.events is not None
                                     else np.zeros(env.n_events))]
            writer.writerow(row)
