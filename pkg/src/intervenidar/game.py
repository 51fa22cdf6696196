"""Deterministic track-painting game: player, enemies, painting, scoring.

Dynamics, all tile-level and integer-valued:

  * the player moves one tile per step along track (off-track moves are
    no-ops) and paints every tile it lands on;
  * a segment becomes filled when all its tiles are painted; the score is
    always the number of filled segments, and the reward of a step is 1
    exactly when the score increased during it;
  * the five movement actions are no-op, up, right, down, left;
  * enemies advance one tile per step by their movement protocol; the
    episode ends on player/enemy contact (sharing a tile after the step, or
    swapping adjacent tiles during it), or with a win when every segment is
    filled.

A ``GameState`` is self-contained: its payload carries the board, every
enemy's full protocol data, and the painted set, so any state can be stored,
shipped and restored bit-exactly without the originating config file.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .board import HEADINGS, HEADING_DELTAS, Board, BoardError, EnemyConfig, GameConfig, Tile
from .hashing import digest_payload
from .mdp import MdpSpec, StepResult, TerminalStateError

ACTIONS = ("noop", "up", "right", "down", "left")
ACTION_HEADINGS = {1: "N", 2: "E", 3: "S", 4: "W"}
ENVIRONMENT_ID = "intervenidar"

STATE_FORMAT_VERSION = 1


@dataclass
class EntityState:
    """Position and protocol state of the player or one enemy.

    Movement is uniform one tile per step, so positions are whole tiles.
    ``offset`` shifts a lookup enemy's index into its table; ``heading`` is
    the local-feature protocol's memory (and the player's last direction);
    ``orientation`` fixes a perimeter follower's direction of travel.
    """

    id: int
    tile: Tile
    protocol: str  # "player" | "lookup" | "perimeter" | "local"
    heading: str = "E"
    offset: int = 0
    orientation: str = "cw"
    table: tuple[Tile, ...] = ()

    def dynamic_payload(self) -> dict:
        out: dict = {"id": self.id, "tile": list(self.tile), "protocol": self.protocol}
        if self.protocol == "lookup":
            out["offset"] = self.offset
        elif self.protocol == "perimeter":
            out["orientation"] = self.orientation
        else:
            out["heading"] = self.heading
        return out

    def to_payload(self) -> dict:
        out = self.dynamic_payload()
        out["heading"] = self.heading
        if self.protocol == "lookup":
            out["table"] = [list(t) for t in self.table]
        return out

    @classmethod
    def from_payload(cls, payload: dict) -> "EntityState":
        return cls(
            id=int(payload["id"]),
            tile=tuple(payload["tile"]),
            protocol=str(payload["protocol"]),
            heading=str(payload.get("heading", "E")),
            offset=int(payload.get("offset", 0)),
            orientation=str(payload.get("orientation", "cw")),
            table=tuple(tuple(t) for t in payload.get("table", [])),
        )


def enemy_advance(enemy: EntityState, board: Board, time: int) -> EntityState:
    """Advance one enemy to its position at step ``time``.

    Pure: returns a new ``EntityState`` and never mutates its argument.
    Lookup enemies are positioned by table index; perimeter followers take
    the next tile along the outer track loop; local-feature enemies follow
    the right-hand rule over their 4-neighborhood track pattern.
    """
    out = copy.copy(enemy)
    if enemy.protocol == "lookup":
        out.tile = enemy.table[(time + enemy.offset) % len(enemy.table)]
        return out
    if enemy.protocol == "perimeter":
        cycle = board.perimeter_cycle()
        try:
            i = board.perimeter_index(enemy.tile)
        except KeyError:
            raise BoardError("perimeter enemy off perimeter", str(enemy.tile))
        step = 1 if enemy.orientation == "cw" else -1
        out.tile = cycle[(i + step) % len(cycle)]
        return out
    if enemy.protocol == "local":
        out.tile, out.heading = _local_move(enemy.tile, enemy.heading, board)
        return out
    raise BoardError("unknown movement protocol", enemy.protocol)


def _local_move(tile: Tile, heading: str, board: Board) -> tuple[Tile, str]:
    # Right-hand rule: prefer a right turn, then straight, left, back; a
    # pure function of the 4-neighborhood track pattern and the heading.
    i = HEADINGS.index(heading)
    for cand in (HEADINGS[(i + 1) % 4], heading, HEADINGS[(i - 1) % 4], HEADINGS[(i + 2) % 4]):
        dx, dy = HEADING_DELTAS[cand]
        target = (tile[0] + dx, tile[1] + dy)
        if target in board.track:
            return target, cand
    return tile, heading  # isolated tile: stall


@dataclass
class GameState:
    """Full latent state of one game."""

    board: Board
    player: EntityState
    enemies: list[EntityState]
    painted: set[Tile]
    score: int = 0
    step_count: int = 0
    terminal: bool = False
    win: bool = False
    _remaining: dict[int, int] = field(default_factory=dict, repr=False)
    _static_digest: str | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self._remaining:
            self._rebuild_caches()

    def _rebuild_caches(self) -> None:
        self._remaining = {
            seg.id: sum(1 for t in seg.tiles if t not in self.painted)
            for seg in self.board.segments
        }
        self._static_digest = None

    @property
    def filled_segment_ids(self) -> tuple[int, ...]:
        return tuple(sid for sid, left in sorted(self._remaining.items()) if left == 0)

    @property
    def filled_count(self) -> int:
        return sum(1 for left in self._remaining.values() if left == 0)

    def copy(self) -> "GameState":
        return GameState(
            board=self.board,
            player=copy.copy(self.player),
            enemies=[copy.copy(e) for e in self.enemies],
            painted=set(self.painted),
            score=self.score,
            step_count=self.step_count,
            terminal=self.terminal,
            win=self.win,
            _remaining=dict(self._remaining),
            _static_digest=self._static_digest,
        )

    # -- serialization and hashing --------------------------------------------

    def to_payload(self) -> dict:
        return {
            "format_version": STATE_FORMAT_VERSION,
            "board": self.board.to_payload(),
            "player": self.player.to_payload(),
            "enemies": [e.to_payload() for e in sorted(self.enemies, key=lambda e: e.id)],
            "painted": sorted([list(t) for t in self.painted]),
            "score": self.score,
            "step": self.step_count,
            "terminal": self.terminal,
            "win": self.win,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GameState":
        if payload.get("format_version") != STATE_FORMAT_VERSION:
            raise ValueError(f"unsupported state format version {payload.get('format_version')}")
        return cls(
            board=Board.from_payload(payload["board"]),
            player=EntityState.from_payload(payload["player"]),
            enemies=[EntityState.from_payload(p) for p in payload["enemies"]],
            painted={tuple(t) for t in payload["painted"]},
            score=int(payload["score"]),
            step_count=int(payload["step"]),
            terminal=bool(payload["terminal"]),
            win=bool(payload["win"]),
        )

    def latent_digest(self) -> str:
        """Hash of the full latent state; changes iff any latent field changes."""
        if self._static_digest is None:
            self._static_digest = digest_payload(
                {
                    "board": self.board.static_digest,
                    "tables": [
                        {"id": e.id, "table": [list(t) for t in e.table]}
                        for e in sorted(self.enemies, key=lambda e: e.id)
                        if e.protocol == "lookup"
                    ],
                }
            )
        return digest_payload(
            {
                "static": self._static_digest,
                "player": self.player.to_payload(),
                "enemies": [e.dynamic_payload() for e in sorted(self.enemies, key=lambda e: e.id)],
                "painted": sorted([list(t) for t in self.painted]),
                "score": self.score,
                "step": self.step_count,
                "terminal": self.terminal,
                "win": self.win,
            }
        )


def new_game(config: GameConfig) -> GameState:
    """Build the canonical start state for a config; deterministic."""
    config.validate()
    player = EntityState(id=-1, tile=config.player_start, protocol="player", heading="E")
    enemies = [_enemy_from_config(e) for e in config.enemies]
    state = GameState(
        board=config.board,
        player=player,
        enemies=enemies,
        painted={config.player_start},
    )
    state.score = state.filled_count
    return state


def _enemy_from_config(e: EnemyConfig) -> EntityState:
    return EntityState(
        id=e.id,
        tile=e.start,
        protocol=e.protocol,
        heading=e.heading,
        orientation=e.orientation,
        table=tuple(e.table) if e.table else (),
    )


def step(state: GameState, action: int) -> StepResult:
    """Advance the game one step in place.

    Order: player moves (painting as it goes), then every enemy advances by
    protocol, then contact and win are resolved.  Reward is 1 iff the score
    increased during the step.
    """
    if state.terminal:
        raise TerminalStateError("step on terminal state rejected")
    if not 0 <= action < len(ACTIONS):
        raise ValueError(f"action index {action} out of range")

    player_prev = state.player.tile
    newly_filled = 0
    if action != 0:
        heading = ACTION_HEADINGS[action]
        dx, dy = HEADING_DELTAS[heading]
        target = (player_prev[0] + dx, player_prev[1] + dy)
        if target in state.board.track:
            state.player.tile = target
            state.player.heading = heading
            newly_filled = _paint(state, target)

    state.score += newly_filled
    state.step_count += 1

    enemy_prev = {e.id: e.tile for e in state.enemies}
    state.enemies = [enemy_advance(e, state.board, state.step_count) for e in state.enemies]

    contact = any(
        e.tile == state.player.tile
        or (e.tile == player_prev and enemy_prev[e.id] == state.player.tile)
        for e in state.enemies
    )
    if contact:
        state.terminal = True
    elif state.filled_count == len(state.board.segments):
        state.terminal = True
        state.win = True
    return StepResult(state, 1 if newly_filled > 0 else 0, state.terminal)


def _paint(state: GameState, tile: Tile) -> int:
    if tile in state.painted:
        return 0
    state.painted.add(tile)
    filled = 0
    for sid in state.board.segments_at(tile):
        state._remaining[sid] -= 1
        if state._remaining[sid] == 0:
            filled += 1
    return filled


class IntervenidarEnv:
    """Environment adapter exposing the game through the MDP protocol.

    Dynamics are fully deterministic, so the reset seed is accepted and
    ignored.  ``start_state`` overrides the canonical start (used for
    intervened and off-policy starts).
    """

    environment_id = ENVIRONMENT_ID

    def __init__(self, config: GameConfig, start_state: GameState | None = None):
        self.config = config
        self.config_hash = config.config_hash
        self._start = start_state.copy() if start_state is not None else None
        self.state: GameState | None = None
        self._frames: list = []

    @property
    def action_count(self) -> int:
        return len(ACTIONS)

    def mdp_spec(self) -> MdpSpec:
        return MdpSpec(state_space="intervenidar/latent", actions=ACTIONS, discount=1.0)

    @property
    def current_state(self) -> GameState:
        if self.state is None:
            raise RuntimeError("environment not reset")
        return self.state

    @property
    def terminal(self) -> bool:
        return self.current_state.terminal

    def reset(self, seed: int = 0) -> GameState:
        self.state = self._start.copy() if self._start is not None else new_game(self.config)
        self._frames = []
        return self.state

    def reset_to_payload(self, payload: dict) -> GameState:
        self.state = GameState.from_payload(payload)
        self._frames = []
        return self.state

    def step(self, action: int) -> StepResult:
        result = step(self.current_state, action)
        if self._frames:
            self._record_frame()
        return result

    def latent_digest(self) -> str:
        return self.current_state.latent_digest()

    def state_payload(self) -> dict:
        return self.current_state.to_payload()

    def observe_pixels(self):
        from .render import observe, render

        if not self._frames:
            self._frames = [render(self.current_state)]
        return observe(self._frames)

    def _record_frame(self) -> None:
        from .render import render

        self._frames.append(render(self.current_state))
        self._frames = self._frames[-4:]
