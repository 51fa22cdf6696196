"""Built-in scripted agents: desk-scale stand-ins for trained agents.

Agents are duck-typed per the episode runner: ``agent_id``,
``observation_kind`` ("latent" or "pixels"), ``channels``,
``begin_episode(seed)`` and ``act(observation) -> AgentReply``.  All three
builtins observe latent state and are deterministic given their seed.
"""

from __future__ import annotations

from collections import deque

from .board import HEADING_DELTAS, Board, Tile
from .game import GameState
from .mdp import AgentReply
from .rng import stream

HEADING_ACTIONS = {"N": 1, "E": 2, "S": 3, "W": 4}


class UniformRandomAgent:
    """Uniform draw over the action set each step."""

    observation_kind = "latent"
    channels: frozenset = frozenset()

    def __init__(self, action_count: int = 5):
        self.agent_id = "random"
        self.action_count = action_count
        self._rng = stream(0, "agent", self.agent_id)

    def begin_episode(self, seed: int) -> None:
        self._rng = stream(seed, "agent", self.agent_id)

    def act(self, observation) -> AgentReply:
        return AgentReply(action=self._rng.randrange(self.action_count))


class StationaryAgent:
    """Emits the no-move action every step."""

    observation_kind = "latent"
    channels: frozenset = frozenset()
    agent_id = "stationary"

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, observation) -> AgentReply:
        return AgentReply(action=0)


class GreedyPainterAgent:
    """Walks toward the nearest unpainted track tile of an unfilled segment.

    Path planning is breadth-first over track tiles, refusing tiles within
    ``avoid_radius`` (Chebyshev) of any enemy; when no safe path exists the
    agent evades instead, taking the move that maximizes its distance to the
    nearest enemy.  Fully deterministic: ties break in tile order.
    """

    observation_kind = "latent"
    channels: frozenset = frozenset()
    agent_id = "greedy-painter"

    def __init__(self, avoid_radius: int = 3):
        self.avoid_radius = avoid_radius

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, state: GameState) -> AgentReply:
        targets = self._unpainted_segment_tiles(state)
        if not targets:
            return AgentReply(action=0)
        move = self._first_step(state, targets, avoid=True)
        if move is not None:
            return AgentReply(action=HEADING_ACTIONS[move])
        if state.enemies:
            return AgentReply(action=self._evade(state))
        move = self._first_step(state, targets, avoid=False)
        return AgentReply(action=HEADING_ACTIONS[move] if move else 0)

    def _evade(self, state: GameState) -> int:
        def clearance(tile: Tile) -> int:
            return min(
                max(abs(tile[0] - e.tile[0]), abs(tile[1] - e.tile[1])) for e in state.enemies
            )

        best_action, best_score = 0, clearance(state.player.tile)
        for heading, action in HEADING_ACTIONS.items():
            dx, dy = HEADING_DELTAS[heading]
            target = (state.player.tile[0] + dx, state.player.tile[1] + dy)
            if target in state.board.track and clearance(target) > best_score:
                best_action, best_score = action, clearance(target)
        return best_action

    @staticmethod
    def _unpainted_segment_tiles(state: GameState) -> set[Tile]:
        tiles: set[Tile] = set()
        for seg in state.board.segments:
            if state._remaining[seg.id] > 0:
                tiles.update(t for t in seg.tiles if t not in state.painted)
        return tiles

    def _first_step(self, state: GameState, targets: set[Tile], avoid: bool) -> str | None:
        start = state.player.tile
        danger = self._danger_tiles(state) if avoid else frozenset()
        queue = deque([start])
        came: dict[Tile, tuple[Tile, str] | None] = {start: None}
        found = None
        while queue:
            tile = queue.popleft()
            if tile in targets and tile != start:
                found = tile
                break
            for heading in ("N", "E", "S", "W"):
                dx, dy = HEADING_DELTAS[heading]
                nxt = (tile[0] + dx, tile[1] + dy)
                if nxt in state.board.track and nxt not in came and nxt not in danger:
                    came[nxt] = (tile, heading)
                    queue.append(nxt)
        if found is None:
            return None
        tile, heading = found, None
        while came[tile] is not None:
            tile, heading = came[tile]
        return heading

    def _danger_tiles(self, state: GameState) -> frozenset[Tile]:
        danger = set()
        r = self.avoid_radius
        for e in state.enemies:
            ex, ey = e.tile
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    danger.add((ex + dx, ey + dy))
        danger.discard(state.player.tile)
        return frozenset(danger)


BUILTIN_AGENTS = {
    "random": lambda: UniformRandomAgent(),
    "stationary": lambda: StationaryAgent(),
    "greedy-painter": lambda: GreedyPainterAgent(),
}


def make_agent(agent_id: str):
    if agent_id not in BUILTIN_AGENTS:
        raise KeyError(f"unknown builtin agent {agent_id!r}; known: {sorted(BUILTIN_AGENTS)}")
    return BUILTIN_AGENTS[agent_id]()


def track_edge_count(board: Board) -> int:
    """Number of adjacent track-tile pairs; a depth-first tour crosses each
    edge at most twice, bounding any complete painting walk."""
    edges = 0
    for (x, y) in board.track:
        if (x + 1, y) in board.track:
            edges += 1
        if (x, y + 1) in board.track:
            edges += 1
    return edges
