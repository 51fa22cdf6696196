"""Column-advancing grid environment and its exact state-space partitioner.

Cells are ``(col, row)``.  The three actions each advance one column: right,
right-up, right-down.  The agent starts at a fixed cell and earns +1 on
arriving at the goal cell, which ends the episode; reaching the last column
without the goal ends the episode with 0, and a move that leaves the grid or
enters a wall ends it with 0.  Dynamics are deterministic, so the reachable
set is an exact forward closure and the visit-probability cutoff carried in
``StatePartition`` plays no role here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .hashing import digest_payload
from .mdp import MdpSpec, StepResult, TerminalStateError
from .rng import stream

Cell = tuple[int, int]

GRID_ACTIONS = ("right", "right-up", "right-down")
GRID_DELTAS = ((1, 0), (1, -1), (1, 1))

ENVIRONMENT_ID = "gridworld"


class PolicyOutOfBoundsError(ValueError):
    """A deterministic policy steered off the grid; ``cell`` is where."""

    def __init__(self, cell: Cell, target: Cell):
        self.cell = cell
        self.target = target
        super().__init__(f"policy at cell {cell} leads off the grid to {target}")


@dataclass(frozen=True)
class GridConfig:
    width: int
    height: int
    start: Cell
    goal: Cell
    walls: frozenset[Cell] = frozenset()

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(cell):
                raise ValueError(f"{name} cell {cell} out of bounds")
            if cell in self.walls:
                raise ValueError(f"{name} cell {cell} is a wall")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def open_cells(self) -> frozenset[Cell]:
        return frozenset(
            (c, r) for c in range(self.width) for r in range(self.height) if (c, r) not in self.walls
        )

    def is_terminal(self, cell: Cell) -> bool:
        return cell == self.goal or cell[0] == self.width - 1

    def move(self, cell: Cell, action: int) -> Cell:
        dc, dr = GRID_DELTAS[action]
        return (cell[0] + dc, cell[1] + dr)

    def valid_target(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def to_payload(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "goal": list(self.goal),
            "walls": sorted([list(w) for w in self.walls]),
        }

    # -- plain-text map ------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "GridConfig":
        rows = [line for line in text.splitlines() if line.strip()]
        width = len(rows[0])
        start = goal = None
        walls = set()
        for r, line in enumerate(rows):
            if len(line) != width:
                raise ValueError("ragged grid map")
            for c, ch in enumerate(line):
                if ch == "#":
                    walls.add((c, r))
                elif ch == "S":
                    start = (c, r)
                elif ch == "G":
                    goal = (c, r)
                elif ch != ".":
                    raise ValueError(f"unknown grid character {ch!r}")
        if start is None or goal is None:
            raise ValueError("grid map needs exactly one S and one G")
        return cls(width=width, height=len(rows), start=start, goal=goal, walls=frozenset(walls))

    def to_text(self) -> str:
        rows = []
        for r in range(self.height):
            chars = []
            for c in range(self.width):
                cell = (c, r)
                if cell in self.walls:
                    chars.append("#")
                elif cell == self.start:
                    chars.append("S")
                elif cell == self.goal:
                    chars.append("G")
                else:
                    chars.append(".")
            rows.append("".join(chars))
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class StatePartition:
    """Disjoint on-policy / off-policy / unreachable cover of non-wall cells.

    ``alpha`` (visit-probability cutoff), ``delta`` (estimation threshold)
    and ``beta`` (optimality threshold) are recorded for API uniformity with
    stochastic variants; deterministic dynamics make the partition exact.
    """

    on_policy: frozenset[Cell]
    off_policy: frozenset[Cell]
    unreachable: frozenset[Cell]
    alpha: float = 0.01
    delta: float = 0.01
    beta: float = 0.01

    def __post_init__(self) -> None:
        for name in ("alpha", "delta", "beta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.on_policy & self.off_policy or self.on_policy & self.unreachable or self.off_policy & self.unreachable:
            raise ValueError("partition sets must be pairwise disjoint")


def reachable_set(config: GridConfig) -> frozenset[Cell]:
    """Exact forward closure from the start under all action sequences."""
    seen = {config.start}
    frontier = [config.start]
    while frontier:
        cell = frontier.pop()
        if config.is_terminal(cell):
            continue
        for action in range(3):
            target = config.move(cell, action)
            if config.valid_target(target) and target not in seen:
                seen.add(target)
                frontier.append(target)
    return frozenset(seen)


def policy_trajectory(config: GridConfig, policy) -> list[Cell]:
    """Cells visited by a deterministic policy from the start, inclusive."""
    cells = [config.start]
    cell = config.start
    while not config.is_terminal(cell):
        target = config.move(cell, policy(cell))
        if not config.valid_target(target):
            raise PolicyOutOfBoundsError(cell, target)
        cell = target
        cells.append(cell)
    return cells


def partition(config: GridConfig, policy) -> StatePartition:
    """Exact on-policy / off-policy / unreachable partition for a policy."""
    on = frozenset(policy_trajectory(config, policy))
    reachable = reachable_set(config)
    return StatePartition(
        on_policy=on,
        off_policy=reachable - on,
        unreachable=config.open_cells() - reachable,
    )


def partition_to_text(config: GridConfig, part: StatePartition) -> str:
    """Labeled grid text: o on-policy, x off-policy, u unreachable, # wall."""
    rows = []
    for r in range(config.height):
        chars = []
        for c in range(config.width):
            cell = (c, r)
            if cell in config.walls:
                chars.append("#")
            elif cell in part.on_policy:
                chars.append("o")
            elif cell in part.off_policy:
                chars.append("x")
            else:
                chars.append("u")
        rows.append("".join(chars))
    return "\n".join(rows) + "\n"


def value_iteration(config: GridConfig) -> dict[Cell, float]:
    """Optimal undiscounted state values; terminal cells valued 0.

    The column always advances, so one right-to-left sweep is exact.
    """
    values: dict[Cell, float] = {}
    for col in range(config.width - 1, -1, -1):
        for row in range(config.height):
            cell = (col, row)
            if cell in config.walls:
                continue
            if config.is_terminal(cell):
                values[cell] = 0.0
                continue
            best = 0.0
            for action in range(3):
                target = config.move(cell, action)
                if not config.valid_target(target):
                    continue
                reward = 1.0 if target == config.goal else 0.0
                best = max(best, reward + values[target])
            values[cell] = best
    return values


@dataclass
class QTable:
    """Tabular action values and the greedy policy they induce."""

    q: dict[Cell, list[float]] = field(default_factory=dict)

    def values_for(self, cell: Cell) -> list[float]:
        return self.q.setdefault(cell, [0.0, 0.0, 0.0])

    def greedy_action(self, cell: Cell) -> int:
        vals = self.values_for(cell)
        return max(range(3), key=lambda a: (vals[a], -a))

    def greedy_policy(self):
        return self.greedy_action

    def state_value(self, cell: Cell) -> float:
        return max(self.values_for(cell))


def tabular_q_learn(
    config: GridConfig,
    episodes: int,
    exploration: float,
    seed: int,
    learning_rate: float = 1.0,
) -> QTable:
    """Epsilon-greedy tabular Q-learning (undiscounted, deterministic grid).

    The default learning rate of 1.0 makes each update an exact Bellman
    backup, which is what deterministic dynamics warrant.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = stream(seed, "gridworld-qlearn")
    table = QTable()
    for _ in range(episodes):
        cell = config.start
        while not config.is_terminal(cell):
            if rng.random() < exploration:
                action = rng.randrange(3)
            else:
                action = table.greedy_action(cell)
            target = config.move(cell, action)
            if not config.valid_target(target):
                reward, bootstrap, nxt = 0.0, 0.0, None
            else:
                reward = 1.0 if target == config.goal else 0.0
                bootstrap = 0.0 if config.is_terminal(target) else table.state_value(target)
                nxt = target
            vals = table.values_for(cell)
            vals[action] += learning_rate * (reward + bootstrap - vals[action])
            if nxt is None:
                break
            cell = nxt
    return table


class GridWorldEnv:
    """MDP-protocol adapter around the grid dynamics."""

    environment_id = ENVIRONMENT_ID

    def __init__(self, config: GridConfig):
        self.config = config
        self.config_hash = digest_payload(config.to_payload())
        self.cell: Cell = config.start
        self.step_count = 0
        self._terminal = config.is_terminal(config.start)

    @property
    def action_count(self) -> int:
        return 3

    def mdp_spec(self) -> MdpSpec:
        return MdpSpec(state_space="gridworld/cell", actions=GRID_ACTIONS, discount=1.0)

    @property
    def current_state(self) -> Cell:
        return self.cell

    @property
    def terminal(self) -> bool:
        return self._terminal

    def reset(self, seed: int = 0) -> Cell:
        self.cell = self.config.start
        self.step_count = 0
        self._terminal = self.config.is_terminal(self.cell)
        return self.cell

    def reset_to_payload(self, payload: dict) -> Cell:
        self.cell = tuple(payload["cell"])
        self.step_count = int(payload["step"])
        self._terminal = bool(payload["terminal"])
        return self.cell

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise TerminalStateError("step on terminal state rejected")
        if not 0 <= action < 3:
            raise ValueError(f"action index {action} out of range")
        target = self.config.move(self.cell, action)
        self.step_count += 1
        if not self.config.valid_target(target):
            self._terminal = True
            return StepResult(self.cell, 0.0, True)
        self.cell = target
        reward = 1.0 if target == self.config.goal else 0.0
        self._terminal = self.config.is_terminal(target)
        return StepResult(self.cell, reward, self._terminal)

    def latent_digest(self) -> str:
        return digest_payload(self.state_payload())

    def state_payload(self) -> dict:
        return {
            "cell": list(self.cell),
            "step": self.step_count,
            "terminal": self._terminal,
            "config": self.config.to_payload(),
        }


_DATA_DIR = Path(__file__).parent / "data"


def default_grid_path() -> Path:
    return _DATA_DIR / "gridworld_default.txt"


def load_default_grid() -> GridConfig:
    return GridConfig.from_text(default_grid_path().read_text())
