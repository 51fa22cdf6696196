"""Independent brute-force oracles the tests check implementations against.

Everything here is deliberately written with different algorithms from the
package: exhaustive enumeration instead of graph search, fixed-point sweeps
instead of ordered sweeps, plain loops instead of vectorized math.
"""

from __future__ import annotations

import itertools
import math

from intervenidar.gridworld import GridConfig


def _oracle_step(config: GridConfig, cell, action):
    """Independent stepper: (next_cell, reward, terminal); None if off-grid."""
    deltas = ((1, 0), (1, -1), (1, 1))
    target = (cell[0] + deltas[action][0], cell[1] + deltas[action][1])
    if not (0 <= target[0] < config.width and 0 <= target[1] < config.height):
        return None
    if target in config.walls:
        return None
    reward = 1.0 if target == config.goal else 0.0
    terminal = target == config.goal or target[0] == config.width - 1
    return target, reward, terminal


def enumerate_reachable(config: GridConfig) -> frozenset:
    """Reachable cells by simulating every action sequence up to grid width."""
    visited = {config.start}
    if config.is_terminal(config.start):
        return frozenset(visited)
    for length in range(1, config.width):
        for seq in itertools.product(range(3), repeat=length):
            cell = config.start
            for action in seq:
                out = _oracle_step(config, cell, action)
                if out is None:
                    break
                cell, _, terminal = out
                visited.add(cell)
                if terminal:
                    break
    return frozenset(visited)


def enumerate_partition(config: GridConfig, policy):
    """(on, off, unreachable) via independent enumeration and policy walk."""
    on = {config.start}
    cell = config.start
    while not config.is_terminal(cell):
        out = _oracle_step(config, cell, policy(cell))
        if out is None:
            raise ValueError(f"policy leaves the grid at {cell}")
        cell = out[0]
        on.add(cell)
    reachable = enumerate_reachable(config)
    all_open = {
        (c, r)
        for c in range(config.width)
        for r in range(config.height)
        if (c, r) not in config.walls
    }
    return frozenset(on), frozenset(reachable - on), frozenset(all_open - reachable)


def value_iteration_fixed_point(config: GridConfig, tol: float = 1e-12) -> dict:
    """Optimal values by unordered fixed-point sweeps (not a DAG sweep)."""
    cells = [
        (c, r)
        for c in range(config.width)
        for r in range(config.height)
        if (c, r) not in config.walls
    ]
    values = {cell: 0.0 for cell in cells}
    for _ in range(10 * len(cells)):
        delta = 0.0
        for cell in cells:
            if config.is_terminal(cell):
                continue
            best = 0.0
            for action in range(3):
                out = _oracle_step(config, cell, action)
                if out is None:
                    continue
                target, reward, terminal = out
                best = max(best, reward + (0.0 if terminal else values[target]))
            delta = max(delta, abs(best - values[cell]))
            values[cell] = best
        if delta <= tol:
            break
    return values


def nearest_distances_bruteforce(points, reference) -> list[float]:
    """All-pairs nearest-neighbor distances with plain loops."""
    out = []
    for p in points:
        best = math.inf
        for q in reference:
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))
            best = min(best, d)
        out.append(best)
    return out


def multiset_intersection_size(a, b) -> int:
    """Naive multiset intersection count."""
    pool = list(b)
    count = 0
    for item in a:
        if item in pool:
            pool.remove(item)
            count += 1
    return count
