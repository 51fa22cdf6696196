"""Regenerate the shipped default board config.

The default board is a 29x21 tile lattice: 6 horizontal lines, 8 vertical
lines, plus two short extra rungs, which yields exactly 88 line segments.
Five lookup-table enemies patrol fixed loops; the player starts mid-board on
a tile that no default loop crosses.  Run from the repo root:

    python tools/generate_default_board.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from intervenidar.board import Board, EnemyConfig, GameConfig, save_config

XS = [0, 4, 8, 12, 16, 20, 24, 28]
YS = [0, 4, 8, 12, 16, 20]
WIDTH, HEIGHT = 29, 21
RUNGS = [(2, 0, 4), (26, 16, 20)]  # (x, y_top, y_bottom)
PLAYER_START = (12, 10)


def build_rows() -> list[str]:
    track = set()
    for y in YS:
        track.update((x, y) for x in range(WIDTH))
    for x in XS:
        track.update((x, y) for y in range(HEIGHT))
    for x, y1, y2 in RUNGS:
        track.update((x, y) for y in range(y1, y2 + 1))
    return [
        "".join("+" if (x, y) in track else "." for x in range(WIDTH))
        for y in range(HEIGHT)
    ]


def rect_cycle(x1: int, y1: int, x2: int, y2: int) -> list[tuple[int, int]]:
    tiles = [(x, y1) for x in range(x1, x2)]
    tiles += [(x2, y) for y in range(y1, y2)]
    tiles += [(x, y2) for x in range(x2, x1, -1)]
    tiles += [(x1, y) for y in range(y2, y1, -1)]
    return tiles


def rotate_to(cycle: list, start: tuple[int, int]) -> list:
    i = cycle.index(start)
    return cycle[i:] + cycle[:i]


def reversed_cycle(cycle: list) -> list:
    return [cycle[0]] + cycle[1:][::-1]


def build_config() -> GameConfig:
    board = Board(build_rows())
    outer = rect_cycle(0, 0, 28, 20)
    loops = [
        rotate_to(outer, (0, 0)),
        reversed_cycle(rotate_to(outer, (28, 0))),
        rotate_to(rect_cycle(4, 4, 8, 12), (4, 4)),
        rotate_to(rect_cycle(16, 8, 24, 16), (16, 8)),
        reversed_cycle(rotate_to(rect_cycle(8, 0, 20, 8), (20, 8))),
    ]
    enemies = [
        EnemyConfig(id=i, protocol="lookup", start=tuple(loop[0]), table=tuple(map(tuple, loop)))
        for i, loop in enumerate(loops)
    ]
    return GameConfig(name="default", board=board, player_start=PLAYER_START, enemies=enemies)


def main() -> None:
    config = build_config()
    assert len(config.board.segments) == 88, len(config.board.segments)
    assert len(config.enemies) == 5
    out = Path(__file__).resolve().parents[1] / "src" / "intervenidar" / "data" / "default_board.yaml"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_config(config, out)
    print(f"wrote {out} ({len(config.board.segments)} segments, hash {config.config_hash[:12]}...)")


if __name__ == "__main__":
    main()
