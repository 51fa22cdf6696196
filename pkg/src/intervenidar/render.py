"""Deterministic software rasterizer: grayscale frames and 4-frame stacks.

Frames are pure functions of latent game state.  Each board tile maps to a
``TILE_PIXELS`` x ``TILE_PIXELS`` block at one of five fixed intensity
bands; there is no downsampling or cropping stage, agents that want a
different geometry preprocess frames themselves.
"""

from __future__ import annotations

import numpy as np

from .game import GameState

TILE_PIXELS = 4

# Grayscale palette bands, pinned for golden-image tests.
BACKGROUND = 0
TRACK_UNPAINTED = 64
TRACK_PAINTED = 144
ENEMY = 208
PLAYER = 255

PALETTE = (BACKGROUND, TRACK_UNPAINTED, TRACK_PAINTED, ENEMY, PLAYER)

FRAME_STACK = 4


def frame_shape(state: GameState) -> tuple[int, int]:
    return (state.board.height * TILE_PIXELS, state.board.width * TILE_PIXELS)


def render(state: GameState) -> np.ndarray:
    """Rasterize one state to a (height, width) uint8 frame.

    Draw order: track, paint, enemies, player; later layers win the tile.
    Hidden bookkeeping (step counter, score) does not affect the frame.
    """
    frame = np.full(frame_shape(state), BACKGROUND, dtype=np.uint8)
    for tile in state.board.track:
        _fill_tile(frame, tile, TRACK_UNPAINTED)
    for tile in state.painted:
        _fill_tile(frame, tile, TRACK_PAINTED)
    for enemy in state.enemies:
        _fill_tile(frame, enemy.tile, ENEMY)
    _fill_tile(frame, state.player.tile, PLAYER)
    return frame


def _fill_tile(frame: np.ndarray, tile: tuple[int, int], value: int) -> None:
    x, y = tile
    frame[
        y * TILE_PIXELS : (y + 1) * TILE_PIXELS,
        x * TILE_PIXELS : (x + 1) * TILE_PIXELS,
    ] = value


def observe(frames: list[np.ndarray]) -> np.ndarray:
    """Stack the last four frames, earliest first.

    Shorter histories are front-padded by repeating the earliest frame;
    histories longer than four use only the last four.
    """
    if not frames:
        raise ValueError("observation requires at least one frame")
    recent = list(frames[-FRAME_STACK:])
    recent = [recent[0]] * (FRAME_STACK - len(recent)) + recent
    return np.stack(recent, axis=0)


def observation_from_states(states: list[GameState]) -> np.ndarray:
    return observe([render(s) for s in states])


def tile_pixel_mask(state: GameState, tiles) -> np.ndarray:
    """Boolean mask of the pixels covered by the given tiles."""
    mask = np.zeros(frame_shape(state), dtype=bool)
    for tile in tiles:
        _fill_tile(mask, tile, True)
    return mask


def to_pgm(frame: np.ndarray) -> bytes:
    """Encode a frame as binary PGM (P5), a standard uncompressed format."""
    if frame.ndim != 2 or frame.dtype != np.uint8:
        raise ValueError("expected a 2-d uint8 frame")
    h, w = frame.shape
    return b"P5\n%d %d\n255\n" % (w, h) + frame.tobytes()


def from_pgm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5\n"):
        raise ValueError("not a binary PGM file")
    rest = data[3:]
    dims, rest = rest.split(b"\n", 1)
    maxval, raw = rest.split(b"\n", 1)
    w, h = (int(v) for v in dims.split())
    if int(maxval) != 255:
        raise ValueError("expected 8-bit PGM")
    return np.frombuffer(raw, dtype=np.uint8, count=w * h).reshape(h, w).copy()
