"""Rasterizer determinism, palette, stacking, golden image."""

from pathlib import Path

import numpy as np
import pytest

from intervenidar.game import new_game, step
from intervenidar.render import (
    PALETTE,
    from_pgm,
    observe,
    render,
    tile_pixel_mask,
    to_pgm,
)

GOLDEN = Path(__file__).parent / "golden" / "default_start.pgm"


class TestRender:
    def test_two_renders_identical_bytes(self, default_config):
        state = new_game(default_config)
        assert render(state).tobytes() == render(state).tobytes()

    def test_golden_image(self, default_config):
        frame = render(new_game(default_config))
        assert to_pgm(frame) == GOLDEN.read_bytes()

    def test_pgm_round_trip(self, default_config):
        frame = render(new_game(default_config))
        assert np.array_equal(from_pgm(to_pgm(frame)), frame)

    def test_palette_confinement(self, default_config):
        state = new_game(default_config)
        for action in [1, 1, 2, 4, 3]:
            step(state, action)
        assert set(np.unique(render(state))) <= set(PALETTE)

    def test_filled_segment_changes_exactly_its_tiles(self, default_config):
        base = new_game(default_config)
        changed = new_game(default_config)
        seg = changed.board.segments[0]
        changed.painted.update(seg.tiles)
        diff = render(base) != render(changed)
        allowed = tile_pixel_mask(base, seg.tiles)
        assert diff.any()
        assert not (diff & ~allowed).any()

    def test_hidden_bookkeeping_invisible(self, default_config):
        a = new_game(default_config)
        b = new_game(default_config)
        b.step_count = 41
        b.score = 12
        assert render(a).tobytes() == render(b).tobytes()

    def test_visible_latent_changes_change_frame(self, default_config):
        base = new_game(default_config)
        moved = new_game(default_config)
        moved.player.tile = (12, 9)
        assert render(base).tobytes() != render(moved).tobytes()
        shifted = new_game(default_config)
        shifted.enemies[0].tile = (1, 0)
        assert render(base).tobytes() != render(shifted).tobytes()


class TestObserve:
    def test_single_state_padded_to_four(self, default_config):
        frame = render(new_game(default_config))
        stack = observe([frame])
        assert stack.shape == (4, *frame.shape)
        for i in range(4):
            assert np.array_equal(stack[i], frame)

    def test_chronological_order(self, default_config):
        state = new_game(default_config)
        frames = [render(state)]
        for action in [1, 1, 1]:
            step(state, action)
            frames.append(render(state))
        stack = observe(frames)
        for i, frame in enumerate(frames):
            assert np.array_equal(stack[i], frame)

    def test_only_last_four_used(self, default_config):
        state = new_game(default_config)
        frames = [render(state)]
        for action in [1, 1, 1, 1]:
            step(state, action)
            frames.append(render(state))
        stack = observe(frames)
        assert np.array_equal(stack[0], frames[1])
        assert np.array_equal(stack[3], frames[4])

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            observe([])
