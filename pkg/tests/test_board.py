"""Board derivation, validation defects, config round-trips."""

import pytest

from intervenidar.board import Board, BoardError, EnemyConfig, GameConfig, load_default_config, save_config

# Small hand-checkable lattice: 2 horizontal lines, 3 vertical, 9x5 tiles.
SMALL_ROWS = [
    "+---+---+",
    "|...|...|",
    "|...|...|",
    "|...|...|",
    "+---+---+",
]


class TestDerivation:
    def test_small_lattice_segments(self):
        board = Board(SMALL_ROWS)
        horizontal = [s for s in board.segments if s.orientation == "h"]
        vertical = [s for s in board.segments if s.orientation == "v"]
        assert len(horizontal) == 4
        assert len(vertical) == 3
        assert board.intersections == frozenset(
            {(0, 0), (4, 0), (8, 0), (0, 4), (4, 4), (8, 4)}
        )

    def test_segment_endpoints_are_intersections(self):
        board = Board(SMALL_ROWS)
        for seg in board.segments:
            assert seg.a in board.intersections
            assert seg.b in board.intersections
            assert seg.tiles[0] == seg.a and seg.tiles[-1] == seg.b

    def test_segment_ids_stable(self):
        a = Board(SMALL_ROWS)
        b = Board(SMALL_ROWS)
        assert [(s.id, s.a, s.b) for s in a.segments] == [(s.id, s.a, s.b) for s in b.segments]

    def test_canonical_rows_round_trip(self):
        board = Board(list(SMALL_ROWS))
        again = Board(board.rows)
        assert again == board


class TestValidation:
    def test_dangling_track_rejected(self):
        rows = list(SMALL_ROWS)
        rows[2] = "|..-|...|"  # stub tile hanging off the vertical line
        with pytest.raises(BoardError) as exc:
            Board(rows)
        assert "segment endpoint" in str(exc.value)

    def test_disconnected_track_rejected(self):
        rows = [
            "+-+..+-+",
            "|.|..|.|",
            "+-+..+-+",
        ]
        with pytest.raises(BoardError) as exc:
            Board(rows)
        assert exc.value.defect == "disconnected track"

    def test_unknown_character_rejected(self):
        with pytest.raises(BoardError):
            Board(["+-?-+"])

    def test_player_start_off_track_rejected(self):
        board = Board(SMALL_ROWS)
        with pytest.raises(BoardError) as exc:
            GameConfig(name="t", board=board, player_start=(1, 1))
        assert exc.value.defect == "player start off track"

    def test_lookup_table_gap_rejected(self):
        board = Board(SMALL_ROWS)
        enemy = EnemyConfig(id=0, protocol="lookup", start=(0, 0), table=((0, 0), (4, 0)))
        with pytest.raises(BoardError) as exc:
            GameConfig(name="t", board=board, player_start=(2, 0), enemies=[enemy])
        assert exc.value.defect == "lookup table step not adjacent"

    def test_lookup_table_off_track_rejected(self):
        board = Board(SMALL_ROWS)
        enemy = EnemyConfig(id=0, protocol="lookup", start=(1, 1), table=((1, 1), (1, 0)))
        with pytest.raises(BoardError):
            GameConfig(name="t", board=board, player_start=(2, 0), enemies=[enemy])


class TestPerimeter:
    def test_rectangle_perimeter(self):
        board = Board(SMALL_ROWS)
        cycle = board.perimeter_cycle()
        assert len(cycle) == 2 * (8 + 4)
        assert len(set(cycle)) == len(cycle)
        assert cycle[0] == (0, 0)
        # clockwise: second tile heads east along the top row
        assert cycle[1] == (1, 0)

    def test_default_board_perimeter(self, default_config):
        cycle = default_config.board.perimeter_cycle()
        assert len(cycle) == 2 * (28 + 20)
        assert len(set(cycle)) == len(cycle)


class TestDefaultConfig:
    def test_exactly_88_segments(self, default_config):
        assert len(default_config.board.segments) == 88

    def test_five_enemies(self, default_config):
        assert len(default_config.enemies) == 5

    def test_pinned_config_hash(self, default_config):
        assert (
            default_config.config_hash
            == "9e409c98749f2b6d0d35ca6989235f89cd4c7810052ba6609b668f50e8bea9b8"
        )

    def test_save_load_round_trip(self, default_config, tmp_path):
        out = tmp_path / "board.yaml"
        save_config(default_config, out)
        from intervenidar.board import load_config

        again = load_config(out)
        assert again.config_hash == default_config.config_hash

    def test_segment_list_cross_checked(self, tmp_path, default_config):
        import yaml

        from intervenidar.board import default_config_path, load_config

        raw = yaml.safe_load(default_config_path().read_text())
        raw["segments"][0]["orientation"] = "v"  # corrupt the listing
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(raw))
        with pytest.raises(BoardError) as exc:
            load_config(bad)
        assert exc.value.defect == "segment list mismatch"

    def test_shipped_file_matches_generator(self, default_config):
        import importlib.util
        from pathlib import Path

        spec = importlib.util.spec_from_file_location(
            "genboard", Path(__file__).parents[1] / "tools" / "generate_default_board.py"
        )
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        assert module.build_config().config_hash == default_config.config_hash
