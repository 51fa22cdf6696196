"""Track board model: tile grid, intersections, line segments, game config.

A board is fully determined by its tile map (which tiles carry track).  A
tile is an *intersection* when it has track neighbors both horizontally and
vertically; a *line segment* is a maximal horizontal or vertical track run
between two adjacent intersections, inclusive of both endpoints.  Every
track tile must belong to at least one segment and the track graph must be
connected; boards violating this are rejected with a named defect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import yaml

from .hashing import digest_payload

Tile = tuple[int, int]

HEADINGS = ("N", "E", "S", "W")
HEADING_DELTAS: dict[str, Tile] = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}

TRACK_CHARS = {"-", "|", "+"}
EMPTY_CHAR = "."


class BoardError(ValueError):
    """Board or game config validation failure; ``defect`` names the problem."""

    def __init__(self, defect: str, detail: str = ""):
        self.defect = defect
        super().__init__(f"{defect}: {detail}" if detail else defect)


@dataclass(frozen=True)
class LineSegment:
    """Track run between two intersections, inclusive of both endpoints."""

    id: int
    orientation: str  # "h" or "v"
    a: Tile  # lexicographically first endpoint
    b: Tile
    tiles: tuple[Tile, ...]

    def interior(self) -> tuple[Tile, ...]:
        return self.tiles[1:-1]


def _neighbors(tile: Tile) -> Iterable[tuple[str, Tile]]:
    x, y = tile
    for h, (dx, dy) in HEADING_DELTAS.items():
        yield h, (x + dx, y + dy)


class Board:
    """Immutable track layout derived from a tile map.

    ``rows`` is the canonical representation: one string per row, ``.`` for
    empty tiles and any of ``- | +`` for track.  Intersections and segments
    are derived, with segment ids assigned in a fixed sort order so that a
    given tile map always yields the same ids.
    """

    def __init__(self, rows: list[str]):
        if not rows or not rows[0]:
            raise BoardError("empty board")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise BoardError("ragged tile map")
        bad = {c for r in rows for c in r} - TRACK_CHARS - {EMPTY_CHAR}
        if bad:
            raise BoardError("unknown tile character", repr(sorted(bad)))

        self.width = width
        self.height = len(rows)
        self.track: frozenset[Tile] = frozenset(
            (x, y) for y, r in enumerate(rows) for x, c in enumerate(r) if c != EMPTY_CHAR
        )
        if not self.track:
            raise BoardError("empty track")
        self.intersections = self._derive_intersections()
        self.segments = self._derive_segments()
        self._validate()
        self.rows = self._canonical_rows()

        self._tile_segments: dict[Tile, tuple[int, ...]] = {}
        for seg in self.segments:
            for t in seg.tiles:
                self._tile_segments[t] = self._tile_segments.get(t, ()) + (seg.id,)
        self._perimeter: tuple[Tile, ...] | None = None
        self._perimeter_index: dict[Tile, int] | None = None
        self.static_digest = digest_payload(self.to_payload())

    # -- derivation ----------------------------------------------------------

    def is_track(self, tile: Tile) -> bool:
        return tile in self.track

    def _derive_intersections(self) -> frozenset[Tile]:
        out = set()
        for t in self.track:
            horiz = any(n in self.track for h, n in _neighbors(t) if h in ("E", "W"))
            vert = any(n in self.track for h, n in _neighbors(t) if h in ("N", "S"))
            if horiz and vert:
                out.add(t)
        return frozenset(out)

    def _derive_segments(self) -> tuple[LineSegment, ...]:
        raw: list[tuple[str, Tile, Tile, tuple[Tile, ...]]] = []
        for y in range(self.height):
            xs = sorted(x for (x, yy) in self.intersections if yy == y)
            for x1, x2 in zip(xs, xs[1:]):
                tiles = tuple((x, y) for x in range(x1, x2 + 1))
                if all(t in self.track for t in tiles):
                    raw.append(("h", (x1, y), (x2, y), tiles))
        for x in range(self.width):
            ys = sorted(y for (xx, y) in self.intersections if xx == x)
            for y1, y2 in zip(ys, ys[1:]):
                tiles = tuple((x, y) for y in range(y1, y2 + 1))
                if all(t in self.track for t in tiles):
                    raw.append(("v", (x, y1), (x, y2), tiles))
        raw.sort(key=lambda s: (s[0], s[1][1], s[1][0], s[2][1], s[2][0]))
        return tuple(
            LineSegment(id=i, orientation=o, a=a, b=b, tiles=tiles)
            for i, (o, a, b, tiles) in enumerate(raw)
        )

    def _validate(self) -> None:
        covered = {t for seg in self.segments for t in seg.tiles}
        dangling = self.track - covered
        if dangling:
            raise BoardError(
                "segment endpoint not an intersection",
                f"track tile(s) not covered by any segment: {sorted(dangling)[:4]}",
            )
        seen = set()
        frontier = [next(iter(sorted(self.track)))]
        while frontier:
            t = frontier.pop()
            if t in seen:
                continue
            seen.add(t)
            frontier.extend(n for _, n in _neighbors(t) if n in self.track and n not in seen)
        if seen != set(self.track):
            raise BoardError("disconnected track", f"{len(self.track) - len(seen)} tiles unreachable")

    def _canonical_rows(self) -> list[str]:
        rows = []
        for y in range(self.height):
            chars = []
            for x in range(self.width):
                if (x, y) not in self.track:
                    chars.append(EMPTY_CHAR)
                elif (x, y) in self.intersections:
                    chars.append("+")
                elif (x + 1, y) in self.track or (x - 1, y) in self.track:
                    chars.append("-")
                else:
                    chars.append("|")
            rows.append("".join(chars))
        return rows

    # -- queries -------------------------------------------------------------

    def segments_at(self, tile: Tile) -> tuple[int, ...]:
        return self._tile_segments.get(tile, ())

    def segment_adjacent(self, a: LineSegment, b: LineSegment) -> bool:
        """Segments are adjacent when they share an endpoint intersection."""
        return bool({a.a, a.b} & {b.a, b.b})

    def perimeter_cycle(self) -> tuple[Tile, ...]:
        """Outer boundary of the track, traced clockwise from the top-left.

        The walk keeps the outside on its left (preference left, straight,
        right, back), so on a rectangular outer loop it visits each boundary
        tile exactly once.
        """
        if self._perimeter is not None:
            return self._perimeter
        start = min(self.track, key=lambda t: (t[1], t[0]))
        heading = "E" if self._step(start, "E") in self.track else "S"
        moves: list[tuple[Tile, Tile]] = []
        pos, h = start, heading
        for _ in range(8 * self.width * self.height):
            nxt, nh = self._boundary_move(pos, h)
            if moves and (pos, nxt) == moves[0]:
                break
            moves.append((pos, nxt))
            pos, h = nxt, nh
        else:
            raise BoardError("perimeter trace did not close")
        self._perimeter = tuple(m[0] for m in moves)
        return self._perimeter

    def perimeter_index(self, tile: Tile) -> int:
        """Index of a tile in the perimeter cycle; KeyError when off it."""
        if self._perimeter_index is None:
            # first occurrence wins for degenerate twice-visited boundaries
            index: dict[Tile, int] = {}
            for i, t in enumerate(self.perimeter_cycle()):
                index.setdefault(t, i)
            self._perimeter_index = index
        return self._perimeter_index[tile]

    def _boundary_move(self, pos: Tile, h: str) -> tuple[Tile, str]:
        i = HEADINGS.index(h)
        for cand in (HEADINGS[(i - 1) % 4], h, HEADINGS[(i + 1) % 4], HEADINGS[(i + 2) % 4]):
            nxt = self._step(pos, cand)
            if nxt in self.track:
                return nxt, cand
        raise BoardError("isolated track tile", str(pos))

    @staticmethod
    def _step(tile: Tile, heading: str) -> Tile:
        dx, dy = HEADING_DELTAS[heading]
        return (tile[0] + dx, tile[1] + dy)

    # -- serialization -------------------------------------------------------

    def to_payload(self) -> dict:
        return {"width": self.width, "height": self.height, "rows": list(self.rows)}

    @classmethod
    def from_payload(cls, payload: dict) -> "Board":
        board = cls(list(payload["rows"]))
        if board.width != payload["width"] or board.height != payload["height"]:
            raise BoardError("board payload dimensions disagree with tile map")
        return board

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Board) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(tuple(self.rows))


@dataclass
class EnemyConfig:
    """Start placement and movement protocol for one enemy."""

    id: int
    protocol: str  # "lookup" | "perimeter" | "local"
    start: Tile
    table: tuple[Tile, ...] | None = None  # lookup only; start == table[0]
    orientation: str = "cw"  # perimeter only
    heading: str = "E"  # local only

    def to_payload(self) -> dict:
        out: dict = {"id": self.id, "protocol": self.protocol, "start": list(self.start)}
        if self.protocol == "lookup":
            out["table"] = [list(t) for t in self.table or ()]
        elif self.protocol == "perimeter":
            out["orientation"] = self.orientation
        elif self.protocol == "local":
            out["heading"] = self.heading
        return out

    @classmethod
    def from_payload(cls, payload: dict) -> "EnemyConfig":
        table = payload.get("table")
        return cls(
            id=int(payload["id"]),
            protocol=str(payload["protocol"]),
            start=tuple(payload["start"]),
            table=tuple(tuple(t) for t in table) if table is not None else None,
            orientation=str(payload.get("orientation", "cw")),
            heading=str(payload.get("heading", "E")),
        )


@dataclass
class GameConfig:
    """Full game configuration: board, player start, enemy roster."""

    name: str
    board: Board
    player_start: Tile
    enemies: list[EnemyConfig] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    @property
    def config_hash(self) -> str:
        return digest_payload(self.to_payload())

    def validate(self) -> None:
        if self.player_start not in self.board.track:
            raise BoardError("player start off track", str(self.player_start))
        ids = [e.id for e in self.enemies]
        if len(set(ids)) != len(ids):
            raise BoardError("duplicate enemy id")
        for e in self.enemies:
            if e.protocol not in ("lookup", "perimeter", "local"):
                raise BoardError("unknown movement protocol", e.protocol)
            if e.start not in self.board.track:
                raise BoardError("enemy start off track", f"enemy {e.id} at {e.start}")
            if e.start == self.player_start:
                raise BoardError("enemy on player start", f"enemy {e.id}")
            if e.protocol == "lookup":
                self._validate_table(e)
            elif e.protocol == "perimeter":
                if e.orientation not in ("cw", "ccw"):
                    raise BoardError("bad perimeter orientation", e.orientation)
                if e.start not in self.board.perimeter_cycle():
                    raise BoardError("perimeter enemy off perimeter", f"enemy {e.id} at {e.start}")
            elif e.protocol == "local":
                if e.heading not in HEADINGS:
                    raise BoardError("bad heading", e.heading)

    def _validate_table(self, e: EnemyConfig) -> None:
        # Tables are validated at load time so step time never sees a missing
        # or illegal entry.
        if not e.table:
            raise BoardError("lookup table missing", f"enemy {e.id}")
        if tuple(e.table[0]) != tuple(e.start):
            raise BoardError("lookup table start mismatch", f"enemy {e.id}")
        for t in e.table:
            if t not in self.board.track:
                raise BoardError("lookup table entry off track", f"enemy {e.id} at {t}")
        n = len(e.table)
        for i in range(n):
            a, b = e.table[i], e.table[(i + 1) % n]
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
                raise BoardError(
                    "lookup table step not adjacent",
                    f"enemy {e.id} index {i}: {a} -> {b}",
                )

    # -- serialization -------------------------------------------------------

    def to_payload(self) -> dict:
        return {
            "format_version": 1,
            "name": self.name,
            "board": self.board.to_payload(),
            "player": {"start": list(self.player_start)},
            "enemies": [e.to_payload() for e in self.enemies],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GameConfig":
        return cls(
            name=str(payload.get("name", "unnamed")),
            board=Board.from_payload(payload["board"]),
            player_start=tuple(payload["player"]["start"]),
            enemies=[EnemyConfig.from_payload(p) for p in payload.get("enemies", [])],
        )


def load_config(path: str | Path) -> GameConfig:
    """Load a game config from its YAML file and cross-check the segment list."""
    raw = yaml.safe_load(Path(path).read_text())
    config = GameConfig.from_payload(raw)
    listed = raw.get("segments")
    if listed is not None:
        derived = [
            {"id": s.id, "orientation": s.orientation, "a": list(s.a), "b": list(s.b)}
            for s in config.board.segments
        ]
        if listed != derived:
            raise BoardError("segment list mismatch", "file disagrees with tile map derivation")
    return config


def save_config(config: GameConfig, path: str | Path) -> None:
    payload = config.to_payload()
    payload["segments"] = [
        {"id": s.id, "orientation": s.orientation, "a": list(s.a), "b": list(s.b)}
        for s in config.board.segments
    ]
    Path(path).write_text(yaml.safe_dump(payload, sort_keys=False, default_flow_style=None))


_DATA_DIR = Path(__file__).parent / "data"


def default_config_path() -> Path:
    return _DATA_DIR / "default_board.yaml"


def load_default_config() -> GameConfig:
    return load_config(default_config_path())
