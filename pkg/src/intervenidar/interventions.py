"""Declarative, validated start-state modifications producing unreachable states.

Two intervention classes over five kinds: existential (ER enemy removal,
ALS segment addition) and parameterized (ES enemy shift, FLS segment
filling, PRS player relocation).  Every application operates on a copy of
the start state, records its resolved random choices and the constraints it
checked, and must change the latent state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .board import Board, GameConfig, Tile
from .game import EntityState, GameState, enemy_advance, new_game
from .rng import stream

KINDS = ("ER", "ES", "ALS", "FLS", "PRS")

ER_RANGE = (1, 4)
ES_RANGE = (1, 20)
FLS_RANGE = (1, 4)
PRS_BUFFER = 2  # Chebyshev distance; >= 2 leaves one tile of clearance


class InterventionError(ValueError):
    pass


class InfeasibleInterventionError(InterventionError):
    """No valid placement exists; the input state is left unchanged."""


@dataclass(frozen=True)
class Intervention:
    kind: str
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InterventionError(f"unknown intervention kind {self.kind!r}")
        if self.kind == "ER" and not ER_RANGE[0] <= self.params.get("count", 0) <= ER_RANGE[1]:
            raise InterventionError("ER removal count must lie in [1, 4]")
        if self.kind == "ES" and not ES_RANGE[0] <= self.params.get("shift", 0) <= ES_RANGE[1]:
            raise InterventionError("ES shift must lie in [1, 20]")
        if self.kind == "FLS" and not FLS_RANGE[0] <= self.params.get("count", 0) <= FLS_RANGE[1]:
            raise InterventionError("FLS count must lie in [1, 4]")

    def to_payload(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_payload(cls, payload: dict) -> "Intervention":
        return cls(kind=payload["kind"], seed=int(payload["seed"]), params=dict(payload.get("params", {})))


@dataclass
class InterventionReport:
    intervention: Intervention
    resolved: dict
    pre_digest: str
    post_digest: str
    checks: list[tuple[str, bool]]

    def to_payload(self) -> dict:
        return {
            "intervention": self.intervention.to_payload(),
            "resolved": self.resolved,
            "pre_digest": self.pre_digest,
            "post_digest": self.post_digest,
            "checks": [[name, ok] for name, ok in self.checks],
        }


def sample_condition(kind: str, seed: int, base_config: GameConfig | None = None) -> Intervention:
    """Draw an intervention's parameters uniformly from their ranges."""
    if kind not in KINDS:
        raise InterventionError(f"unknown intervention kind {kind!r}")
    rng = stream(seed, "intervention-sample", kind)
    params: dict = {}
    if kind == "ER":
        params["count"] = rng.randint(*ER_RANGE)
    elif kind == "ES":
        params["shift"] = rng.randint(*ES_RANGE)
    elif kind == "FLS":
        params["count"] = rng.randint(*FLS_RANGE)
    return Intervention(kind=kind, seed=seed, params=params)


def apply(state: GameState, iv: Intervention) -> tuple[GameState, InterventionReport]:
    """Apply an intervention to a start state, returning a modified copy."""
    if state.step_count != 0 or state.terminal:
        raise InterventionError("interventions apply to start states only (step counter 0)")
    rng = stream(iv.seed, "intervention-apply", iv.kind)
    out = state.copy()
    handler = {
        "ER": _apply_er,
        "ES": _apply_es,
        "ALS": _apply_als,
        "FLS": _apply_fls,
        "PRS": _apply_prs,
    }[iv.kind]
    resolved, checks = handler(out, iv, rng)
    failed = [name for name, ok in checks if not ok]
    if failed:
        raise InterventionError(f"{iv.kind} violated constraints: {failed}")
    pre, post = state.latent_digest(), out.latent_digest()
    if pre == post:
        raise InterventionError(f"{iv.kind} did not change the latent state")
    return out, InterventionReport(iv, resolved, pre, post, checks)


def _apply_er(out: GameState, iv: Intervention, rng) -> tuple[dict, list]:
    count = iv.params["count"]
    if count > len(out.enemies):
        raise InfeasibleInterventionError(
            f"ER: cannot remove {count} of {len(out.enemies)} enemies"
        )
    before = len(out.enemies)
    removed = sorted(rng.sample(sorted(e.id for e in out.enemies), count))
    out.enemies = [e for e in out.enemies if e.id not in removed]
    checks = [
        ("removal count in [1, 4]", ER_RANGE[0] <= count <= ER_RANGE[1]),
        ("enemy count decreased by count", len(out.enemies) == before - count),
    ]
    return {"removed_ids": removed}, checks


def _apply_es(out: GameState, iv: Intervention, rng) -> tuple[dict, list]:
    if not out.enemies:
        raise InfeasibleInterventionError("ES: no enemies to shift")
    shift = iv.params["shift"]
    enemy = rng.choice(sorted(out.enemies, key=lambda e: e.id))
    if enemy.protocol == "lookup":
        enemy.offset += shift
        enemy.tile = enemy.table[(out.step_count + enemy.offset) % len(enemy.table)]
    else:
        advanced = enemy
        for i in range(shift):
            advanced = enemy_advance(advanced, out.board, i)
        enemy.tile, enemy.heading = advanced.tile, advanced.heading
    checks = [
        ("shift in [1, 20]", ES_RANGE[0] <= shift <= ES_RANGE[1]),
        ("enemy stays on track", enemy.tile in out.board.track),
    ]
    return {"enemy_id": enemy.id, "shift": shift, "tile": list(enemy.tile)}, checks


def als_candidates(board: Board) -> list[tuple[int, int, int]]:
    """Valid vertical-segment insertions ``(x, y_top, y_bottom)``.

    Both endpoints must lie on existing horizontal track; every tile
    strictly between them must currently be empty (no overlap with existing
    vertical segments) and must not touch track sideways, which would fuse
    the new run with a neighboring line instead of adding one segment.
    """
    out = []
    for x in range(board.width):
        horizontal_ys = sorted(
            y
            for (xx, y) in board.track
            if xx == x and ((x - 1, y) in board.track or (x + 1, y) in board.track)
        )
        for y1, y2 in itertools.combinations(horizontal_ys, 2):
            if y2 - y1 < 2:
                continue
            between = [(x, y) for y in range(y1 + 1, y2)]
            clear = all(
                t not in board.track
                and (t[0] - 1, t[1]) not in board.track
                and (t[0] + 1, t[1]) not in board.track
                for t in between
            )
            if clear:
                out.append((x, y1, y2))
    return out


def _apply_als(out: GameState, iv: Intervention, rng) -> tuple[dict, list]:
    candidates = als_candidates(out.board)
    if not candidates:
        raise InfeasibleInterventionError("ALS: no valid vertical-segment location")
    x, y1, y2 = rng.choice(sorted(candidates))
    rows = [list(r) for r in out.board.rows]
    for y in range(y1, y2 + 1):
        if rows[y][x] == ".":
            rows[y][x] = "|"
    vertical_before = sum(1 for s in out.board.segments if s.orientation == "v")
    new_board = Board(["".join(r) for r in rows])
    out.board = new_board
    out._rebuild_caches()
    out.score = out.filled_count
    vertical_after = sum(1 for s in new_board.segments if s.orientation == "v")
    checks = [
        ("endpoints on existing track", (x, y1) in out.board.track and (x, y2) in out.board.track),
        ("exactly one vertical segment added", vertical_after == vertical_before + 1),
        (
            "endpoints are intersections",
            (x, y1) in out.board.intersections and (x, y2) in out.board.intersections,
        ),
    ]
    return {"x": x, "y_top": y1, "y_bottom": y2}, checks


def _apply_fls(out: GameState, iv: Intervention, rng) -> tuple[dict, list]:
    count = iv.params["count"]
    unfilled = [s for s in out.board.segments if out._remaining[s.id] > 0]
    chosen = _pick_non_adjacent(out.board, unfilled, count, rng)
    if chosen is None:
        raise InfeasibleInterventionError(
            f"FLS: fewer than {count} pairwise non-adjacent unfilled segments available"
        )
    for seg in chosen:
        out.painted.update(seg.tiles)
    out._rebuild_caches()
    out.score = out.filled_count
    pairwise_ok = all(
        not out.board.segment_adjacent(a, b) for a, b in itertools.combinations(chosen, 2)
    )
    checks = [
        ("count in [1, 4]", FLS_RANGE[0] <= count <= FLS_RANGE[1]),
        ("segments pairwise non-adjacent", pairwise_ok),
        ("chosen segments now filled", all(out._remaining[s.id] == 0 for s in chosen)),
        ("score equals filled segment count", out.score == out.filled_count),
    ]
    return {"segment_ids": sorted(s.id for s in chosen)}, checks


def _pick_non_adjacent(board: Board, segments: list, count: int, rng):
    if len(segments) < count:
        return None
    # Random greedy passes first; fall back to systematic search so that
    # feasibility never depends on greedy luck.
    for _ in range(50):
        order = sorted(segments, key=lambda s: s.id)
        rng.shuffle(order)
        picked: list = []
        for seg in order:
            if all(not board.segment_adjacent(seg, p) for p in picked):
                picked.append(seg)
                if len(picked) == count:
                    return picked
    for combo in itertools.combinations(sorted(segments, key=lambda s: s.id), count):
        if all(not board.segment_adjacent(a, b) for a, b in itertools.combinations(combo, 2)):
            return list(combo)
    return None


def _apply_prs(out: GameState, iv: Intervention, rng) -> tuple[dict, list]:
    old = out.player.tile
    candidates = sorted(
        t
        for t in out.board.track
        if t != old
        and all(t != e.tile for e in out.enemies)
        and all(_chebyshev(t, e.tile) >= PRS_BUFFER for e in out.enemies)
    )
    if not candidates:
        raise InfeasibleInterventionError("PRS: no unoccupied tile clears the enemy buffer")
    target = rng.choice(candidates)
    out.player.tile = target
    out.painted.add(target)
    # The spawn paint follows the player; keep the old tile only if a filled
    # segment depends on it (composition with FLS).
    if not any(
        out._remaining[sid] == 0 and old in out.board.segments[sid].tiles
        for sid in out.board.segments_at(old)
    ):
        out.painted.discard(old)
    out._rebuild_caches()
    out.score = out.filled_count
    checks = [
        ("target on track", target in out.board.track),
        ("target unoccupied", all(target != e.tile for e in out.enemies)),
        (
            "buffer of one tile from every enemy",
            all(_chebyshev(target, e.tile) >= PRS_BUFFER for e in out.enemies),
        ),
    ]
    return {"tile": list(target), "previous": list(old)}, checks


def _chebyshev(a: Tile, b: Tile) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class UnreachabilityVerdict:
    unreachable: bool  # True only when statically proven
    justification: str

    def __bool__(self) -> bool:
        return self.unreachable


def verify_unreachable(state: GameState, base_config: GameConfig) -> UnreachabilityVerdict:
    """Statically prove a state unreachable from the canonical start, if possible.

    All checks are sound: board topology and the enemy roster are invariant
    under gameplay, and at step 0 the only reachable state is the canonical
    start itself.  Returns an "unknown" verdict when no proof applies.
    """
    base = new_game(base_config)
    if state.board != base.board:
        return UnreachabilityVerdict(True, "segment set mutated: no action changes board topology")
    if sorted(e.id for e in state.enemies) != sorted(e.id for e in base.enemies):
        return UnreachabilityVerdict(True, "enemy roster mutated: no action adds or removes enemies")
    if state.step_count == 0:
        if state.player.tile != base.player.tile:
            return UnreachabilityVerdict(
                True, "player displaced at start: position differs from the unique start position"
            )
        if state.painted - {state.player.tile}:
            return UnreachabilityVerdict(
                True, "paint without traversal: painted tiles the player never visited"
            )
        base_enemies = {e.id: e for e in base.enemies}
        for e in state.enemies:
            b = base_enemies[e.id]
            if e.dynamic_payload() != b.dynamic_payload() or e.table != b.table:
                return UnreachabilityVerdict(
                    True, f"enemy {e.id} deviates from its canonical start state"
                )
        if state.latent_digest() != base.latent_digest():
            return UnreachabilityVerdict(True, "latent state differs from the canonical start")
        return UnreachabilityVerdict(False, "unknown: matches the canonical start state")
    return UnreachabilityVerdict(False, "unknown: no static proof applies beyond step 0")
