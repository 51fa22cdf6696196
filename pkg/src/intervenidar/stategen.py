"""Off-policy evaluation-state generation: k-OPA, agent swaps, human starts.

Every generated state carries provenance (config hash, seeds, the exact
action sequence) sufficient to regenerate it bit-exactly, plus the digest to
verify against.  Episodes that terminate before the requested prefix are
retried with fresh derived seeds a bounded number of times; exhausting the
retries raises an infeasibility report rather than hiding the failure.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .board import GameConfig
from .game import GameState, IntervenidarEnv
from .hashing import sha256_hex
from .mdp import Trajectory, observation_for, replay
from .rng import derive_seed, stream

DEFAULT_N_GRID = tuple(range(100, 1000, 100))
DEFAULT_K_VALUES = (10, 20)
DEFAULT_MAX_RETRIES = 25
HUMAN_ELIGIBLE_MIN_STEPS = 1000  # eligibility requires strictly more steps


class GenerationInfeasibleError(RuntimeError):
    """All retries died before the requested prefix; carries the report."""

    def __init__(self, report: dict):
        self.report = report
        super().__init__(json.dumps(report, sort_keys=True))


class OverlapGuardError(ValueError):
    """Agent-swap source coincides with the agent under evaluation."""


class CorruptArchiveEntryError(RuntimeError):
    pass


@dataclass(frozen=True)
class OffPolicySpec:
    """One off-policy generation request."""

    method: str  # "k-opa" | "agent-swap" | "human-start"
    n: int
    k: int = 0
    source: str | None = None  # alternative agent id or human trajectory id

    def __post_init__(self) -> None:
        if self.method not in ("k-opa", "agent-swap", "human-start"):
            raise ValueError(f"unknown off-policy method {self.method!r}")
        if self.n < 0 or self.k < 0:
            raise ValueError("prefix lengths must be non-negative")


@dataclass
class GeneratedState:
    state: GameState
    provenance: dict

    @property
    def digest(self) -> str:
        return self.provenance["digest"]


def kopa_state(
    agent,
    config: GameConfig,
    n: int,
    k: int,
    seed: int,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> GeneratedState:
    """State after ``n`` agent actions followed by ``k`` uniform random ones.

    The random tail draws from its own derived stream, so intervention or
    agent randomness never perturbs it.
    """
    failures = []
    for attempt in range(max_retries):
        env = IntervenidarEnv(config)
        env.reset(derive_seed(seed, "env", attempt))
        agent.begin_episode(derive_seed(seed, "kopa-agent", attempt))
        actions: list[int] = []
        survived = _drive(env, agent, n, actions)
        if survived:
            tail_rng = stream(seed, "kopa-actions", attempt)
            for _ in range(k):
                if env.terminal:
                    survived = False
                    break
                action = tail_rng.randrange(env.action_count)
                env.step(action)
                actions.append(action)
        if survived and not env.terminal:
            return GeneratedState(
                state=env.current_state.copy(),
                provenance={
                    "method": "k-opa",
                    "environment_id": env.environment_id,
                    "config_hash": env.config_hash,
                    "agent_id": agent.agent_id,
                    "seed": seed,
                    "attempt": attempt,
                    "n": n,
                    "k": k,
                    "actions": list(actions),
                    "digest": env.latent_digest(),
                },
            )
        failures.append(len(actions))
    raise GenerationInfeasibleError(
        {
            "method": "k-opa",
            "n": n,
            "k": k,
            "seed": seed,
            "agent_id": agent.agent_id,
            "attempts": max_retries,
            "survived_steps": failures,
            "message": "episode terminated before n + k actions in every retry",
        }
    )


def agent_swap_state(
    alt_agent,
    evaluated_agent_id: str,
    config: GameConfig,
    n: int,
    seed: int,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> GeneratedState:
    """State midway through an alternative agent's trajectory."""
    if alt_agent.agent_id == evaluated_agent_id:
        raise OverlapGuardError(
            f"alternative agent {alt_agent.agent_id!r} is the agent under evaluation"
        )
    failures = []
    for attempt in range(max_retries):
        env = IntervenidarEnv(config)
        env.reset(derive_seed(seed, "env", attempt))
        alt_agent.begin_episode(derive_seed(seed, "swap-agent", attempt))
        actions: list[int] = []
        if _drive(env, alt_agent, n, actions) and not env.terminal:
            return GeneratedState(
                state=env.current_state.copy(),
                provenance={
                    "method": "agent-swap",
                    "environment_id": env.environment_id,
                    "config_hash": env.config_hash,
                    "agent_id": alt_agent.agent_id,
                    "evaluated_agent_id": evaluated_agent_id,
                    "seed": seed,
                    "attempt": attempt,
                    "n": n,
                    "actions": list(actions),
                    "digest": env.latent_digest(),
                },
            )
        failures.append(len(actions))
    raise GenerationInfeasibleError(
        {
            "method": "agent-swap",
            "n": n,
            "seed": seed,
            "agent_id": alt_agent.agent_id,
            "attempts": max_retries,
            "survived_steps": failures,
            "message": "alternative agent's episode terminated before n actions in every retry",
        }
    )


def _drive(env, agent, steps: int, actions: list[int]) -> bool:
    for _ in range(steps):
        if env.terminal:
            return False
        action = int(agent.act(observation_for(env, agent)).action)
        env.step(action)
        actions.append(action)
    return True


def regenerate_state(config: GameConfig, provenance: dict) -> GameState:
    """Rebuild a generated state from its provenance and verify the digest."""
    env = IntervenidarEnv(config)
    if env.config_hash != provenance["config_hash"]:
        raise ValueError("config hash does not match provenance")
    env.reset(derive_seed(provenance["seed"], "env", provenance.get("attempt", 0)))
    for action in provenance["actions"]:
        env.step(action)
    if env.latent_digest() != provenance["digest"]:
        raise ValueError("regenerated state digest does not match provenance")
    return env.current_state.copy()


# -- human-play archive -------------------------------------------------------


class HumanPlayArchive:
    """Append-only directory of recorded human play sessions.

    One trajectory file per session plus ``index.jsonl``; index records are
    folded in order, so corrections (tombstones) append rather than rewrite.
    Corrupt entries are tombstoned, never deleted.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.jsonl"

    def entries(self, include_tombstoned: bool = False) -> dict[str, dict]:
        folded: dict[str, dict] = {}
        if self.index_path.exists():
            for line in self.index_path.read_text().splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                folded.setdefault(rec["id"], {}).update(rec)
        if include_tombstoned:
            return folded
        return {k: v for k, v in folded.items() if not v.get("tombstone")}

    def add(self, trajectory: Trajectory, player_id: str) -> dict:
        entry_id = f"{player_id}-{sha256_hex(trajectory.to_bytes())[:12]}"
        filename = f"{entry_id}.trajectory"
        trajectory.save(self.root / filename)
        record = {
            "id": entry_id,
            "file": filename,
            "player_id": player_id,
            "length": len(trajectory),
            "config_hash": trajectory.config_hash,
            "seed": trajectory.seed,
            "eligible": self.is_eligible(trajectory),
            "tombstone": False,
        }
        self._append_index(record)
        return record

    @staticmethod
    def is_eligible(trajectory: Trajectory) -> bool:
        return len(trajectory) > HUMAN_ELIGIBLE_MIN_STEPS and not trajectory.aborted

    def tombstone(self, entry_id: str, reason: str) -> None:
        self._append_index({"id": entry_id, "tombstone": True, "tombstone_reason": reason})

    def load_trajectory(self, entry_id: str) -> Trajectory:
        entry = self.entries(include_tombstoned=True).get(entry_id)
        if entry is None:
            raise KeyError(f"unknown archive entry {entry_id!r}")
        if entry.get("tombstone"):
            raise CorruptArchiveEntryError(f"entry {entry_id!r} is tombstoned")
        return Trajectory.load(self.root / entry["file"])

    def _append_index(self, record: dict) -> None:
        with self.index_path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def eligible_ids(self) -> list[str]:
        return sorted(eid for eid, e in self.entries().items() if e.get("eligible"))


def ingest_trajectory(archive: HumanPlayArchive, trajectory: Trajectory, player_id: str, config: GameConfig) -> dict:
    """Validate a session against its config by replay, then archive it."""
    report = replay(trajectory, IntervenidarEnv(config))
    if not report.match:
        raise CorruptArchiveEntryError(
            f"trajectory fails replay verification at step {report.first_divergence}"
        )
    return archive.add(trajectory, player_id)


def human_start_state(
    archive: HumanPlayArchive, trajectory_id: str, n: int, config: GameConfig
) -> GeneratedState:
    """State at step ``n`` of a replayed human trajectory."""
    trajectory = archive.load_trajectory(trajectory_id)
    if n > len(trajectory):
        raise ValueError(f"n={n} exceeds trajectory length {len(trajectory)}")
    env = IntervenidarEnv(config)
    if env.config_hash != trajectory.config_hash:
        raise ValueError("archive entry config hash does not match environment config")
    if trajectory.start_state is not None:
        env.reset_to_payload(trajectory.start_state)
    else:
        env.reset(derive_seed(trajectory.seed, "env"))
    for step in trajectory.steps[:n]:
        try:
            env.step(step.action)
            diverged = env.latent_digest() != step.digest
        except Exception:
            diverged = True
        if diverged:
            archive.tombstone(trajectory_id, f"replay divergence at step {step.index}")
            raise CorruptArchiveEntryError(
                f"entry {trajectory_id!r} diverged at step {step.index}; tombstoned"
            )
    return GeneratedState(
        state=env.current_state.copy(),
        provenance={
            "method": "human-start",
            "environment_id": env.environment_id,
            "config_hash": env.config_hash,
            "trajectory_id": trajectory_id,
            "seed": trajectory.seed,
            "n": n,
            "actions": [s.action for s in trajectory.steps[:n]],
            "digest": env.latent_digest(),
        },
    )


def human_start_states(
    archive: HumanPlayArchive,
    trajectory_id: str,
    config: GameConfig,
    n_grid: tuple[int, ...] = DEFAULT_N_GRID,
) -> list[GeneratedState]:
    """One state per grid entry (nine with the default grid)."""
    return [human_start_state(archive, trajectory_id, n, config) for n in n_grid]


# -- overlap auditing ---------------------------------------------------------


@dataclass
class OverlapReport:
    generated_total: int
    reference_total: int
    overlap_count: int
    overlapping_digests: list[str]

    @property
    def overlap_fraction(self) -> float:
        return self.overlap_count / self.generated_total if self.generated_total else 0.0

    def to_payload(self) -> dict:
        return {
            "generated_total": self.generated_total,
            "reference_total": self.reference_total,
            "overlap_count": self.overlap_count,
            "overlap_fraction": self.overlap_fraction,
            "overlapping_digests": list(self.overlapping_digests),
        }


def overlap_audit(generated_digests, reference_digests) -> OverlapReport:
    """Multiset intersection between generated states and a reference set.

    Generation strategies are supposed to produce states the evaluated
    policy does not visit on its own; a large overlap means they do not.
    """
    gen = Counter(generated_digests)
    ref = Counter(reference_digests)
    overlap = gen & ref
    return OverlapReport(
        generated_total=sum(gen.values()),
        reference_total=sum(ref.values()),
        overlap_count=sum(overlap.values()),
        overlapping_digests=sorted(overlap.elements()),
    )
