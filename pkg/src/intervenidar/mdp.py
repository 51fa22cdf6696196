"""Core MDP machinery: episode running, trajectory recording, replay.

Environments are duck-typed.  An environment must provide:

  environment_id: str      stable identifier of the dynamics
  config_hash: str         hash of the effective configuration
  action_count: int        actions are indexed 0..action_count-1
  reset(seed) -> None      (re)enter the configured start state
  step(action) -> StepResult
  latent_digest() -> str   256-bit hex hash of the full latent state
  state_payload() -> dict  full serializable latent state
  reset_to_payload(dict)   restore an exact latent state

Agents must provide ``agent_id``, ``observation_kind`` ("latent" or
"pixels"), ``channels`` (subset of {"value", "q", "embedding"}),
``begin_episode(seed)`` and ``act(observation) -> AgentReply``.

Episodes are deterministic: (config, seed, action sequence) fully determines
every state digest.  Trajectories round-trip bit-exactly through their file
format (one canonical-JSON record per line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .hashing import canonical_dumps
from .rng import derive_seed

TRAJECTORY_FORMAT_VERSION = 1


class ConfigMismatchError(ValueError):
    """Trajectory and environment disagree on environment id or config."""


class AgentProtocolError(RuntimeError):
    """The agent endpoint violated the protocol (timeout, bad action, ...)."""


class TerminalStateError(RuntimeError):
    """An operation was applied to a terminal state."""


@dataclass(frozen=True)
class MdpSpec:
    """State-space descriptor, indexed action set and discount rate.

    ``discount`` is carried for agents that train with one; the evaluation
    metrics in this repo are undiscounted and ignore it.
    """

    state_space: str
    actions: tuple[str, ...]
    discount: float = 1.0

    def __post_init__(self) -> None:
        if not self.actions:
            raise ValueError("action set must be non-empty")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")


@dataclass
class StepResult:
    next_state: Any
    reward: float
    terminal: bool


@dataclass(frozen=True)
class AgentReply:
    """One action decision, with optional estimate channels."""

    action: int
    value: float | None = None
    q: tuple[float, ...] | None = None
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TrajectoryStep:
    index: int
    action: int
    reward: float
    digest: str  # latent digest of the state reached by this step
    value: float | None = None  # agent's estimate of the state acted from
    embedding: tuple[float, ...] | None = None


@dataclass
class Trajectory:
    """Seeded, replayable record of one episode."""

    environment_id: str
    config_hash: str
    seed: int
    start_label: str
    start_digest: str
    steps: list[TrajectoryStep] = field(default_factory=list)
    terminal: bool = False
    aborted: bool = False
    diagnostic: str | None = None
    start_state: dict | None = None
    intervention: dict | None = None
    provenance: dict | None = None

    def __post_init__(self) -> None:
        for s in self.steps:
            if not math.isfinite(s.reward):
                raise ValueError(f"non-finite reward at step {s.index}")

    @property
    def reward_sum(self) -> float:
        return sum(s.reward for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    # -- file format ---------------------------------------------------------

    def to_lines(self) -> list[str]:
        header = {
            "kind": "trajectory-header",
            "format_version": TRAJECTORY_FORMAT_VERSION,
            "environment_id": self.environment_id,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "start_label": self.start_label,
            "start_digest": self.start_digest,
            "start_state": self.start_state,
            "intervention": self.intervention,
            "provenance": self.provenance,
        }
        lines = [canonical_dumps(header)]
        for s in self.steps:
            rec: dict[str, Any] = {
                "kind": "step",
                "t": s.index,
                "action": s.action,
                "reward": s.reward,
                "digest": s.digest,
            }
            if s.value is not None:
                rec["value"] = s.value
            if s.embedding is not None:
                rec["embedding"] = list(s.embedding)
            lines.append(canonical_dumps(rec))
        lines.append(
            canonical_dumps(
                {
                    "kind": "trajectory-end",
                    "steps": len(self.steps),
                    "terminal": self.terminal,
                    "aborted": self.aborted,
                    "diagnostic": self.diagnostic,
                    "reward_sum": self.reward_sum,
                }
            )
        )
        return lines

    def to_bytes(self) -> bytes:
        return ("\n".join(self.to_lines()) + "\n").encode("utf-8")

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_lines(cls, lines: list[str]) -> "Trajectory":
        import json

        if len(lines) < 2:
            raise ValueError("trajectory file too short")
        header = json.loads(lines[0])
        if header.get("kind") != "trajectory-header":
            raise ValueError("missing trajectory header")
        if header.get("format_version") != TRAJECTORY_FORMAT_VERSION:
            raise ValueError(f"unsupported trajectory format version {header.get('format_version')}")
        end = json.loads(lines[-1])
        if end.get("kind") != "trajectory-end":
            raise ValueError("missing trajectory end record")
        steps = []
        for line in lines[1:-1]:
            rec = json.loads(line)
            if rec.get("kind") != "step":
                raise ValueError("unexpected record kind in trajectory body")
            steps.append(
                TrajectoryStep(
                    index=rec["t"],
                    action=rec["action"],
                    reward=rec["reward"],
                    digest=rec["digest"],
                    value=rec.get("value"),
                    embedding=tuple(rec["embedding"]) if "embedding" in rec else None,
                )
            )
        if end["steps"] != len(steps):
            raise ValueError("trajectory end record disagrees with step count")
        tr = cls(
            environment_id=header["environment_id"],
            config_hash=header["config_hash"],
            seed=header["seed"],
            start_label=header["start_label"],
            start_digest=header["start_digest"],
            steps=steps,
            terminal=end["terminal"],
            aborted=end["aborted"],
            diagnostic=end.get("diagnostic"),
            start_state=header.get("start_state"),
            intervention=header.get("intervention"),
            provenance=header.get("provenance"),
        )
        if abs(tr.reward_sum - end["reward_sum"]) > 0:
            raise ValueError("trajectory end record disagrees with reward sum")
        return tr

    @classmethod
    def from_bytes(cls, data: bytes) -> "Trajectory":
        return cls.from_lines(data.decode("utf-8").splitlines())

    @classmethod
    def load(cls, path: str | Path) -> "Trajectory":
        return cls.from_bytes(Path(path).read_bytes())


def run_episode(
    env,
    agent,
    seed: int,
    max_steps: int,
    start_label: str = "control",
    intervention: dict | None = None,
    provenance: dict | None = None,
) -> Trajectory:
    """Run one episode and record it.

    The environment and agent draw from independent streams derived from
    ``seed``.  On an agent protocol failure the partial trajectory is
    preserved and marked aborted, with the failure in ``diagnostic``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    env.reset(derive_seed(seed, "env"))
    agent.begin_episode(derive_seed(seed, "agent"))
    trajectory = Trajectory(
        environment_id=env.environment_id,
        config_hash=env.config_hash,
        seed=seed,
        start_label=start_label,
        start_digest=env.latent_digest(),
        start_state=env.state_payload(),
        intervention=intervention,
        provenance=provenance,
    )
    terminal = env.terminal
    for t in range(max_steps):
        if terminal:
            break
        try:
            reply = agent.act(observation_for(env, agent))
            action = int(reply.action)
            if not 0 <= action < env.action_count:
                raise AgentProtocolError(f"action index {action} out of range")
        except AgentProtocolError as exc:
            trajectory.aborted = True
            trajectory.diagnostic = str(exc)
            break
        result = env.step(action)
        trajectory.steps.append(
            TrajectoryStep(
                index=t,
                action=action,
                reward=result.reward,
                digest=env.latent_digest(),
                value=reply.value,
                embedding=reply.embedding,
            )
        )
        terminal = result.terminal
    trajectory.terminal = terminal
    return trajectory


def observation_for(env, agent):
    if agent.observation_kind == "pixels":
        return env.observe_pixels()
    return env.current_state


@dataclass
class ReplayReport:
    """Outcome of re-executing a trajectory's actions against an environment.

    ``first_divergence`` is the index of the first step whose reached-state
    digest (or reward) differs, ``-1`` when the start states already differ,
    and ``None`` on an exact match.
    """

    environment_id: str
    steps_checked: int
    first_divergence: int | None = None
    detail: str | None = None

    @property
    def match(self) -> bool:
        return self.first_divergence is None


def replay(trajectory: Trajectory, env) -> ReplayReport:
    """Re-execute a trajectory's actions and verify every state digest."""
    if env.environment_id != trajectory.environment_id:
        raise ConfigMismatchError(
            f"environment id {env.environment_id!r} != recorded {trajectory.environment_id!r}"
        )
    if env.config_hash != trajectory.config_hash:
        raise ConfigMismatchError(
            f"config hash {env.config_hash} != recorded {trajectory.config_hash}"
        )
    if trajectory.start_state is not None:
        env.reset_to_payload(trajectory.start_state)
    else:
        env.reset(derive_seed(trajectory.seed, "env"))
    if env.latent_digest() != trajectory.start_digest:
        return ReplayReport(env.environment_id, 0, first_divergence=-1, detail="start state digest differs")
    for step in trajectory.steps:
        if env.terminal:
            return ReplayReport(
                env.environment_id,
                step.index,
                first_divergence=step.index,
                detail="environment terminated before recorded step",
            )
        result = env.step(step.action)
        if env.latent_digest() != step.digest:
            return ReplayReport(
                env.environment_id,
                step.index + 1,
                first_divergence=step.index,
                detail="state digest differs",
            )
        if result.reward != step.reward:
            return ReplayReport(
                env.environment_id,
                step.index + 1,
                first_divergence=step.index,
                detail=f"reward differs: {result.reward} != {step.reward}",
            )
    return ReplayReport(env.environment_id, len(trajectory.steps))
