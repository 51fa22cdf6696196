"""Experiment runner and metrics: TAR, VEE, normalization, distances.

TAR is the undiscounted sum of a trajectory's rewards.  VEE compares the
agent's per-step value estimate against the realized undiscounted
return-to-go of the executed rollout (the dynamics and agents here are
deterministic given the seed, so the single rollout is the realized value).
Summaries follow fixed normalization conventions: each condition's mean TAR
is divided by the control condition's mean TAR (control is 1 by
construction), and each condition's mean VEE is divided by that condition's
own mean TAR, reported as undefined when the mean TAR is 0.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import make_agent
from .board import GameConfig
from .game import IntervenidarEnv, new_game
from .hashing import canonical_dumps
from .interventions import KINDS as INTERVENTION_KINDS
from .interventions import apply as apply_intervention
from .interventions import sample_condition
from .mdp import Trajectory, run_episode
from .rng import derive_seed
from .stategen import (
    DEFAULT_N_GRID,
    GenerationInfeasibleError,
    HumanPlayArchive,
    agent_swap_state,
    human_start_state,
    kopa_state,
)

CONTROL_LABEL = "control"


class MetricUnavailableError(RuntimeError):
    """The trajectory does not carry the channel the metric needs."""


def tar(trajectory: Trajectory) -> float:
    """Total accumulated reward: undiscounted sum of recorded rewards."""
    return trajectory.reward_sum


def vee_series(trajectory: Trajectory) -> list[float]:
    """Per-step value estimate error: v-hat minus realized return-to-go."""
    if any(s.value is None for s in trajectory.steps):
        raise MetricUnavailableError("trajectory does not carry a value-estimate channel")
    series: list[float] = []
    rtg = 0.0
    errors_reversed: list[float] = []
    for s in reversed(trajectory.steps):
        rtg += s.reward
        errors_reversed.append(s.value - rtg)
    series = list(reversed(errors_reversed))
    return series


@dataclass(frozen=True)
class Condition:
    """One evaluation condition: a start-state generator plus replicates."""

    label: str
    kind: str  # "control" | intervention kind | "k-opa" | "agent-swap" | "human-start"
    params: dict = field(default_factory=dict)
    replicates: int = 3

    def __post_init__(self) -> None:
        known = ("control", "k-opa", "agent-swap", "human-start") + tuple(INTERVENTION_KINDS)
        if self.kind not in known:
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


@dataclass
class EvalRecord:
    condition: str
    replicate: int
    seed: int
    tar: float
    vee: list[float] | None
    episode_length: int
    start_digest: str
    aborted: bool = False

    def to_payload(self) -> dict:
        return {
            "condition": self.condition,
            "replicate": self.replicate,
            "seed": self.seed,
            "tar": self.tar,
            "vee": self.vee,
            "episode_length": self.episode_length,
            "start_digest": self.start_digest,
            "aborted": self.aborted,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "EvalRecord":
        return cls(**payload)


@dataclass
class SummaryRow:
    condition: str
    requested: int
    completed: int
    aborted: int
    infeasible: int
    mean_tar: float | None
    tar_std: float | None
    tar_normalized: float | None
    mean_vee: float | None
    vee_normalized: float | None


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    control_mean_tar: float | None

    COLUMNS = (
        "condition",
        "requested",
        "completed",
        "aborted",
        "infeasible",
        "mean_tar",
        "tar_std",
        "tar_normalized",
        "mean_vee",
        "vee_normalized",
    )

    def to_tsv(self) -> str:
        lines = ["\t".join(self.COLUMNS)]
        for row in self.rows:
            cells = []
            for col in self.COLUMNS:
                v = getattr(row, col)
                cells.append("" if v is None else (repr(v) if isinstance(v, float) else str(v)))
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    records: list[EvalRecord]
    summary: SummaryTable
    infeasibility: dict[str, list[dict]]

    def save(self, outdir: str | Path) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "summary.tsv").write_text(self.summary.to_tsv())
        with (outdir / "records.jsonl").open("w") as fh:
            for rec in self.records:
                fh.write(canonical_dumps(rec.to_payload()) + "\n")
        bars = ["condition\ttar_normalized\tvee_normalized"]
        for row in self.summary.rows:
            bars.append(
                "\t".join(
                    [
                        row.condition,
                        "" if row.tar_normalized is None else repr(row.tar_normalized),
                        "" if row.vee_normalized is None else repr(row.vee_normalized),
                    ]
                )
            )
        (outdir / "bars.tsv").write_text("\n".join(bars) + "\n")
        if self.infeasibility:
            (outdir / "infeasible.json").write_text(
                json.dumps(self.infeasibility, sort_keys=True, indent=2) + "\n"
            )


def generate_start(
    condition: Condition,
    agent,
    config: GameConfig,
    seed: int,
    replicate: int,
    archive: HumanPlayArchive | None = None,
):
    """Build (env, intervention payload, provenance) for one replicate."""
    if condition.kind == "control":
        return IntervenidarEnv(config), None, None
    if condition.kind in INTERVENTION_KINDS:
        iv = sample_condition(condition.kind, seed)
        state, report = apply_intervention(new_game(config), iv)
        return IntervenidarEnv(config, start_state=state), report.to_payload(), None
    n_grid = tuple(condition.params.get("n_grid", DEFAULT_N_GRID))
    n = n_grid[replicate % len(n_grid)]
    if condition.kind == "k-opa":
        gen = kopa_state(agent, config, n, int(condition.params["k"]), seed)
    elif condition.kind == "agent-swap":
        alt = make_agent(condition.params["alt_agent"])
        gen = agent_swap_state(alt, agent.agent_id, config, n, seed)
    else:  # human-start
        if archive is None:
            raise ValueError("human-start conditions need an archive")
        ids = condition.params.get("trajectory_ids") or archive.eligible_ids()
        if not ids:
            raise GenerationInfeasibleError(
                {"method": "human-start", "message": "archive has no eligible trajectories"}
            )
        gen = human_start_state(archive, ids[replicate % len(ids)], n, config)
    return IntervenidarEnv(config, start_state=gen.state), None, gen.provenance


def run_experiment(
    agent,
    config: GameConfig,
    conditions: list[Condition],
    base_seed: int,
    max_steps: int = 2000,
    archive: HumanPlayArchive | None = None,
    skip_keys: set[tuple[str, int]] | None = None,
    record_sink=None,
    prior_records: list[EvalRecord] | None = None,
    workers: int = 1,
    agent_factory=None,
) -> ExperimentResult:
    """Run every condition x replicate and aggregate the summary.

    Seeds derive from ``base_seed`` per (condition label, replicate), so a
    partially completed run resumes deterministically: pass the finished
    ``(label, replicate)`` pairs as ``skip_keys`` and the already-flushed
    records as ``prior_records``.  ``record_sink`` is called with each fresh
    record as soon as its episode finishes.

    With ``workers`` > 1 replicates run on a thread pool, one environment
    and one agent per task (``agent_factory`` must build fresh agents); the
    per-task seed derivation makes the results identical to a serial run.
    """
    skip_keys = skip_keys or set()
    records: list[EvalRecord] = list(prior_records or [])
    infeasibility: dict[str, list[dict]] = {}
    sink_lock = threading.Lock()

    if workers > 1 and agent_factory is None:
        raise ValueError("parallel runs need an agent_factory building one agent per task")

    def one(condition: Condition, replicate: int, task_agent) -> EvalRecord | None:
        seed = derive_seed(base_seed, "experiment", condition.label, replicate)
        try:
            env, iv_payload, provenance = generate_start(
                condition, task_agent, config, seed, replicate, archive
            )
        except GenerationInfeasibleError as exc:
            with sink_lock:
                infeasibility.setdefault(condition.label, []).append(exc.report)
            return None
        trajectory = run_episode(
            env,
            task_agent,
            seed,
            max_steps,
            start_label=condition.label,
            intervention=iv_payload,
            provenance=provenance,
        )
        record = EvalRecord(
            condition=condition.label,
            replicate=replicate,
            seed=seed,
            tar=tar(trajectory),
            vee=_vee_or_none(trajectory),
            episode_length=len(trajectory),
            start_digest=trajectory.start_digest,
            aborted=trajectory.aborted,
        )
        with sink_lock:
            records.append(record)
            if record_sink is not None:
                record_sink(record)
        return record

    pending = [
        (condition, replicate)
        for condition in conditions
        for replicate in range(condition.replicates)
        if (condition.label, replicate) not in skip_keys
    ]
    if workers <= 1:
        for condition, replicate in pending:
            one(condition, replicate, agent)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(one, condition, replicate, agent_factory())
                for condition, replicate in pending
            ]
            for future in futures:
                future.result()
    records.sort(key=lambda r: (_condition_order(conditions, r.condition), r.replicate))
    summary = summarize(conditions, records, infeasibility)
    return ExperimentResult(records=records, summary=summary, infeasibility=infeasibility)


def _condition_order(conditions: list[Condition], label: str) -> int:
    for i, c in enumerate(conditions):
        if c.label == label:
            return i
    return len(conditions)


def _vee_or_none(trajectory: Trajectory) -> list[float] | None:
    try:
        return vee_series(trajectory)
    except MetricUnavailableError:
        return None


def summarize(
    conditions: list[Condition],
    records: list[EvalRecord],
    infeasibility: dict[str, list[dict]] | None = None,
) -> SummaryTable:
    """Aggregate records; aborted episodes are counted but excluded from means."""
    infeasibility = infeasibility or {}
    by_label: dict[str, list[EvalRecord]] = {}
    for rec in records:
        by_label.setdefault(rec.condition, []).append(rec)

    def stats(label: str):
        complete = [r for r in by_label.get(label, []) if not r.aborted]
        if not complete:
            return None, None, None
        tars = [r.tar for r in complete]
        mean = sum(tars) / len(tars)
        std = float(np.std(tars, ddof=1)) if len(tars) > 1 else 0.0
        vees = [sum(r.vee) / len(r.vee) for r in complete if r.vee]
        mean_vee = sum(vees) / len(vees) if vees else None
        return mean, std, mean_vee

    control_mean, _, _ = stats(CONTROL_LABEL)
    rows = []
    for condition in conditions:
        label = condition.label
        mean, std, mean_vee = stats(label)
        group = by_label.get(label, [])
        if mean is None:
            tar_norm = None
        elif label == CONTROL_LABEL:
            tar_norm = 1.0  # by construction
        elif control_mean in (None, 0.0):
            tar_norm = None
        else:
            tar_norm = mean / control_mean
        vee_norm = None
        if mean_vee is not None and mean not in (None, 0.0):
            vee_norm = mean_vee / mean
        rows.append(
            SummaryRow(
                condition=label,
                requested=condition.replicates,
                completed=sum(1 for r in group if not r.aborted),
                aborted=sum(1 for r in group if r.aborted),
                infeasible=len(infeasibility.get(label, [])),
                mean_tar=mean,
                tar_std=std,
                tar_normalized=tar_norm,
                mean_vee=mean_vee,
                vee_normalized=vee_norm,
            )
        )
    return SummaryTable(rows=rows, control_mean_tar=control_mean)


def default_condition_suite(alt_agent: str = "stationary", replicates: int = 3) -> list[Condition]:
    """The standard suite: control, the five interventions, and k-OPA."""
    out = [Condition(label=CONTROL_LABEL, kind="control", replicates=replicates)]
    out += [Condition(label=k, kind=k, replicates=replicates) for k in INTERVENTION_KINDS]
    out += [
        Condition(label="k-OPA(10)", kind="k-opa", params={"k": 10}, replicates=replicates),
        Condition(label="k-OPA(20)", kind="k-opa", params={"k": 20}, replicates=replicates),
    ]
    return out


# -- embedding distances -------------------------------------------------------

DENSITY_POINTS = 256
QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class DistanceReport:
    per_condition: dict[str, dict]

    def to_payload(self) -> dict:
        return {"per_condition": self.per_condition}


def nearest_neighbor_distances(points: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to its nearest reference point."""
    points = np.asarray(points, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if points.ndim != 2 or reference.ndim != 2:
        raise ValueError("embeddings must be 2-d arrays (points x dimensions)")
    if points.shape[1] != reference.shape[1]:
        raise ValueError(
            f"embedding dimension mismatch: {points.shape[1]} != {reference.shape[1]}"
        )
    diffs = points[:, None, :] - reference[None, :, :]
    return np.sqrt((diffs**2).sum(axis=2)).min(axis=1)


def embedding_distance_report(
    eval_embeddings: dict[str, np.ndarray], training_embeddings: np.ndarray
) -> DistanceReport:
    """Nearest-training-state distance distribution per condition.

    Densities are Gaussian kernel estimates with Scott's-rule bandwidth
    (scipy default), evaluated on a fixed grid; conditions with fewer than
    two distinct distances skip the density and keep the quantiles.
    """
    from scipy.stats import gaussian_kde

    per_condition: dict[str, dict] = {}
    for label, embeddings in eval_embeddings.items():
        distances = nearest_neighbor_distances(np.asarray(embeddings), training_embeddings)
        entry: dict = {
            "distances": [float(d) for d in distances],
            "quantiles": {
                str(q): float(np.quantile(distances, q)) for q in QUANTILES
            },
        }
        if len(distances) > 1 and float(np.std(distances)) > 0:
            kde = gaussian_kde(distances)  # Scott's rule bandwidth
            xs = np.linspace(0.0, float(distances.max()) * 1.05, DENSITY_POINTS)
            entry["density_x"] = [float(x) for x in xs]
            entry["density_y"] = [float(y) for y in kde(xs)]
        else:
            entry["density_x"] = None
            entry["density_y"] = None
        per_condition[label] = entry
    return DistanceReport(per_condition=per_condition)
