"""Command-line entry point.

Subcommands: play, replay, intervene, generate, ingest, experiment,
export-frame, serve.  Every command is deterministic given its arguments
and seeds; all randomness flows from the seed flags through derived
streams, never from the wall clock.  Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .agents import BUILTIN_AGENTS, make_agent
from .board import GameConfig, load_config, load_default_config
from .evaluate import Condition, EvalRecord, run_experiment
from .game import ACTIONS, GameState, IntervenidarEnv, new_game
from .hashing import canonical_dumps
from .interventions import (
    KINDS,
    InfeasibleInterventionError,
    apply as apply_intervention,
    sample_condition,
    verify_unreachable,
)
from .mdp import Trajectory, replay, run_episode
from .render import render, to_pgm
from .stategen import (
    HumanPlayArchive,
    agent_swap_state,
    human_start_state,
    ingest_trajectory,
    kopa_state,
)
from .wire import RemoteAgent

EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "intervenidar experiment config",
    "type": "object",
    "required": ["agent", "seed", "conditions", "output"],
    "additionalProperties": False,
    "properties": {
        "environment_config": {"type": ["string", "null"]},
        "config_hash": {"type": ["string", "null"]},
        "agent": {"type": "string"},
        "agent_endpoint": {"type": ["string", "null"]},
        "seed": {"type": "integer"},
        "max_steps": {"type": "integer", "minimum": 1},
        "archive": {"type": ["string", "null"]},
        "output": {"type": "string"},
        "conditions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["label", "kind"],
                "additionalProperties": False,
                "properties": {
                    "label": {"type": "string"},
                    "kind": {"type": "string"},
                    "params": {"type": "object"},
                    "replicates": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}


class UsageError(ValueError):
    pass


def _load_game_config(path: str | None) -> GameConfig:
    return load_config(path) if path else load_default_config()


def _make_agent(args, config: GameConfig):
    if getattr(args, "endpoint", None):
        host, _, port = args.endpoint.rpartition(":")
        return RemoteAgent(
            host or "127.0.0.1",
            int(port),
            environment_id="intervenidar",
            config_hash=config.config_hash,
            action_count=len(ACTIONS),
            timeout=getattr(args, "agent_timeout", 5.0),
        )
    return make_agent(args.agent)


def _load_start_state(path: str | None) -> GameState | None:
    if not path:
        return None
    payload = json.loads(Path(path).read_text())
    return GameState.from_payload(payload.get("state", payload))


# -- subcommands ---------------------------------------------------------------


def cmd_play(args) -> int:
    config = _load_game_config(args.config)
    agent = _make_agent(args, config)
    env = IntervenidarEnv(config, start_state=_load_start_state(args.start_state))
    trajectory = run_episode(env, agent, args.seed, args.max_steps, start_label=args.label)
    trajectory.save(args.out)
    print(
        f"{args.out}: {len(trajectory)} steps, reward {trajectory.reward_sum},"
        f" terminal={trajectory.terminal}, aborted={trajectory.aborted}"
    )
    return 1 if trajectory.aborted else 0


def cmd_replay(args) -> int:
    config = _load_game_config(args.config)
    trajectory = Trajectory.load(args.trajectory)
    report = replay(trajectory, IntervenidarEnv(config))
    if report.match:
        print(f"replay OK: {report.steps_checked} steps, zero divergences")
        return 0
    print(f"replay DIVERGED at step {report.first_divergence}: {report.detail}")
    return 1


def cmd_intervene(args) -> int:
    config = _load_game_config(args.config)
    start = new_game(config)
    iv = sample_condition(args.kind, args.seed)
    try:
        state, report = apply_intervention(start, iv)
    except InfeasibleInterventionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    verdict = verify_unreachable(state, config)
    out_payload = {
        "format_version": 1,
        "state": state.to_payload(),
        "intervention_report": report.to_payload(),
        "unreachable": {"proven": verdict.unreachable, "justification": verdict.justification},
    }
    Path(args.out).write_text(canonical_dumps(out_payload) + "\n")
    print(canonical_dumps(report.to_payload()))
    return 0


def cmd_generate(args) -> int:
    config = _load_game_config(args.config)
    if args.method == "k-opa":
        gen = kopa_state(make_agent(args.agent), config, args.n, args.k, args.seed)
    elif args.method == "agent-swap":
        gen = agent_swap_state(
            make_agent(args.alt_agent), args.agent, config, args.n, args.seed
        )
    else:  # human-start
        if not args.archive or not args.trajectory_id:
            raise UsageError("human-start generation needs --archive and --trajectory-id")
        gen = human_start_state(HumanPlayArchive(args.archive), args.trajectory_id, args.n, config)
    payload = {"format_version": 1, "state": gen.state.to_payload(), "provenance": gen.provenance}
    Path(args.out).write_text(canonical_dumps(payload) + "\n")
    print(f"{args.out}: digest {gen.digest[:16]}... via {gen.provenance['method']}")
    return 0


def cmd_ingest(args) -> int:
    config = _load_game_config(args.config)
    archive = HumanPlayArchive(args.archive)
    failures = 0
    for path in args.trajectories:
        try:
            entry = ingest_trajectory(archive, Trajectory.load(path), args.player_id, config)
            print(f"{path}: archived as {entry['id']} (eligible={entry['eligible']})")
        except Exception as exc:
            failures += 1
            print(f"{path}: REJECTED: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_experiment(args) -> int:
    raw = json.loads(Path(args.experiment_config).read_text())
    try:
        jsonschema.validate(raw, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"experiment config invalid: {exc.message}")
    config = _load_game_config(raw.get("environment_config"))
    if raw.get("config_hash") and raw["config_hash"] != config.config_hash:
        raise UsageError(
            f"experiment config_hash {raw['config_hash'][:12]}... does not match"
            f" environment file hash {config.config_hash[:12]}..."
        )

    def build_agent():
        if raw.get("agent_endpoint"):
            host, _, port = raw["agent_endpoint"].rpartition(":")
            return RemoteAgent(
                host or "127.0.0.1",
                int(port),
                environment_id="intervenidar",
                config_hash=config.config_hash,
                action_count=len(ACTIONS),
            )
        return make_agent(raw["agent"])

    agent = build_agent()
    conditions = [
        Condition(
            label=c["label"],
            kind=c["kind"],
            params=c.get("params", {}),
            replicates=c.get("replicates", 3),
        )
        for c in raw["conditions"]
    ]
    archive = HumanPlayArchive(raw["archive"]) if raw.get("archive") else None
    outdir = Path(raw["output"])
    outdir.mkdir(parents=True, exist_ok=True)

    # Resume by seed bookkeeping: finished (condition, replicate) pairs are
    # skipped and their flushed records reused.
    records_path = outdir / "records.jsonl"
    prior: list[EvalRecord] = []
    if records_path.exists():
        for line in records_path.read_text().splitlines():
            if line.strip():
                prior.append(EvalRecord.from_payload(json.loads(line)))
    skip = {(r.condition, r.replicate) for r in prior}

    with records_path.open("a") as sink_fh:

        def sink(record: EvalRecord) -> None:
            sink_fh.write(canonical_dumps(record.to_payload()) + "\n")
            sink_fh.flush()

        try:
            result = run_experiment(
                agent,
                config,
                conditions,
                base_seed=raw["seed"],
                max_steps=raw.get("max_steps", 2000),
                archive=archive,
                skip_keys=skip,
                record_sink=sink,
                prior_records=prior,
                workers=args.workers,
                agent_factory=build_agent if args.workers > 1 else None,
            )
        except KeyboardInterrupt:
            print(
                f"interrupted; partial records flushed to {records_path}, re-run to resume",
                file=sys.stderr,
            )
            return 1
    result.save(outdir)
    print((outdir / "summary.tsv").read_text(), end="")
    return 0


def cmd_export_frame(args) -> int:
    if args.state:
        state = GameState.from_payload(
            json.loads(Path(args.state).read_text()).get("state")
            or json.loads(Path(args.state).read_text())
        )
    else:
        state = new_game(_load_game_config(args.config))
    Path(args.out).write_bytes(to_pgm(render(state)))
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .play_service import serve

    serve(_load_game_config(args.config), host=args.host, port=args.port, archive_dir=args.archive)
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intervenidar",
        description="Deterministic track-painting simulator and generalization-evaluation harness.",
    )
    parser.add_argument("--version", action="version", version=f"intervenidar {__version__}")
    parser.add_argument(
        "--print-config-schema",
        action="store_true",
        help="print the experiment config JSON schema and exit",
    )
    sub = parser.add_subparsers(dest="command")

    agents = sorted(BUILTIN_AGENTS)

    p = sub.add_parser("play", help="run one episode and record a trajectory file")
    p.add_argument("--config", help="game config YAML (default: built-in board)")
    p.add_argument("--agent", choices=agents, default="random")
    p.add_argument("--endpoint", help="remote agent endpoint host:port (overrides --agent)")
    p.add_argument("--agent-timeout", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=5000)
    p.add_argument("--start-state", help="JSON state file overriding the canonical start")
    p.add_argument("--label", default="control")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("replay", help="verify a trajectory file against the environment")
    p.add_argument("--config")
    p.add_argument("trajectory")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("intervene", help="apply a start-state intervention")
    p.add_argument("--config")
    p.add_argument("--kind", choices=list(KINDS), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("generate", help="generate an off-policy evaluation state")
    p.add_argument("--config")
    p.add_argument("--method", choices=["k-opa", "agent-swap", "human-start"], required=True)
    p.add_argument("--agent", choices=agents, default="random", help="agent under evaluation")
    p.add_argument("--alt-agent", choices=agents, default="stationary")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--archive")
    p.add_argument("--trajectory-id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="validate and import human trajectories into an archive")
    p.add_argument("--config")
    p.add_argument("--archive", required=True)
    p.add_argument("--player-id", default="anonymous")
    p.add_argument("trajectories", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("experiment", help="run an experiment suite from a JSON config")
    p.add_argument("experiment_config")
    p.add_argument(
        "--workers",
        type=int,
        default=1,
        help="parallel condition evaluation (default 1; results are identical)",
    )
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-frame", help="render a state to a PGM image")
    p.add_argument("--config")
    p.add_argument("--state", help="JSON state file (default: canonical start)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_frame)

    p = sub.add_parser("serve", help="host the human-play service")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--archive", default="human_archive")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config_schema:
        print(json.dumps(EXPERIMENT_SCHEMA, indent=2, sort_keys=True))
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
