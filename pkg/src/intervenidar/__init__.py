"""Deterministic track-painting simulator with latent-state interventions
and a generalization-evaluation harness (state partitioning, off-policy
state generation, TAR/VEE metrics, trajectory replay, human-play service).
"""

__version__ = "0.1.0"

from .board import Board, GameConfig, LineSegment, load_config, load_default_config
from .game import ACTIONS, EntityState, GameState, IntervenidarEnv, new_game, step
from .gridworld import (
    GridConfig,
    GridWorldEnv,
    StatePartition,
    partition,
    reachable_set,
    tabular_q_learn,
    value_iteration,
)
from .interventions import Intervention, InterventionReport, apply, sample_condition, verify_unreachable
from .mdp import (
    AgentReply,
    MdpSpec,
    ReplayReport,
    StepResult,
    Trajectory,
    TrajectoryStep,
    replay,
    run_episode,
)
from .render import observe, render
from .stategen import (
    GeneratedState,
    HumanPlayArchive,
    agent_swap_state,
    human_start_state,
    kopa_state,
    overlap_audit,
)
from .evaluate import Condition, EvalRecord, run_experiment, tar, vee_series

__all__ = [
    "ACTIONS",
    "AgentReply",
    "Board",
    "Condition",
    "EntityState",
    "EvalRecord",
    "GameConfig",
    "GameState",
    "GeneratedState",
    "GridConfig",
    "GridWorldEnv",
    "HumanPlayArchive",
    "Intervention",
    "InterventionReport",
    "IntervenidarEnv",
    "LineSegment",
    "MdpSpec",
    "ReplayReport",
    "StatePartition",
    "StepResult",
    "Trajectory",
    "TrajectoryStep",
    "agent_swap_state",
    "apply",
    "human_start_state",
    "kopa_state",
    "load_config",
    "load_default_config",
    "new_game",
    "observe",
    "overlap_audit",
    "partition",
    "reachable_set",
    "render",
    "replay",
    "run_episode",
    "run_experiment",
    "sample_condition",
    "step",
    "tabular_q_learn",
    "tar",
    "value_iteration",
    "vee_series",
    "verify_unreachable",
]
