"""Network service hosting live game sessions for human players.

Stepping is input-driven: the simulator advances exactly once per accepted
action, never on a wall clock, so recorded sessions replay bit-exactly.
Messages are JSON text over a WebSocket at ``/ws``:

  client -> server: {"kind": "create", "player_id", "seed"?, "config_hash"?}
                    {"kind": "act", "session_id", "action"}
                    {"kind": "close", "session_id"}
  server -> client: {"kind": "session", ...}   (initial frame)
                    {"kind": "frame", ...}     (one per accepted action)
                    {"kind": "closed", ...}    (archive entry summary)
                    {"kind": "error", "message"}

Frames ship as base64-encoded raw grayscale bytes with width/height fields.
On close the session is replay-verified before the archive entry commits;
entries failing verification are tombstoned, and entries at or below the
eligibility threshold are stored but flagged ineligible.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .board import GameConfig, load_default_config
from .game import ACTIONS, IntervenidarEnv
from .mdp import TerminalStateError, Trajectory, TrajectoryStep, replay
from .render import render
from .stategen import HumanPlayArchive

PROTOCOL_VERSION = 1


class SessionError(ValueError):
    pass


@dataclass
class Session:
    session_id: str
    player_id: str
    seed: int
    env: IntervenidarEnv
    trajectory: Trajectory
    lock: threading.Lock = field(default_factory=threading.Lock)
    closed: bool = False


class SessionRegistry:
    """Owns all live sessions; one environment instance per session.

    Session state is touched under per-session locks and archive writes are
    serialized, so concurrent connections never share environment state.
    """

    def __init__(self, config: GameConfig, archive: HumanPlayArchive):
        self.config = config
        self.archive = archive
        self._sessions: dict[str, Session] = {}
        self._closed_ids: set[str] = set()
        self._counter = 0
        self._lock = threading.Lock()

    def create(self, player_id: str, seed: int = 0, config_hash: str | None = None) -> dict:
        if config_hash is not None and config_hash != self.config.config_hash:
            raise SessionError(
                f"config hash mismatch: server has {self.config.config_hash[:12]}..."
            )
        env = IntervenidarEnv(self.config)
        env.reset(seed)
        with self._lock:
            self._counter += 1
            session_id = f"session-{self._counter:06d}"
            session = Session(
                session_id=session_id,
                player_id=player_id,
                seed=seed,
                env=env,
                trajectory=Trajectory(
                    environment_id=env.environment_id,
                    config_hash=env.config_hash,
                    seed=seed,
                    start_label="human",
                    start_digest=env.latent_digest(),
                    start_state=env.state_payload(),
                ),
            )
            self._sessions[session_id] = session
        out = self._frame_payload(session)
        out.update(
            {
                "kind": "session",
                "version": PROTOCOL_VERSION,
                "config_hash": env.config_hash,
                "actions": list(ACTIONS),
                "player_id": player_id,
            }
        )
        return out

    def act(self, session_id: str, action: int) -> dict:
        session = self._live(session_id)
        with session.lock:
            if session.env.terminal:
                raise SessionError("session is terminal; no further input accepted")
            if not isinstance(action, int) or not 0 <= action < len(ACTIONS):
                raise SessionError(f"action must be an integer in [0, {len(ACTIONS)})")
            result = session.env.step(action)
            session.trajectory.steps.append(
                TrajectoryStep(
                    index=len(session.trajectory.steps),
                    action=action,
                    reward=result.reward,
                    digest=session.env.latent_digest(),
                )
            )
            out = self._frame_payload(session)
            out["kind"] = "frame"
            out["reward"] = result.reward
            return out

    def close(self, session_id: str) -> dict:
        session = self._live(session_id)
        with session.lock:
            session.closed = True
            session.trajectory.terminal = session.env.terminal
            report = replay(session.trajectory, IntervenidarEnv(self.config))
            entry = self.archive.add(session.trajectory, session.player_id)
            if not report.match:
                self.archive.tombstone(entry["id"], f"replay divergence at step {report.first_divergence}")
        with self._lock:
            del self._sessions[session_id]
            self._closed_ids.add(session_id)
        return {
            "kind": "closed",
            "session_id": session_id,
            "entry_id": entry["id"],
            "length": entry["length"],
            "eligible": entry["eligible"],
            "replay_verified": report.match,
            "tombstoned": not report.match,
        }

    def _live(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self._closed_ids:
                raise SessionError(f"session {session_id} is closed")
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id}")
        return session

    def _frame_payload(self, session: Session) -> dict:
        state = session.env.current_state
        frame = render(state)
        h, w = frame.shape
        return {
            "session_id": session.session_id,
            "width": w,
            "height": h,
            "frame": base64.b64encode(frame.tobytes()).decode("ascii"),
            "score": state.score,
            "step": state.step_count,
            "terminal": state.terminal,
            "win": state.win,
        }


def create_app(config: GameConfig | None = None, archive_dir: str = "human_archive") -> FastAPI:
    config = config or load_default_config()
    registry = SessionRegistry(config, HumanPlayArchive(archive_dir))
    app = FastAPI(title="intervenidar play service")
    app.state.registry = registry

    @app.get("/config")
    def get_config() -> dict:
        return {
            "version": PROTOCOL_VERSION,
            "config_hash": config.config_hash,
            "width": config.board.width,
            "height": config.board.height,
            "actions": list(ACTIONS),
        }

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        while True:
            try:
                text = await websocket.receive_text()
            except WebSocketDisconnect:
                return
            try:
                msg = json.loads(text)
                kind = msg.get("kind")
                if kind == "create":
                    reply = registry.create(
                        player_id=str(msg.get("player_id", "anonymous")),
                        seed=int(msg.get("seed", 0)),
                        config_hash=msg.get("config_hash"),
                    )
                elif kind == "act":
                    reply = registry.act(str(msg.get("session_id")), msg.get("action"))
                elif kind == "close":
                    reply = registry.close(str(msg.get("session_id")))
                else:
                    reply = {"kind": "error", "message": f"unknown message kind {kind!r}"}
            except (SessionError, TerminalStateError, ValueError, KeyError) as exc:
                reply = {"kind": "error", "message": str(exc)}
            await websocket.send_text(json.dumps(reply, sort_keys=True))

    return app


def serve(config: GameConfig | None = None, host: str = "127.0.0.1", port: int = 8765, archive_dir: str = "human_archive") -> None:
    import uvicorn

    uvicorn.run(create_app(config, archive_dir), host=host, port=port, log_level="warning")
