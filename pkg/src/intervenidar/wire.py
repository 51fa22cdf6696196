"""Length-prefixed wire protocol connecting agents to the episode runner.

Transport: TCP on localhost.  Every message is a 4-byte big-endian length
followed by the body.  Bodies are canonical JSON; a message that carries a
pixel observation appends a newline and the raw frame bytes after the JSON
header (the header's ``payload`` field gives dims and dtype).

Handshake (harness -> agent -> harness):

    {"kind": "hello", "version": 1, "environment_id": ..., "action_count": A}
    {"kind": "capabilities", "version": 1, "agent_id": ...,
     "observation": "latent" | "pixels", "channels": ["value", ...]}

Episode flow: ``reset`` (config hash + seed) answered by ``ready``; ``act``
(observation attached) answered by ``action`` with optional value, q and
embedding channels; ``close`` ends the session.  A version mismatch fails
the handshake with both versions reported and no episode started.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from dataclasses import dataclass

import numpy as np

from .game import GameState
from .hashing import canonical_dumps
from .mdp import AgentProtocolError, AgentReply

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 5.0

MAX_MESSAGE_BYTES = 64 * 1024 * 1024


class HandshakeError(AgentProtocolError):
    pass


def encode_message(obj: dict, raw: bytes | None = None) -> bytes:
    body = canonical_dumps(obj).encode("utf-8")
    if raw is not None:
        body += b"\n" + raw
    if len(body) > MAX_MESSAGE_BYTES:
        raise AgentProtocolError("message exceeds size limit")
    return len(body).to_bytes(4, "big") + body


def decode_message(body: bytes) -> tuple[dict, bytes | None]:
    if b"\n" in body:
        head, raw = body.split(b"\n", 1)
    else:
        head, raw = body, None
    obj = json.loads(head.decode("utf-8"))
    if obj.get("payload") is not None and raw is None:
        raise AgentProtocolError("message announced a payload but carried none")
    return obj, raw


def write_message(stream, obj: dict, raw: bytes | None = None) -> None:
    stream.write(encode_message(obj, raw))
    stream.flush()


def read_message(stream) -> tuple[dict, bytes | None]:
    header = stream.read(4)
    if len(header) < 4:
        raise AgentProtocolError("connection closed mid-message")
    length = int.from_bytes(header, "big")
    if length > MAX_MESSAGE_BYTES:
        raise AgentProtocolError("message exceeds size limit")
    body = b""
    while len(body) < length:
        chunk = stream.read(length - len(body))
        if not chunk:
            raise AgentProtocolError("connection closed mid-message")
        body += chunk
    return decode_message(body)


def encode_observation(observation) -> tuple[dict, bytes | None]:
    if isinstance(observation, np.ndarray):
        if observation.dtype != np.uint8:
            raise AgentProtocolError("pixel observations must be uint8")
        return {"payload": {"dims": list(observation.shape), "dtype": "u8"}}, observation.tobytes()
    if isinstance(observation, GameState):
        return {"observation": observation.to_payload()}, None
    return {"observation": observation}, None


def decode_observation(obj: dict, raw: bytes | None):
    payload = obj.get("payload")
    if payload is not None:
        dims = payload["dims"]
        return np.frombuffer(raw, dtype=np.uint8).reshape(dims).copy()
    observation = obj.get("observation")
    if isinstance(observation, dict) and "board" in observation:
        return GameState.from_payload(observation)
    return observation


@dataclass(frozen=True)
class Capabilities:
    agent_id: str
    observation: str  # "latent" | "pixels"
    channels: frozenset[str]
    version: int = PROTOCOL_VERSION


class RemoteAgent:
    """Harness-side adapter: drives an agent endpoint over the wire.

    Satisfies the in-process agent protocol, so episodes run over the wire
    are byte-identical to in-process runs of the same agent and seed.
    """

    def __init__(
        self,
        host: str,
        port: int,
        environment_id: str,
        config_hash: str,
        action_count: int,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._stream = self._sock.makefile("rwb")
        self._config_hash = config_hash
        self.capabilities = self._negotiate(environment_id, action_count)
        self.agent_id = self.capabilities.agent_id
        self.observation_kind = self.capabilities.observation
        self.channels = self.capabilities.channels

    def _negotiate(self, environment_id: str, action_count: int) -> Capabilities:
        write_message(
            self._stream,
            {
                "kind": "hello",
                "version": PROTOCOL_VERSION,
                "environment_id": environment_id,
                "action_count": action_count,
            },
        )
        reply, _ = self._request_reply()
        if reply.get("kind") == "error":
            raise HandshakeError(reply.get("reason", "handshake rejected"))
        if reply.get("kind") != "capabilities":
            raise HandshakeError(f"expected capabilities, got {reply.get('kind')!r}")
        if reply.get("version") != PROTOCOL_VERSION:
            raise HandshakeError(
                f"protocol version mismatch: harness {PROTOCOL_VERSION}, agent {reply.get('version')}"
            )
        if reply.get("observation") not in ("latent", "pixels"):
            raise HandshakeError(f"unknown observation type {reply.get('observation')!r}")
        return Capabilities(
            agent_id=str(reply["agent_id"]),
            observation=reply["observation"],
            channels=frozenset(reply.get("channels", [])),
        )

    def _request_reply(self) -> tuple[dict, bytes | None]:
        try:
            return read_message(self._stream)
        except (socket.timeout, TimeoutError) as exc:
            raise AgentProtocolError(f"agent endpoint timed out: {exc}") from exc

    def begin_episode(self, seed: int) -> None:
        write_message(
            self._stream, {"kind": "reset", "config_hash": self._config_hash, "seed": seed}
        )
        reply, _ = self._request_reply()
        if reply.get("kind") != "ready":
            raise AgentProtocolError(f"expected ready, got {reply.get('kind')!r}")

    def act(self, observation) -> AgentReply:
        obj, raw = encode_observation(observation)
        obj["kind"] = "act"
        write_message(self._stream, obj, raw)
        reply, _ = self._request_reply()
        if reply.get("kind") != "action":
            raise AgentProtocolError(f"expected action, got {reply.get('kind')!r}")
        action = reply.get("action")
        if not isinstance(action, int):
            raise AgentProtocolError("action index missing or not an integer")
        return AgentReply(
            action=action,
            value=reply.get("value"),
            q=tuple(reply["q"]) if reply.get("q") is not None else None,
            embedding=tuple(reply["embedding"]) if reply.get("embedding") is not None else None,
        )

    def close(self) -> None:
        try:
            write_message(self._stream, {"kind": "close"})
        except Exception:
            pass
        self._sock.close()


class AgentServer:
    """Hosts an in-process agent behind the wire protocol.

    One connection is one session; sessions are handled concurrently, each
    owning its agent instance built by ``agent_factory``.
    """

    def __init__(self, agent_factory, host: str = "127.0.0.1", port: int = 0):
        self._factory = agent_factory
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                outer._serve_session(self.rfile, self.wfile)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.host, self.port = self._server.server_address
        self._thread: threading.Thread | None = None

    def _serve_session(self, rfile, wfile) -> None:
        agent = self._factory()
        try:
            hello, _ = read_message(rfile)
        except AgentProtocolError:
            return
        if hello.get("kind") != "hello" or not isinstance(hello.get("version"), int):
            write_message(wfile, {"kind": "error", "reason": "malformed handshake"})
            return
        if hello["version"] != PROTOCOL_VERSION:
            write_message(
                wfile,
                {
                    "kind": "error",
                    "reason": "protocol version mismatch",
                    "server_version": PROTOCOL_VERSION,
                    "client_version": hello["version"],
                },
            )
            return
        write_message(
            wfile,
            {
                "kind": "capabilities",
                "version": PROTOCOL_VERSION,
                "agent_id": agent.agent_id,
                "observation": agent.observation_kind,
                "channels": sorted(agent.channels),
            },
        )
        while True:
            try:
                obj, raw = read_message(rfile)
            except AgentProtocolError:
                return
            kind = obj.get("kind")
            if kind == "close":
                return
            if kind == "reset":
                agent.begin_episode(int(obj["seed"]))
                write_message(wfile, {"kind": "ready"})
            elif kind == "act":
                reply = agent.act(decode_observation(obj, raw))
                out: dict = {"kind": "action", "action": int(reply.action)}
                if reply.value is not None:
                    out["value"] = reply.value
                if reply.q is not None:
                    out["q"] = list(reply.q)
                if reply.embedding is not None:
                    out["embedding"] = list(reply.embedding)
                write_message(wfile, out)
            else:
                write_message(wfile, {"kind": "error", "reason": f"unknown message kind {kind!r}"})
                return

    def start(self) -> "AgentServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
