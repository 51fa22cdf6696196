"""Scripted agents, wire-protocol codec, and over-the-wire conformance."""

import random
import socket
from pathlib import Path

import numpy as np
import pytest

from intervenidar.agents import (
    GreedyPainterAgent,
    StationaryAgent,
    UniformRandomAgent,
    make_agent,
    track_edge_count,
)
from intervenidar.board import GameConfig
from intervenidar.game import IntervenidarEnv, new_game
from intervenidar.mdp import AgentProtocolError, run_episode
from intervenidar.wire import (
    PROTOCOL_VERSION,
    AgentServer,
    HandshakeError,
    RemoteAgent,
    decode_message,
    decode_observation,
    encode_message,
    encode_observation,
    read_message,
    write_message,
)

GOLDEN_TRANSCRIPT = Path(__file__).parent / "golden" / "wire_transcript.bin"


class TestScriptedAgents:
    def test_stationary_always_noop(self, default_config):
        agent = StationaryAgent()
        agent.begin_episode(1)
        state = new_game(default_config)
        assert all(agent.act(state).action == 0 for _ in range(20))

    def test_random_frequencies(self):
        agent = UniformRandomAgent()
        agent.begin_episode(123)
        n = 10_000
        counts = [0] * 5
        for _ in range(n):
            counts[agent.act(None).action] += 1
        for c in counts:
            assert abs(c / n - 0.2) < 0.02

    def test_random_deterministic_given_seed(self):
        a, b = UniformRandomAgent(), UniformRandomAgent()
        a.begin_episode(9)
        b.begin_episode(9)
        assert [a.act(None).action for _ in range(50)] == [b.act(None).action for _ in range(50)]

    def test_greedy_fills_all_segments_on_enemy_free_board(self, default_config):
        free = GameConfig(
            name="enemy-free",
            board=default_config.board,
            player_start=default_config.player_start,
            enemies=[],
        )
        budget = 2 * track_edge_count(free.board)  # depth-first tour bound
        env = IntervenidarEnv(free)
        tr = run_episode(env, GreedyPainterAgent(), seed=0, max_steps=budget)
        assert env.current_state.win
        assert tr.reward_sum == 88
        assert len(tr) <= budget

    def test_unknown_builtin_rejected(self):
        with pytest.raises(KeyError):
            make_agent("dqn")


class TestCodec:
    def test_round_trip_plain(self):
        msgs = [
            {"kind": "hello", "version": 1, "environment_id": "intervenidar", "action_count": 5},
            {"kind": "reset", "config_hash": "abc", "seed": 17},
            {"kind": "action", "action": 3, "value": 1.25, "q": [0.0, 1.0], "embedding": [0.5]},
            {"kind": "close"},
        ]
        for msg in msgs:
            data = encode_message(msg)
            obj, raw = decode_message(data[4:])
            assert obj == msg and raw is None

    def test_round_trip_with_frame_payload(self):
        frame = np.arange(24, dtype=np.uint8).reshape(4, 2, 3)
        obj, raw = encode_observation(frame)
        obj["kind"] = "act"
        data = encode_message(obj, raw)
        back_obj, back_raw = decode_message(data[4:])
        restored = decode_observation(back_obj, back_raw)
        assert np.array_equal(restored, frame)

    def test_latent_observation_round_trip(self, default_config):
        state = new_game(default_config)
        obj, raw = encode_observation(state)
        restored = decode_observation(obj, raw)
        assert restored.latent_digest() == state.latent_digest()

    def test_fuzzed_round_trip(self):
        rng = random.Random(7)
        for _ in range(300):
            msg = {
                "kind": rng.choice(["act", "action", "reset", "ready"]),
                "action": rng.randrange(5),
                "value": rng.random(),
                "nested": {"seed": rng.randrange(2**63)},
            }
            raw = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64))) or None
            if raw is not None:
                msg["payload"] = {"dims": [len(raw)], "dtype": "u8"}
            obj, back = decode_message(encode_message(msg, raw)[4:])
            assert obj == msg
            assert back == raw

    def test_announced_payload_must_be_present(self):
        data = encode_message({"kind": "act", "payload": {"dims": [1], "dtype": "u8"}})
        with pytest.raises(AgentProtocolError):
            decode_message(data[4:])

    def test_golden_transcript(self):
        transcript = [
            encode_message(
                {
                    "kind": "hello",
                    "version": PROTOCOL_VERSION,
                    "environment_id": "intervenidar",
                    "action_count": 5,
                }
            ),
            encode_message(
                {
                    "kind": "capabilities",
                    "version": PROTOCOL_VERSION,
                    "agent_id": "stationary",
                    "observation": "latent",
                    "channels": [],
                }
            ),
            encode_message({"kind": "reset", "config_hash": "c" * 64, "seed": 7}),
            encode_message({"kind": "ready"}),
            encode_message(
                {"kind": "act", "payload": {"dims": [2, 2], "dtype": "u8"}},
                bytes([0, 64, 144, 255]),
            ),
            encode_message({"kind": "action", "action": 0}),
            encode_message({"kind": "close"}),
        ]
        blob = b"".join(transcript)
        assert blob == GOLDEN_TRANSCRIPT.read_bytes()
        # the pinned bytes must parse back into the same message sequence
        offset = 0
        kinds = []
        while offset < len(blob):
            length = int.from_bytes(blob[offset : offset + 4], "big")
            obj, _ = decode_message(blob[offset + 4 : offset + 4 + length])
            kinds.append(obj["kind"])
            offset += 4 + length
        assert kinds == ["hello", "capabilities", "reset", "ready", "act", "action", "close"]


class TestWireSessions:
    def test_negotiate_builtin_capabilities(self, default_config):
        server = AgentServer(StationaryAgent).start()
        try:
            remote = RemoteAgent(
                server.host, server.port, "intervenidar", default_config.config_hash, 5
            )
            assert remote.capabilities.observation == "latent"
            assert remote.capabilities.channels == frozenset()
            assert remote.agent_id == "stationary"
            remote.close()
        finally:
            server.stop()

    def test_version_mismatch_reports_both_versions(self, default_config):
        server = AgentServer(StationaryAgent).start()
        try:
            sock = socket.create_connection((server.host, server.port), timeout=5)
            stream = sock.makefile("rwb")
            write_message(
                stream,
                {"kind": "hello", "version": 999, "environment_id": "intervenidar", "action_count": 5},
            )
            reply, _ = read_message(stream)
            assert reply["kind"] == "error"
            assert reply["server_version"] == PROTOCOL_VERSION
            assert reply["client_version"] == 999
            sock.close()
        finally:
            server.stop()

    def test_malformed_handshake_fails_without_episode(self, default_config):
        server = AgentServer(StationaryAgent).start()
        try:
            sock = socket.create_connection((server.host, server.port), timeout=5)
            stream = sock.makefile("rwb")
            write_message(stream, {"kind": "reset", "seed": 0})
            reply, _ = read_message(stream)
            assert reply["kind"] == "error"
            sock.close()
        finally:
            server.stop()

    def test_wire_episode_equals_in_process(self, default_config):
        in_process = run_episode(
            IntervenidarEnv(default_config), UniformRandomAgent(), seed=33, max_steps=300
        )
        server = AgentServer(UniformRandomAgent).start()
        try:
            remote = RemoteAgent(
                server.host, server.port, "intervenidar", default_config.config_hash, 5
            )
            over_wire = run_episode(
                IntervenidarEnv(default_config), remote, seed=33, max_steps=300
            )
            remote.close()
        finally:
            server.stop()
        assert [s.digest for s in over_wire.steps] == [s.digest for s in in_process.steps]
        assert over_wire.to_bytes() == in_process.to_bytes()

    def test_handshake_error_type(self):
        assert issubclass(HandshakeError, AgentProtocolError)

    def test_optional_channels_flow_into_trajectory(self, default_config):
        class EstimatingAgent:
            observation_kind = "latent"
            channels = frozenset({"value", "q", "embedding"})
            agent_id = "estimator"

            def begin_episode(self, seed):
                self.t = 0

            def act(self, observation):
                self.t += 1
                return AgentReply(
                    action=0,
                    value=float(self.t),
                    q=(0.0, 1.0, 2.0, 3.0, 4.0),
                    embedding=(1.5, -2.5),
                )

        from intervenidar.mdp import AgentReply

        server = AgentServer(EstimatingAgent).start()
        try:
            remote = RemoteAgent(
                server.host, server.port, "intervenidar", default_config.config_hash, 5
            )
            assert remote.channels == frozenset({"value", "q", "embedding"})
            tr = run_episode(IntervenidarEnv(default_config), remote, seed=1, max_steps=5)
            remote.close()
        finally:
            server.stop()
        assert [s.value for s in tr.steps] == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert all(s.embedding == (1.5, -2.5) for s in tr.steps)

    def test_timeout_aborts_episode(self, default_config):
        import time

        class SlowAgent:
            observation_kind = "latent"
            channels = frozenset()
            agent_id = "slow"

            def begin_episode(self, seed):
                pass

            def act(self, observation):
                time.sleep(1.0)
                from intervenidar.mdp import AgentReply

                return AgentReply(action=0)

        server = AgentServer(SlowAgent).start()
        try:
            remote = RemoteAgent(
                server.host,
                server.port,
                "intervenidar",
                default_config.config_hash,
                5,
                timeout=0.2,
            )
            tr = run_episode(IntervenidarEnv(default_config), remote, seed=1, max_steps=5)
            remote.close()
        finally:
            server.stop()
        assert tr.aborted
        assert "timed out" in tr.diagnostic
