// Message schema of the play service: JSON text over a WebSocket at /ws.
// The client speaks this schema only; it never fabricates game state.

export const PROTOCOL_VERSION = 1;

export type Action = 0 | 1 | 2 | 3 | 4;

export interface FrameFields {
  session_id: string;
  width: number;
  height: number;
  frame: string; // base64 raw grayscale, width * height bytes
  score: number;
  step: number;
  terminal: boolean;
  win: boolean;
}

export interface SessionMessage extends FrameFields {
  kind: "session";
  version: number;
  config_hash: string;
  actions: string[];
  player_id: string;
}

export interface FrameMessage extends FrameFields {
  kind: "frame";
  reward: number;
}

export interface ClosedMessage {
  kind: "closed";
  session_id: string;
  entry_id: string;
  length: number;
  eligible: boolean;
  replay_verified: boolean;
  tombstoned: boolean;
}

export interface ErrorMessage {
  kind: "error";
  message: string;
}

export type ServerMessage = SessionMessage | FrameMessage | ClosedMessage | ErrorMessage;

export function parseServerMessage(text: string): ServerMessage {
  const raw = JSON.parse(text) as { kind?: string };
  switch (raw.kind) {
    case "session":
    case "frame":
    case "closed":
    case "error":
      return raw as ServerMessage;
    default:
      throw new Error(`unknown server message kind: ${String(raw.kind)}`);
  }
}

export function createMessage(playerId: string, seed = 0, configHash?: string): string {
  const msg: Record<string, unknown> = { kind: "create", player_id: playerId, seed };
  if (configHash !== undefined) msg.config_hash = configHash;
  return JSON.stringify(msg);
}

export function actMessage(sessionId: string, action: Action): string {
  return JSON.stringify({ kind: "act", session_id: sessionId, action });
}

export function closeMessage(sessionId: string): string {
  return JSON.stringify({ kind: "close", session_id: sessionId });
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

/** Decode base64 grayscale frame bytes; works in browsers and Node alike. */
export function decodeFrame(b64: string): Uint8Array {
  const clean = b64.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((clean.length * 3) / 4));
  let buffer = 0;
  let bits = 0;
  let o = 0;
  for (const ch of clean) {
    const v = B64.indexOf(ch);
    if (v < 0) throw new Error(`invalid base64 character: ${ch}`);
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[o++] = (buffer >> bits) & 0xff;
    }
  }
  return out;
}
