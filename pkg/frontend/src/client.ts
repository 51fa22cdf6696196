// Session loop: create -> (keypress -> act -> frame)* -> close.
//
// Input discipline is one-in-flight: accepted inputs queue locally and the
// next act message goes out only after the previous response arrived, so
// the server steps exactly once per input in order.  Every displayed frame
// originated from a server message; the client holds no game logic.

import { actionForKey } from "./keys.js";
import {
  Action,
  ClosedMessage,
  FrameFields,
  ServerMessage,
  actMessage,
  closeMessage,
  createMessage,
  decodeFrame,
  parseServerMessage,
} from "./protocol.js";

/** Minimal socket surface shared by browser WebSocket and the ws package. */
export interface WireSocket {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export interface ClientSessionView {
  sessionId: string;
  width: number;
  height: number;
  frame: Uint8Array;
  score: number;
  step: number;
  terminal: boolean;
  win: boolean;
}

export interface PlayClientEvents {
  onUpdate?: (view: ClientSessionView) => void;
  onClosed?: (summary: ClosedMessage) => void;
  onError?: (message: string) => void;
  onInterrupted?: () => void;
}

export class PlayClient {
  readonly actionLog: Action[] = [];

  private socket: WireSocket;
  private events: PlayClientEvents;
  private sessionView: ClientSessionView | null = null;
  private queue: Action[] = [];
  private inFlight = false;
  private closing = false;
  private finished = false;
  private interruptedFlag = false;

  constructor(socket: WireSocket, events: PlayClientEvents = {}) {
    this.socket = socket;
    this.events = events;
    socket.addEventListener("message", (event: any) => {
      const text = typeof event.data === "string" ? event.data : String(event.data);
      this.handleMessage(parseServerMessage(text));
    });
    socket.addEventListener("close", () => {
      if (!this.finished) {
        this.interruptedFlag = true;
        this.events.onInterrupted?.();
      }
    });
  }

  get view(): ClientSessionView | null {
    return this.sessionView;
  }

  get interrupted(): boolean {
    return this.interruptedFlag;
  }

  get pendingInputs(): number {
    return this.queue.length + (this.inFlight ? 1 : 0);
  }

  create(playerId: string, seed = 0, configHash?: string): void {
    this.socket.send(createMessage(playerId, seed, configHash));
  }

  /** Map a key to an action and enqueue it; false when the input is ignored
   * (no live session, terminal state, close pending, or unmapped key). */
  pressKey(key: string): boolean {
    const action = actionForKey(key);
    if (action === null) return false;
    return this.sendAction(action);
  }

  sendAction(action: Action): boolean {
    if (!this.sessionView || this.sessionView.terminal || this.closing || this.finished) {
      return false;
    }
    this.queue.push(action);
    this.pump();
    return true;
  }

  /** Close after all queued inputs have been answered. */
  close(): void {
    this.closing = true;
    this.pump();
  }

  private pump(): void {
    if (this.inFlight || !this.sessionView) return;
    const next = this.queue.shift();
    if (next !== undefined) {
      this.inFlight = true;
      this.actionLog.push(next);
      this.socket.send(actMessage(this.sessionView.sessionId, next));
      return;
    }
    if (this.closing && !this.finished) {
      this.finished = true;
      this.socket.send(closeMessage(this.sessionView.sessionId));
    }
  }

  private handleMessage(msg: ServerMessage): void {
    switch (msg.kind) {
      case "session":
        this.sessionView = viewFromFields(msg);
        this.events.onUpdate?.(this.sessionView);
        this.pump();
        break;
      case "frame":
        this.inFlight = false;
        this.sessionView = viewFromFields(msg);
        if (this.sessionView.terminal) {
          this.queue = [];
        }
        this.events.onUpdate?.(this.sessionView);
        this.pump();
        break;
      case "closed":
        this.finished = true;
        this.events.onClosed?.(msg);
        break;
      case "error":
        this.inFlight = false;
        this.events.onError?.(msg.message);
        this.pump();
        break;
    }
  }
}

function viewFromFields(fields: FrameFields): ClientSessionView {
  return {
    sessionId: fields.session_id,
    width: fields.width,
    height: fields.height,
    frame: decodeFrame(fields.frame),
    score: fields.score,
    step: fields.step,
    terminal: fields.terminal,
    win: fields.win,
  };
}
