// Page wiring: canvas, score line, keyboard, connection status.

import { PlayClient } from "./client.js";
import { frameToRgba } from "./render.js";

const SCALE = 2;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("board");
  const status = byId<HTMLElement>("status");
  const scoreLine = byId<HTMLElement>("score");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");

  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? `ws://${window.location.hostname}:8765/ws`;
  const playerId = params.get("player") ?? "anonymous";

  const socket = new WebSocket(server);
  const client = new PlayClient(socket, {
    onUpdate: (view) => {
      const image = frameToRgba(view.frame, view.width, view.height, SCALE);
      canvas.width = image.width;
      canvas.height = image.height;
      ctx.putImageData(new ImageData(image.pixels, image.width, image.height), 0, 0);
      scoreLine.textContent = `score ${view.score} · step ${view.step}`;
      if (view.terminal) {
        status.textContent = view.win
          ? `you win — final score ${view.score}`
          : `game over — final score ${view.score}`;
      }
    },
    onClosed: (summary) => {
      status.textContent =
        `session archived as ${summary.entry_id}` +
        (summary.eligible ? " (eligible)" : " (too short for extraction)");
    },
    onError: (message) => {
      status.textContent = `server: ${message}`;
    },
    onInterrupted: () => {
      status.textContent = "connection lost — session interrupted";
    },
  });

  socket.addEventListener("open", () => {
    status.textContent = "connected — arrows move, space waits";
    client.create(playerId);
  });

  window.addEventListener("keydown", (event) => {
    if (client.pressKey(event.key)) event.preventDefault();
  });
  byId<HTMLButtonElement>("end").addEventListener("click", () => client.close());
}

main();
