import type { Action } from "./protocol.js";

// Four directions plus no-move; matches the server's action order
// ["noop", "up", "right", "down", "left"].
export const KEY_TO_ACTION: Readonly<Record<string, Action>> = {
  " ": 0,
  ArrowUp: 1,
  ArrowRight: 2,
  ArrowDown: 3,
  ArrowLeft: 4,
};

export function actionForKey(key: string): Action | null {
  return key in KEY_TO_ACTION ? KEY_TO_ACTION[key] : null;
}
