// Which lifecycle buttons are allowed in which state. This mirrors the
// server's transition graph so the UI can never offer an illegal action;
// the server would reject it anyway, this just keeps buttons honest.

import type { WorkspaceState } from "./types.js";

export type WorkspaceAction = "start" | "stop" | "rebuild" | "delete";

export const LEGAL_ACTIONS: Record<WorkspaceState, readonly WorkspaceAction[]> = {
  Pending: [],
  Pulling: [],
  Initializing: [],
  Running: ["stop"],
  Stopped: ["start", "delete"],
  Failed: ["rebuild", "delete"],
  Deleted: [],
};

export function enabledActions(state: WorkspaceState): readonly WorkspaceAction[] {
  return LEGAL_ACTIONS[state] ?? [];
}

export function isEnabled(state: WorkspaceState, action: WorkspaceAction): boolean {
  return enabledActions(state).includes(action);
}
