// Wire protocol for the streaming service's operator WebSocket.
// Messages are JSON frames; the service tags everything with t/seq/session.

export type Phase =
  | "idle"
  | "loaded"
  | "printing"
  | "paused"
  | "stopping"
  | "done"
  | "faulted";

export interface StatusMessage {
  t: "STATUS";
  seq: number;
  session: string;
  phase: Phase;
  progress: number;
  layer: number;
  elapsed: number;
  eta: number | null;
  defects: number;
}

export interface DefectMessage {
  t: "DEFECT";
  seq: number;
  session: string;
  entry: Record<string, unknown>;
}

export interface DoneMessage {
  t: "DONE";
  seq: number;
  session: string;
}

export interface ErrorMessage {
  t: "ERROR";
  seq: number;
  session: string;
  reason: string;
}

export type EventMessage = StatusMessage | DefectMessage | DoneMessage | ErrorMessage;

export type ControlMessage =
  | { t: "START" }
  | { t: "PAUSE" }
  | { t: "RESUME" }
  | { t: "STOP" }
  | { t: "SET_FLOW"; mult: number };

const PHASES = new Set([
  "idle",
  "loaded",
  "printing",
  "paused",
  "stopping",
  "done",
  "faulted",
]);

export function parseEvent(raw: string): EventMessage | null {
  let msg: any;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  if (typeof msg.seq !== "number") return null;
  switch (msg.t) {
    case "STATUS":
      if (!PHASES.has(msg.phase)) return null;
      if (typeof msg.progress !== "number") return null;
      return msg as StatusMessage;
    case "DEFECT":
      return msg as DefectMessage;
    case "DONE":
      return msg as DoneMessage;
    case "ERROR":
      if (typeof msg.reason !== "string") return null;
      return msg as ErrorMessage;
    default:
      return null;
  }
}

// Validate outbound frames before they hit the wire so malformed commands
// are unrepresentable past this point.
export function encodeControl(msg: ControlMessage): string {
  if (msg.t === "SET_FLOW") {
    if (!(typeof msg.mult === "number" && msg.mult > 0 && msg.mult <= 2)) {
      throw new Error("SET_FLOW multiplier must be in (0, 2]");
    }
    return JSON.stringify({ t: "SET_FLOW", mult: msg.mult });
  }
  if (!["START", "PAUSE", "RESUME", "STOP"].includes(msg.t)) {
    throw new Error(`unknown control ${String((msg as any).t)}`);
  }
  return JSON.stringify({ t: msg.t });
}
