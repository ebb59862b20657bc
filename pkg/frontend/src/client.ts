import {
  ControlMessage,
  EventMessage,
  Phase,
  encodeControl,
  parseEvent,
} from "./protocol.js";

// Minimal surface of a WebSocket so tests can inject scripted fakes.
export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface DefectRow {
  seq: number;
  entry: Record<string, unknown>;
}

export type ConnectionState = "connecting" | "connected" | "disconnected";

// Everything the console renders. Derives only from received events plus
// the local pending command and slider state; the console never invents
// phase or progress values of its own.
export interface SessionView {
  connection: ConnectionState;
  phase: Phase | null;
  progress: number;
  layer: number;
  elapsed: number;
  eta: number | null;
  defects: DefectRow[]; // most recent first
  flowMult: number;
  stale: boolean;
  lastError: string | null;
  pendingCommand: string | null;
  stopArmed: boolean;
}

export interface ClientOptions {
  socketFactory?: SocketFactory;
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => unknown;
  cancel?: (handle: unknown) => void;
  backoffMs?: number[];
  staleAfterMs?: number;
}

const DEFAULT_BACKOFF = [500, 1000, 2000, 5000];
const STALE_AFTER_MS = 3000;
const STALE_POLL_MS = 1000;

export class SessionClient {
  readonly view: SessionView = {
    connection: "disconnected",
    phase: null,
    progress: 0,
    layer: 0,
    elapsed: 0,
    eta: null,
    defects: [],
    flowMult: 1.0,
    stale: false,
    lastError: null,
    pendingCommand: null,
    stopArmed: false,
  };

  private url = "";
  private socket: SocketLike | null = null;
  private listeners: Array<(view: SessionView) => void> = [];
  private seenDefectSeqs = new Set<number>();
  private lastStatusAt: number | null = null;
  private attempts = 0;
  private closedByUser = false;
  private reconnectHandle: unknown = null;
  private staleHandle: unknown = null;

  private readonly makeSocket: SocketFactory;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private readonly cancel: (handle: unknown) => void;
  private readonly backoff: number[];
  private readonly staleAfterMs: number;

  constructor(opts: ClientOptions = {}) {
    this.makeSocket =
      opts.socketFactory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    this.now = opts.now ?? (() => Date.now());
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = opts.cancel ?? ((h) => clearTimeout(h as any));
    this.backoff = opts.backoffMs ?? DEFAULT_BACKOFF;
    this.staleAfterMs = opts.staleAfterMs ?? STALE_AFTER_MS;
  }

  onChange(listener: (view: SessionView) => void): void {
    this.listeners.push(listener);
  }

  connect(url: string): void {
    this.url = url;
    this.closedByUser = false;
    this.open();
    this.staleHandle = this.schedule(() => this.pollStale(), STALE_POLL_MS);
  }

  disconnect(): void {
    this.closedByUser = true;
    if (this.reconnectHandle !== null) this.cancel(this.reconnectHandle);
    if (this.staleHandle !== null) this.cancel(this.staleHandle);
    this.socket?.close();
    this.socket = null;
    this.view.connection = "disconnected";
    this.emit();
  }

  // -- commands -----------------------------------------------------------

  start(): void {
    this.sendControl({ t: "START" });
  }

  pause(): void {
    this.sendControl({ t: "PAUSE" });
  }

  resume(): void {
    this.sendControl({ t: "RESUME" });
  }

  // Stop is destructive, so the first call only arms the confirm step.
  requestStop(): void {
    this.view.stopArmed = true;
    this.emit();
  }

  confirmStop(): void {
    if (!this.view.stopArmed) throw new Error("stop not armed");
    this.view.stopArmed = false;
    this.sendControl({ t: "STOP" });
  }

  cancelStop(): void {
    this.view.stopArmed = false;
    this.emit();
  }

  setFlow(mult: number): void {
    this.sendControl({ t: "SET_FLOW", mult });
    this.view.flowMult = mult;
    this.emit();
  }

  private sendControl(msg: ControlMessage): void {
    if (this.view.connection !== "connected" || !this.socket) {
      throw new Error("not connected");
    }
    const frame = encodeControl(msg); // throws before anything malformed sends
    this.socket.send(frame);
    this.view.pendingCommand = msg.t;
    this.emit();
  }

  // -- socket lifecycle ---------------------------------------------------

  private open(): void {
    this.view.connection = "connecting";
    this.emit();
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.view.connection = "connected";
      this.view.lastError = null;
      this.emit();
    };
    socket.onmessage = (ev) => {
      const msg = parseEvent(ev.data);
      if (msg) this.apply(msg);
    };
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.view.connection = "disconnected";
      this.view.pendingCommand = null;
      this.emit();
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    const delay = this.backoff[Math.min(this.attempts, this.backoff.length - 1)];
    this.attempts += 1;
    this.reconnectHandle = this.schedule(() => this.open(), delay);
  }

  private pollStale(): void {
    const wasStale = this.view.stale;
    this.view.stale =
      this.lastStatusAt !== null && this.now() - this.lastStatusAt > this.staleAfterMs;
    if (this.view.stale !== wasStale) this.emit();
    if (!this.closedByUser) {
      this.staleHandle = this.schedule(() => this.pollStale(), STALE_POLL_MS);
    }
  }

  // -- event application --------------------------------------------------

  private apply(msg: EventMessage): void {
    switch (msg.t) {
      case "STATUS":
        this.view.phase = msg.phase;
        this.view.progress = msg.progress;
        this.view.layer = msg.layer;
        this.view.elapsed = msg.elapsed;
        this.view.eta = msg.eta;
        this.view.pendingCommand = null;
        this.lastStatusAt = this.now();
        this.view.stale = false;
        break;
      case "DEFECT":
        // the service replays nothing, but a reconnect snapshot plus an
        // in-flight frame can race: dedupe by seq so rows appear once
        if (this.seenDefectSeqs.has(msg.seq)) return;
        this.seenDefectSeqs.add(msg.seq);
        this.view.defects.unshift({ seq: msg.seq, entry: msg.entry ?? {} });
        break;
      case "DONE":
        this.view.phase = "done";
        this.view.pendingCommand = null;
        break;
      case "ERROR":
        this.view.lastError = msg.reason;
        this.view.pendingCommand = null; // controls re-enabled
        break;
    }
    this.emit();
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.view);
  }
}
