import { SocketLike } from "../src/client.js";

// Scripted stand-in for the streaming service: every socket the factory
// hands out is remembered so tests can drive opens, frames, and drops.
export class FakeSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  // test-side controls
  open(): void {
    this.onopen?.();
  }

  emit(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  drop(): void {
    this.onclose?.();
  }
}

export class FakeService {
  sockets: FakeSocket[] = [];
  seq = 0;

  factory = (_url: string): FakeSocket => {
    const s = new FakeSocket();
    this.sockets.push(s);
    return s;
  };

  get current(): FakeSocket {
    return this.sockets[this.sockets.length - 1];
  }

  status(fields: Partial<Record<string, unknown>> = {}): void {
    this.seq += 1;
    this.current.emit({
      t: "STATUS",
      seq: this.seq,
      session: "s0",
      phase: "printing",
      progress: 0,
      layer: 0,
      elapsed: 0,
      eta: null,
      defects: 0,
      ...fields,
    });
  }

  defect(entry: object, seq?: number): number {
    if (seq === undefined) {
      this.seq += 1;
      seq = this.seq;
    }
    this.current.emit({ t: "DEFECT", seq, session: "s0", entry });
    return seq;
  }

  error(reason: string): void {
    this.seq += 1;
    this.current.emit({ t: "ERROR", seq: this.seq, session: "s0", reason });
  }
}

// Manual timer queue so reconnect backoff and stale polling run without
// real time passing.
export class FakeClock {
  nowMs = 0;
  private timers: Array<{ at: number; fn: () => void; id: number }> = [];
  private nextId = 1;

  now = (): number => this.nowMs;

  schedule = (fn: () => void, ms: number): unknown => {
    const id = this.nextId++;
    this.timers.push({ at: this.nowMs + ms, fn, id });
    return id;
  };

  cancel = (handle: unknown): void => {
    this.timers = this.timers.filter((t) => t.id !== handle);
  };

  advance(ms: number): void {
    const target = this.nowMs + ms;
    for (;;) {
      const due = this.timers
        .filter((t) => t.at <= target)
        .sort((a, b) => a.at - b.at)[0];
      if (!due) break;
      this.timers = this.timers.filter((t) => t.id !== due.id);
      this.nowMs = due.at;
      due.fn();
    }
    this.nowMs = target;
  }
}
