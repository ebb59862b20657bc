import { describe, expect, it } from "vitest";

import { SessionClient } from "../src/client.js";
import { encodeControl, parseEvent } from "../src/protocol.js";
import { formatView } from "../src/render.js";
import { FakeClock, FakeService } from "./fake.js";

function makeClient() {
  const service = new FakeService();
  const clock = new FakeClock();
  const client = new SessionClient({
    socketFactory: service.factory,
    now: clock.now,
    schedule: clock.schedule,
    cancel: clock.cancel,
    backoffMs: [100, 200, 400],
  });
  client.connect("ws://test");
  service.current.open();
  return { client, service, clock };
}

describe("session view", () => {
  it("renders monotone progress from a STATUS stream", () => {
    const { client, service } = makeClient();
    const seen: number[] = [];
    client.onChange((v) => seen.push(v.progress));
    for (const p of [0.1, 0.25, 0.4, 0.75, 1.0]) {
      service.status({ progress: p, phase: p < 1 ? "printing" : "done" });
    }
    const progress = seen.filter((_, i) => i % 1 === 0);
    expect(progress).toEqual([...progress].sort((a, b) => a - b));
    expect(client.view.progress).toBe(1.0);
    expect(client.view.phase).toBe("done");
  });

  it("derives every rendered value from received messages", () => {
    const { client, service } = makeClient();
    service.status({ progress: 0.5, layer: 7, elapsed: 120, eta: 60 });
    expect(client.view.layer).toBe(7);
    expect(client.view.elapsed).toBe(120);
    expect(client.view.eta).toBe(60);
    expect(formatView(client.view)).toContain("50%");
    expect(formatView(client.view)).toContain("layer 7");
  });

  it("flags the view stale after 3 s without STATUS", () => {
    const { client, service, clock } = makeClient();
    service.status({ progress: 0.2 });
    clock.advance(2000);
    expect(client.view.stale).toBe(false);
    clock.advance(2000);
    expect(client.view.stale).toBe(true);
    service.status({ progress: 0.3 });
    expect(client.view.stale).toBe(false);
  });
});

describe("defect feed", () => {
  it("applies a DEFECT exactly once across a reconnect", () => {
    const { client, service, clock } = makeClient();
    service.status({ progress: 0.1 });
    const seq = service.defect({ kind: "underextrusion", layer: 3 });

    service.current.drop();
    expect(client.view.connection).toBe("disconnected");
    clock.advance(100); // first backoff step
    expect(service.sockets.length).toBe(2);
    service.current.open();
    expect(client.view.connection).toBe("connected");

    // the same frame arrives again after resync
    service.defect({ kind: "underextrusion", layer: 3 }, seq);
    service.defect({ kind: "blob", layer: 5 });

    expect(client.view.defects.length).toBe(2);
    expect(client.view.defects[0].entry).toEqual({ kind: "blob", layer: 5 }); // newest first
  });

  it("reconnects with growing backoff", () => {
    const { service, clock } = makeClient();
    service.current.drop();
    clock.advance(99);
    expect(service.sockets.length).toBe(1);
    clock.advance(1);
    expect(service.sockets.length).toBe(2);
    service.current.drop(); // fails again before opening
    clock.advance(199);
    expect(service.sockets.length).toBe(2);
    clock.advance(1);
    expect(service.sockets.length).toBe(3);
  });
});

describe("commands", () => {
  it("emits schema-exact PAUSE and SET_FLOW frames", () => {
    const { client, service } = makeClient();
    client.pause();
    client.setFlow(0.8);
    expect(service.current.sent).toEqual(['{"t":"PAUSE"}', '{"t":"SET_FLOW","mult":0.8}']);
    expect(client.view.flowMult).toBe(0.8);
  });

  it("rejects out-of-range flow before anything reaches the wire", () => {
    const { client, service } = makeClient();
    expect(() => client.setFlow(0)).toThrow();
    expect(() => client.setFlow(2.5)).toThrow();
    expect(service.current.sent).toEqual([]);
  });

  it("surfaces ERROR on an illegal START and re-enables controls", () => {
    const { client, service } = makeClient();
    service.status({ phase: "printing", progress: 0.4 });
    client.start();
    expect(client.view.pendingCommand).toBe("START");
    service.error("illegal transition: START while printing");
    expect(client.view.lastError).toContain("illegal transition");
    expect(client.view.pendingCommand).toBe(null);
  });

  it("requires a confirm step before STOP is sent", () => {
    const { client, service } = makeClient();
    client.requestStop();
    expect(service.current.sent).toEqual([]);
    expect(client.view.stopArmed).toBe(true);
    client.confirmStop();
    expect(service.current.sent).toEqual(['{"t":"STOP"}']);
    expect(() => client.confirmStop()).toThrow(); // disarmed after sending
  });

  it("clears the pending command once STATUS reflects the transition", () => {
    const { client, service } = makeClient();
    service.status({ phase: "printing", progress: 0.1 });
    client.pause();
    expect(client.view.pendingCommand).toBe("PAUSE");
    service.status({ phase: "paused", progress: 0.1 });
    expect(client.view.pendingCommand).toBe(null);
    expect(client.view.phase).toBe("paused");
  });

  it("refuses to send while disconnected", () => {
    const { client, service } = makeClient();
    service.current.drop();
    expect(() => client.pause()).toThrow("not connected");
  });
});

describe("protocol helpers", () => {
  it("drops malformed frames instead of rendering them", () => {
    expect(parseEvent("not json")).toBeNull();
    expect(parseEvent('{"t":"STATUS"}')).toBeNull(); // missing seq
    expect(parseEvent('{"t":"STATUS","seq":1,"phase":"melting","progress":0}')).toBeNull();
    expect(parseEvent('{"t":"NOPE","seq":1}')).toBeNull();
  });

  it("encodes only known controls", () => {
    expect(encodeControl({ t: "START" })).toBe('{"t":"START"}');
    expect(() => encodeControl({ t: "WARP" } as never)).toThrow();
  });
});
