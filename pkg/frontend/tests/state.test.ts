import { describe, expect, it } from "vitest";

import { AnimationQueue, SessionState, diffAgainstSnapshot } from "../src/state.js";
import type { Snapshot, TraceRecord } from "../src/types.js";

let seq = 0;
function rec(at: number, kind: TraceRecord["kind"], fields: Record<string, unknown>): TraceRecord {
  return { at, seq: seq++, kind, ...fields } as TraceRecord;
}

describe("session state folding", () => {
  it("folds routes, caches and faults from the record stream", () => {
    seq = 0;
    const s = new SessionState();
    s.apply(rec(0, "route_changed", {
      node: "R1", prefix: "10.0.0.0", prefix_len: 24, change: "add",
      metric: 1, next_hop: null, source: "connected",
    }));
    s.apply(rec(5, "route_changed", {
      node: "R1", prefix: "10.0.1.0", prefix_len: 24, change: "add",
      metric: 2, next_hop: "10.0.0.2", source: "rip",
    }));
    s.apply(rec(9, "cache_changed", { node: "R1", ip: "10.0.0.2", hw: "02:00:00:00:00:02", change: "add" }));
    s.apply(rec(12, "fault_applied", { action: "break_link", segment: "S1" }));
    s.apply(rec(14, "fault_applied", { action: "set_power", node: "H2", value: "off" }));
    expect(s.nodeRoutes("R1")).toHaveLength(2);
    expect(s.arpCaches.get("R1")?.get("10.0.0.2")).toBe("02:00:00:00:00:02");
    expect(s.linkStatus.get("S1")).toBe("broken");
    expect(s.power.get("H2")).toBe("off");
    s.apply(rec(20, "route_changed", {
      node: "R1", prefix: "10.0.1.0", prefix_len: 24, change: "delete",
      metric: 16, next_hop: "10.0.0.2", source: "rip",
    }));
    s.apply(rec(21, "cache_changed", { node: "R1", ip: "10.0.0.2", hw: "02:00:00:00:00:02", change: "expire" }));
    expect(s.nodeRoutes("R1")).toHaveLength(1);
    expect(s.arpCaches.get("R1")?.size).toBe(0);
  });

  it("records reports and delivered payloads", () => {
    seq = 0;
    const s = new SessionState();
    s.apply(rec(1, "state_transition", {
      proto: "ping", node: "H1", event: "report", dst: "10.0.0.2",
      sent: 2, received: 2, rtt_min: 10, rtt_avg: 10, rtt_max: 10,
      probes: [{ seq: 1, status: "reply", responder: "10.0.0.2", rtt: 10 }],
    }));
    s.apply(rec(2, "state_transition", { proto: "lapb", node: "B", iface: 2, event: "payload_delivered", data: "m0" }));
    s.apply(rec(3, "state_transition", { proto: "x25", node: "B", iface: 2, lci: 1, event: "data_delivered", ps: 0, data: "d0" }));
    expect(s.pingReports[0].received).toBe(2);
    expect(s.deliveredPayloads).toEqual(["m0", "d0"]);
  });

  it("a corrupted frame never mutates tables", () => {
    seq = 0;
    const s = new SessionState();
    s.apply(rec(4, "frame_sent", { frame_id: 7, segment: "S1", node: "H1", proto: "arp" }));
    s.apply(rec(9, "frame_corrupted", { frame_id: 7, segment: "S1", node: "H2", proto: "arp" }));
    expect(s.arpCaches.size).toBe(0);
    expect(s.routes.size).toBe(0);
    expect(s.activeFrames.size).toBe(0); // the glyph is gone
  });
});

describe("animation queue", () => {
  it("rejects out-of-order pushes", () => {
    seq = 0;
    const q = new AnimationQueue();
    q.push(rec(5, "fault_applied", { action: "break_link", segment: "S1" }));
    expect(() => q.push({ at: 4, seq: 99, kind: "fault_applied" } as TraceRecord)).toThrow(/order/);
  });

  it("applies records as the playhead passes them, never skipping state", () => {
    seq = 0;
    const q = new AnimationQueue();
    q.push(rec(1000, "frame_sent", { frame_id: 1, segment: "S1", node: "H1", proto: "arp" }));
    q.push(rec(6000, "frame_delivered", { frame_id: 1, segment: "S1", node: "H2", proto: "arp" }));
    q.push(rec(6000, "fault_applied", { action: "break_link", segment: "S1" }));
    expect(q.advanceTo(999)).toHaveLength(0);
    const first = q.advanceTo(1000);
    expect(first).toHaveLength(1);
    const glyphs = q.glyphs();
    expect(glyphs).toHaveLength(1);
    expect(glyphs[0].arrivalAt).toBe(6000); // looked ahead at the pending delivery
    q.advanceTo(3500);
    expect(q.glyphs()[0].progress).toBeCloseTo(0.5);
    // a long skip (dropped rendering) still applies every update
    const applied = q.advanceTo(100_000);
    expect(applied).toHaveLength(2);
    expect(q.state.linkStatus.get("S1")).toBe("broken");
    expect(q.glyphs()).toHaveLength(0);
  });

  it("drain applies everything pending", () => {
    seq = 0;
    const q = new AnimationQueue();
    q.push(rec(10, "fault_applied", { action: "set_noise", segment: "S1", value: 0.3 }));
    q.push(rec(500, "fault_applied", { action: "break_link", segment: "S1" }));
    q.drain();
    expect(q.state.noise.get("S1")).toBe(0.3);
    expect(q.state.linkStatus.get("S1")).toBe("broken");
    expect(q.pending).toBe(0);
  });
});

describe("snapshot agreement", () => {
  const snapshot: Snapshot = {
    at: 100,
    mode: "paused",
    next_obs_seq: 4,
    pending_events: 0,
    nodes: {
      R1: {
        kind: "router",
        power: "on",
        interfaces: [],
        arp_cache: { "10.0.0.2": { hw: "02:00:00:00:00:02", learned_at: 9 } },
        routes: [
          { prefix: "10.0.0.0", prefix_len: 24, next_hop: null, metric: 1, source: "connected" },
        ],
        rip_enabled: true,
        lapb: {},
        x25: {},
      },
    },
    segments: { S1: { status: "broken", noise_p: 0, latency: 5000 } },
  };

  it("matches when the fold agrees", () => {
    seq = 0;
    const s = new SessionState();
    s.apply(rec(0, "route_changed", {
      node: "R1", prefix: "10.0.0.0", prefix_len: 24, change: "add",
      metric: 1, next_hop: null, source: "connected",
    }));
    s.apply(rec(9, "cache_changed", { node: "R1", ip: "10.0.0.2", hw: "02:00:00:00:00:02", change: "add" }));
    s.apply(rec(12, "fault_applied", { action: "break_link", segment: "S1" }));
    expect(diffAgainstSnapshot(s, snapshot)).toEqual([]);
  });

  it("reports divergence otherwise", () => {
    const s = new SessionState();
    const problems = diffAgainstSnapshot(s, snapshot);
    expect(problems.some((p) => p.includes("segment S1"))).toBe(true);
    expect(problems.some((p) => p.includes("missing route"))).toBe(true);
  });
});
