// Authoritative session state, folded from the subscribed record stream.
// Every UI-visible protocol fact lives here and is reproducible from the
// records alone; the canvas only projects it. The animation queue applies
// records strictly in (at, seq) order as the playback clock passes them —
// a skipped render frame can never skip a state update.

import type { Snapshot, TraceRecord } from "./types.js";

export interface RouteEntry {
  prefix: string;
  prefixLen: number;
  source: string;
  metric: number;
  nextHop: string | null;
}

export interface FrameGlyph {
  frameId: number;
  segment: string;
  fromNode: string;
  proto: string;
  sentAt: number;
  arrivalAt: number | null; // known once the matching delivery is in the queue
  corrupted: boolean;
}

export interface PingReport {
  node: string;
  dst: string;
  sent: number;
  received: number;
  rtt_min: number | null;
  rtt_avg: number | null;
  rtt_max: number | null;
  probes: { seq: number; status: string; responder: string | null; rtt: number | null }[];
}

export interface TracerouteReport {
  node: string;
  dst: string;
  reached: boolean;
  hops: { ttl: number; probes: { status: string; responder: string | null; rtt: number | null }[] }[];
}

const routeKey = (prefix: string, prefixLen: number, source: string) =>
  `${prefix}/${prefixLen}#${source}`;

export class SessionState {
  linkStatus = new Map<string, "up" | "broken">();
  noise = new Map<string, number>();
  power = new Map<string, "on" | "off">();
  routes = new Map<string, Map<string, RouteEntry>>();
  arpCaches = new Map<string, Map<string, string>>();
  assignedIps = new Map<string, string>(); // "node" -> rarp-acquired ip
  lapbStates = new Map<string, string>(); // "node/iface"
  circuits = new Map<string, string>(); // "node/iface/lci"
  pingReports: PingReport[] = [];
  tracerouteReports: TracerouteReport[] = [];
  deliveredPayloads: unknown[] = [];
  algoSteps: TraceRecord[] = [];
  activeFrames = new Map<number, FrameGlyph>();
  recentEvents: TraceRecord[] = [];
  appliedCount = 0;
  lastAt = 0;

  nodeRoutes(node: string): RouteEntry[] {
    return [...(this.routes.get(node)?.values() ?? [])].sort((a, b) =>
      a.prefix === b.prefix
        ? a.prefixLen - b.prefixLen || a.source.localeCompare(b.source)
        : a.prefix.localeCompare(b.prefix),
    );
  }

  apply(rec: TraceRecord): void {
    this.appliedCount += 1;
    this.lastAt = rec.at;
    this.recentEvents.push(rec);
    if (this.recentEvents.length > 200) this.recentEvents.shift();
    switch (rec.kind) {
      case "fault_applied":
        this.applyFault(rec);
        break;
      case "route_changed": {
        const node = rec["node"] as string;
        const table = this.routes.get(node) ?? new Map<string, RouteEntry>();
        const key = routeKey(rec["prefix"] as string, rec["prefix_len"] as number, rec["source"] as string);
        if (rec["change"] === "delete") {
          table.delete(key);
        } else {
          table.set(key, {
            prefix: rec["prefix"] as string,
            prefixLen: rec["prefix_len"] as number,
            source: rec["source"] as string,
            metric: rec["metric"] as number,
            nextHop: (rec["next_hop"] as string | null) ?? null,
          });
        }
        this.routes.set(node, table);
        break;
      }
      case "cache_changed": {
        const node = rec["node"] as string;
        if (rec["change"] === "ip_assigned") {
          this.assignedIps.set(node, rec["ip"] as string);
          break;
        }
        const cache = this.arpCaches.get(node) ?? new Map<string, string>();
        if (rec["change"] === "delete" || rec["change"] === "expire") {
          cache.delete(rec["ip"] as string);
        } else {
          cache.set(rec["ip"] as string, rec["hw"] as string);
        }
        this.arpCaches.set(node, cache);
        break;
      }
      case "state_transition":
        this.applyTransition(rec);
        break;
      case "frame_sent":
        this.activeFrames.set(rec["frame_id"] as number, {
          frameId: rec["frame_id"] as number,
          segment: rec["segment"] as string,
          fromNode: rec["node"] as string,
          proto: rec["proto"] as string,
          sentAt: rec.at,
          arrivalAt: null,
          corrupted: false,
        });
        break;
      case "frame_delivered":
      case "frame_corrupted":
      case "frame_dropped":
        this.activeFrames.delete(rec["frame_id"] as number);
        break;
      case "algo_step":
        this.algoSteps.push(rec);
        break;
      case "icmp_emitted":
        break;
    }
  }

  private applyFault(rec: TraceRecord): void {
    switch (rec["action"]) {
      case "break_link":
        this.linkStatus.set(rec["segment"] as string, "broken");
        break;
      case "restore_link":
        this.linkStatus.set(rec["segment"] as string, "up");
        break;
      case "set_noise":
        this.noise.set(rec["segment"] as string, rec["value"] as number);
        break;
      case "set_power":
        this.power.set(rec["node"] as string, rec["value"] as "on" | "off");
        break;
    }
  }

  private applyTransition(rec: TraceRecord): void {
    const proto = rec["proto"];
    if (proto === "lapb" && rec["to"] !== undefined) {
      this.lapbStates.set(`${rec["node"]}/${rec["iface"]}`, rec["to"] as string);
    } else if (proto === "lapb" && rec["event"] === "payload_delivered") {
      this.deliveredPayloads.push(rec["data"]);
    } else if (proto === "x25" && rec["to"] !== undefined) {
      const key = `${rec["node"]}/${rec["iface"]}/${rec["lci"]}`;
      if (rec["to"] === "ready") {
        this.circuits.delete(key);
      } else {
        this.circuits.set(key, rec["to"] as string);
      }
    } else if (proto === "x25" && rec["event"] === "data_delivered") {
      this.deliveredPayloads.push(rec["data"]);
    } else if (proto === "ping" && rec["event"] === "report") {
      this.pingReports.push({
        node: rec["node"] as string,
        dst: rec["dst"] as string,
        sent: rec["sent"] as number,
        received: rec["received"] as number,
        rtt_min: rec["rtt_min"] as number | null,
        rtt_avg: rec["rtt_avg"] as number | null,
        rtt_max: rec["rtt_max"] as number | null,
        probes: rec["probes"] as PingReport["probes"],
      });
    } else if (proto === "traceroute" && rec["event"] === "report") {
      this.tracerouteReports.push({
        node: rec["node"] as string,
        dst: rec["dst"] as string,
        reached: rec["reached"] as boolean,
        hops: rec["hops"] as TracerouteReport["hops"],
      });
    }
  }
}

/** Differences between folded state and a server snapshot; empty = match.
 *  This is the server-authority check: the canvas renders the fold, so the
 *  fold must agree with the source of truth. */
export function diffAgainstSnapshot(state: SessionState, snap: Snapshot): string[] {
  const problems: string[] = [];
  for (const [name, seg] of Object.entries(snap.segments)) {
    const folded = state.linkStatus.get(name) ?? "up";
    if (folded !== seg.status) {
      problems.push(`segment ${name}: folded ${folded}, snapshot ${seg.status}`);
    }
  }
  for (const [name, node] of Object.entries(snap.nodes)) {
    const folded = state.power.get(name) ?? "on";
    if (folded !== node.power) {
      problems.push(`node ${name}: folded power ${folded}, snapshot ${node.power}`);
    }
    const foldedRoutes = new Map<string, RouteEntry>();
    for (const r of state.routes.get(name)?.values() ?? []) {
      foldedRoutes.set(routeKey(r.prefix, r.prefixLen, r.source), r);
    }
    for (const r of node.routes) {
      const key = routeKey(r.prefix, r.prefix_len, r.source);
      const mine = foldedRoutes.get(key);
      if (!mine) {
        problems.push(`node ${name}: missing route ${key}`);
      } else if (mine.metric !== r.metric || mine.nextHop !== r.next_hop) {
        problems.push(`node ${name}: route ${key} differs`);
      }
      foldedRoutes.delete(key);
    }
    for (const key of foldedRoutes.keys()) {
      problems.push(`node ${name}: extra folded route ${key}`);
    }
    const snapCache = Object.entries(node.arp_cache);
    const foldCache = state.arpCaches.get(name) ?? new Map<string, string>();
    for (const [ip, entry] of snapCache) {
      if (foldCache.get(ip) !== entry.hw) {
        problems.push(`node ${name}: arp ${ip} differs`);
      }
    }
    if (foldCache.size !== snapCache.length) {
      problems.push(`node ${name}: arp cache size ${foldCache.size} != ${snapCache.length}`);
    }
  }
  return problems;
}

/** Ordered record buffer driven by the playback clock. Records are applied
 *  exactly once, in (at, seq) order; rendering reads the state afterwards. */
export class AnimationQueue {
  readonly state: SessionState;
  private buffer: TraceRecord[] = [];
  private lastPushed: { at: number; seq: number } | null = null;
  playhead = 0;

  constructor(state = new SessionState()) {
    this.state = state;
  }

  get pending(): number {
    return this.buffer.length;
  }

  push(rec: TraceRecord): void {
    if (this.lastPushed && (rec.at < this.lastPushed.at ||
        (rec.at === this.lastPushed.at && rec.seq <= this.lastPushed.seq))) {
      throw new Error(`record out of order: ${rec.at}/${rec.seq}`);
    }
    this.lastPushed = { at: rec.at, seq: rec.seq };
    this.buffer.push(rec);
  }

  /** Apply every record with at <= simTime. Returns the applied records. */
  advanceTo(simTime: number): TraceRecord[] {
    this.playhead = Math.max(this.playhead, simTime);
    const applied: TraceRecord[] = [];
    while (this.buffer.length && this.buffer[0].at <= this.playhead) {
      const rec = this.buffer.shift()!;
      this.state.apply(rec);
      applied.push(rec);
      if (rec.kind === "frame_sent") {
        this.annotateArrival(rec["frame_id"] as number);
      }
    }
    return applied;
  }

  /** Drain everything regardless of the playhead (used on pause/finish). */
  drain(): TraceRecord[] {
    const last = this.buffer[this.buffer.length - 1];
    return this.advanceTo(last ? last.at : this.playhead);
  }

  /** Frames currently travelling, with 0..1 progress along their segment. */
  glyphs(): (FrameGlyph & { progress: number })[] {
    const out: (FrameGlyph & { progress: number })[] = [];
    for (const frame of this.state.activeFrames.values()) {
      let progress = 0.5;
      if (frame.arrivalAt !== null && frame.arrivalAt > frame.sentAt) {
        progress = Math.min(1, (this.playhead - frame.sentAt) / (frame.arrivalAt - frame.sentAt));
      }
      out.push({ ...frame, progress });
    }
    return out;
  }

  private annotateArrival(frameId: number): void {
    const glyph = this.state.activeFrames.get(frameId);
    if (!glyph) return;
    for (const rec of this.buffer) {
      if (rec["frame_id"] === frameId &&
          (rec.kind === "frame_delivered" || rec.kind === "frame_corrupted")) {
        glyph.arrivalAt = rec.at;
        glyph.corrupted = rec.kind === "frame_corrupted";
        return;
      }
    }
  }
}
