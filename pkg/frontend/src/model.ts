// Canvas-side topology editor model. This is pure data: the canvas renders
// it, and submission turns it into a scenario document. Pixel positions and
// theme colors live next to, never inside, the protocol fields.

export interface NodeGlyph {
  name: string;
  kind: "host" | "router";
  x: number;
  y: number;
}

export interface SegmentEdge {
  name: string;
  latency: string;
  noise: number;
}

export interface InterfaceSpec {
  node: string;
  segment: string;
  ip: string | null;
  prefix_len: number;
}

export interface ScriptEntry {
  at: number | string;
  action: string;
  [key: string]: unknown;
}

export interface Theme {
  background: string;
  foreground: string;
  routerColor: string;
  hostColor: string;
  packetColor: string;
  corruptColor: string;
}

export const DEFAULT_THEME: Theme = {
  background: "#10141c",
  foreground: "#d8dee9",
  routerColor: "#7aa2f7",
  hostColor: "#9ece6a",
  packetColor: "#e0af68",
  corruptColor: "#f7768e",
};

export interface ValidationMarker {
  code: string;
  message: string;
  target: string; // "node:H1", "iface:H1@S1", "segment:S1", "script:3", "meta"
}

const IP_RE = /^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$/;
const TIME_RE = /^\s*\d+(\.\d+)?\s*(us|ms|s|m)?\s*$/;

export function parseIp(text: string): number | null {
  const m = IP_RE.exec(text);
  if (!m) return null;
  let value = 0;
  for (let i = 1; i <= 4; i++) {
    const octet = Number(m[i]);
    if (octet > 255) return null;
    value = value * 256 + octet;
  }
  return value;
}

export function validTime(value: number | string): boolean {
  if (typeof value === "number") return Number.isInteger(value) && value >= 0;
  return TIME_RE.test(value);
}

export class CanvasModel {
  meta = { name: "untitled", seed: 1, duration: "60s", description: "" };
  nodes: NodeGlyph[] = [];
  segments: SegmentEdge[] = [];
  interfaces: InterfaceSpec[] = [];
  script: ScriptEntry[] = [];
  selection: string | null = null;
  theme: Theme = { ...DEFAULT_THEME };

  node(name: string): NodeGlyph | undefined {
    return this.nodes.find((n) => n.name === name);
  }

  segment(name: string): SegmentEdge | undefined {
    return this.segments.find((s) => s.name === name);
  }

  addNode(kind: "host" | "router", name: string, x = 80, y = 80): NodeGlyph {
    const glyph: NodeGlyph = { name, kind, x, y };
    this.nodes.push(glyph);
    return glyph;
  }

  addSegment(name: string, latency = "5ms", noise = 0): SegmentEdge {
    const edge: SegmentEdge = { name, latency, noise };
    this.segments.push(edge);
    return edge;
  }

  /** Join a node to a segment with its addressing. */
  attach(node: string, segment: string, ip: string | null, prefixLen: number): InterfaceSpec {
    const spec: InterfaceSpec = { node, segment, ip, prefix_len: prefixLen };
    this.interfaces.push(spec);
    return spec;
  }

  removeNode(name: string): void {
    this.nodes = this.nodes.filter((n) => n.name !== name);
    this.interfaces = this.interfaces.filter((i) => i.node !== name);
    if (this.selection === `node:${name}`) this.selection = null;
  }

  removeSegment(name: string): void {
    this.segments = this.segments.filter((s) => s.name !== name);
    this.interfaces = this.interfaces.filter((i) => i.segment !== name);
    if (this.selection === `segment:${name}`) this.selection = null;
  }

  addScript(entry: ScriptEntry): void {
    this.script.push(entry);
  }

  /** Inline validation mirroring the server's machine-readable codes, so
   *  problems are flagged before submission ever happens. */
  validate(): ValidationMarker[] {
    const markers: ValidationMarker[] = [];
    const nodeNames = new Set<string>();
    for (const n of this.nodes) {
      if (nodeNames.has(n.name)) {
        markers.push({ code: "duplicate_name", message: `duplicate node ${n.name}`, target: `node:${n.name}` });
      }
      nodeNames.add(n.name);
    }
    const segNames = new Set<string>();
    for (const s of this.segments) {
      if (segNames.has(s.name)) {
        markers.push({ code: "duplicate_name", message: `duplicate segment ${s.name}`, target: `segment:${s.name}` });
      }
      segNames.add(s.name);
      if (!validTime(s.latency) || s.latency === "0us") {
        markers.push({ code: "out_of_range", message: `bad latency ${s.latency}`, target: `segment:${s.name}` });
      }
      if (!(s.noise >= 0 && s.noise <= 1)) {
        markers.push({ code: "out_of_range", message: `noise must be in [0,1]`, target: `segment:${s.name}` });
      }
    }
    const perSegment = new Map<string, Set<string>>();
    for (const i of this.interfaces) {
      const target = `iface:${i.node}@${i.segment}`;
      if (!nodeNames.has(i.node)) {
        markers.push({ code: "unknown_ref", message: `unknown node ${i.node}`, target });
      }
      if (!segNames.has(i.segment)) {
        markers.push({ code: "unknown_ref", message: `unknown segment ${i.segment}`, target });
      }
      if (!(i.prefix_len >= 0 && i.prefix_len <= 32)) {
        markers.push({ code: "out_of_range", message: `prefix_len must be 0..32`, target });
      }
      if (i.ip !== null) {
        if (parseIp(i.ip) === null) {
          markers.push({ code: "out_of_range", message: `bad ip ${i.ip}`, target });
        } else {
          const taken = perSegment.get(i.segment) ?? new Set<string>();
          if (taken.has(i.ip)) {
            markers.push({ code: "duplicate_ip", message: `${i.ip} already on ${i.segment}`, target });
          }
          taken.add(i.ip);
          perSegment.set(i.segment, taken);
        }
      }
    }
    if (!validTime(this.meta.duration)) {
      markers.push({ code: "out_of_range", message: `bad duration ${this.meta.duration}`, target: "meta" });
    }
    let lastAt = -1;
    this.script.forEach((entry, idx) => {
      const target = `script:${idx}`;
      if (!validTime(entry.at)) {
        markers.push({ code: "out_of_range", message: `bad time ${entry.at}`, target });
        return;
      }
      const at = ticksOf(entry.at);
      if (at < lastAt) {
        markers.push({ code: "bad_time_order", message: "script times must be non-decreasing", target });
      }
      lastAt = Math.max(lastAt, at);
      const node = entry["node"];
      if (typeof node === "string" && node !== "*" && !nodeNames.has(node)) {
        markers.push({ code: "unknown_ref", message: `unknown node ${node}`, target });
      }
      const segment = entry["segment"];
      if (typeof segment === "string" && !segNames.has(segment)) {
        markers.push({ code: "unknown_ref", message: `unknown segment ${segment}`, target });
      }
    });
    return markers;
  }

  /** The protocol document the server sees; layout is exported separately. */
  toScenario(): Record<string, unknown> {
    return {
      meta: {
        name: this.meta.name,
        seed: this.meta.seed,
        duration: this.meta.duration,
        ...(this.meta.description ? { description: this.meta.description } : {}),
      },
      nodes: this.nodes.map((n) => ({ name: n.name, kind: n.kind })),
      segments: this.segments.map((s) => ({ name: s.name, latency: s.latency, noise: s.noise })),
      interfaces: this.interfaces.map((i) => ({ ...i })),
      script: this.script.map((e) => ({ ...e })),
    };
  }

  /** Pixels and colors: UI metadata the engine never sees. */
  layout(): Record<string, unknown> {
    const positions: Record<string, { x: number; y: number }> = {};
    for (const n of this.nodes) positions[n.name] = { x: n.x, y: n.y };
    return { positions, theme: { ...this.theme } };
  }
}

const TIME_UNITS: Record<string, number> = { us: 1, ms: 1_000, s: 1_000_000, m: 60_000_000 };

export function ticksOf(value: number | string): number {
  if (typeof value === "number") return value;
  const m = /^\s*(\d+(?:\.\d+)?)\s*(us|ms|s|m)?\s*$/.exec(value);
  if (!m) return NaN;
  return Number(m[1]) * TIME_UNITS[m[2] ?? "us"];
}

/** The arp-basic demo topology, as built by hand on the canvas. */
export function arpBasicModel(): CanvasModel {
  const model = new CanvasModel();
  model.meta = { name: "arp-basic", seed: 42, duration: "10s", description: "" };
  model.addNode("host", "H1", 120, 160);
  model.addNode("host", "H2", 420, 160);
  model.addSegment("S1", "5ms", 0);
  model.attach("H1", "S1", "10.0.0.1", 24);
  model.attach("H2", "S1", "10.0.0.2", 24);
  model.addScript({ at: "1s", action: "ping", node: "H1", dst: "10.0.0.2", count: 2 });
  model.addScript({ at: "6s", action: "ping", node: "H1", dst: "10.0.0.2", count: 1 });
  return model;
}
