// Shared shapes for the lab API and trace records.

export interface TraceRecord {
  at: number;
  seq: number;
  kind:
    | "frame_sent"
    | "frame_delivered"
    | "frame_corrupted"
    | "frame_dropped"
    | "route_changed"
    | "cache_changed"
    | "icmp_emitted"
    | "state_transition"
    | "algo_step"
    | "fault_applied";
  [key: string]: unknown;
}

export interface SnapshotInterface {
  id: number;
  segment: string | null;
  ip: string | null;
  prefix_len: number | null;
  hw: string;
}

export interface SnapshotRoute {
  prefix: string;
  prefix_len: number;
  next_hop: string | null;
  metric: number;
  source: string;
}

export interface SnapshotNode {
  kind: "host" | "router";
  power: "on" | "off";
  interfaces: SnapshotInterface[];
  arp_cache: Record<string, { hw: string; learned_at: number }>;
  routes: SnapshotRoute[];
  rip_enabled: boolean;
  lapb: Record<string, { state: string; vs: number; vr: number; va: number }>;
  x25: Record<string, Record<string, { state: string; ps: number; pr: number }>>;
}

export interface Snapshot {
  at: number;
  mode: "paused" | "running" | "finished";
  next_obs_seq: number;
  pending_events: number;
  nodes: Record<string, SnapshotNode>;
  segments: Record<string, { status: "up" | "broken"; noise_p: number; latency: number }>;
}

export interface ReplayBundle {
  scenario: string;
  seed: number;
  steps: number;
  until: number;
  addendum: { after_steps: number; at: number; action: Record<string, unknown> }[];
}

export type ControlCmd =
  | { cmd: "run"; speed?: number }
  | { cmd: "pause" }
  | { cmd: "step"; n?: number }
  | { cmd: "reset" };

export interface ApiError {
  code: string;
  message: string;
  path?: string;
}
