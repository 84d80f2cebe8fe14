// Steering: toolbar and context-menu actions map one-to-one onto the
// control/inject API. UI mode only ever changes on a server ack — nothing
// is applied optimistically.

import type { LabClient } from "./api.js";
import type { ReplayBundle, Snapshot } from "./types.js";

export class SteerController {
  mode: "paused" | "running" | "finished" = "paused";
  at = 0;

  constructor(
    private readonly client: LabClient,
    readonly sessionId: string,
  ) {}

  private applyAck(ack: { mode?: string; at?: number }): void {
    if (ack.mode) this.mode = ack.mode as SteerController["mode"];
    if (ack.at !== undefined) this.at = ack.at;
  }

  async run(speed?: number): Promise<void> {
    this.applyAck(await this.client.control(this.sessionId, { cmd: "run", speed }));
  }

  async pause(): Promise<void> {
    this.applyAck(await this.client.control(this.sessionId, { cmd: "pause" }));
  }

  async step(n = 1): Promise<void> {
    this.applyAck(await this.client.control(this.sessionId, { cmd: "step", n }));
  }

  async reset(): Promise<void> {
    this.applyAck(await this.client.control(this.sessionId, { cmd: "reset" }));
  }

  async breakLink(segment: string): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "break_link", segment }));
  }

  async restoreLink(segment: string): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "restore_link", segment }));
  }

  async setNoise(segment: string, p: number): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "set_noise", segment, p }));
  }

  async setPower(node: string, power: "on" | "off"): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "set_power", node, power }));
  }

  async setParam(path: string, value: unknown, node?: string): Promise<void> {
    this.applyAck(
      await this.client.inject(this.sessionId, { action: "set_param", path, value, ...(node ? { node } : {}) }),
    );
  }

  async ping(node: string, dst: string, count = 4): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "ping", node, dst, count }));
  }

  async traceroute(node: string, dst: string, maxTtl = 16): Promise<void> {
    this.applyAck(
      await this.client.inject(this.sessionId, { action: "traceroute", node, dst, max_ttl: maxTtl }),
    );
  }

  async runAlgo(spec: Record<string, unknown>): Promise<void> {
    this.applyAck(await this.client.inject(this.sessionId, { action: "algo", ...spec }));
  }

  snapshot(): Promise<Snapshot> {
    return this.client.snapshot(this.sessionId);
  }

  exportAddendum(): Promise<ReplayBundle> {
    return this.client.addendum(this.sessionId);
  }

  async refreshMode(): Promise<void> {
    const snap = await this.client.snapshot(this.sessionId);
    this.mode = snap.mode;
    this.at = snap.at;
  }
}
