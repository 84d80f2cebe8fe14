import { describe, expect, it } from "vitest";

import { LabClient } from "../src/api.js";
import { SteerController } from "../src/steer.js";

function capture(responses: Record<string, unknown>[] = []) {
  const calls: { url: string; body?: unknown }[] = [];
  const fetchFn = (async (url: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(url), body: init?.body ? JSON.parse(String(init.body)) : undefined });
    const body = responses.shift() ?? { ok: true, mode: "paused", at: 0 };
    return new Response(JSON.stringify(body), { status: 200 });
  }) as typeof fetch;
  return { calls, client: new LabClient("http://lab", fetchFn) };
}

describe("steering maps ui actions 1:1 onto the api", () => {
  it("control commands carry exactly the documented fields", async () => {
    const { calls, client } = capture([
      { ok: true, mode: "running", at: 0 },
      { ok: true, mode: "paused", at: 123 },
      { ok: true, mode: "paused", at: 130, dispatched: 5 },
      { ok: true, mode: "paused", at: 0 },
    ]);
    const steer = new SteerController(client, "s1");
    await steer.run(2_000_000);
    await steer.pause();
    await steer.step(5);
    await steer.reset();
    expect(calls.map((c) => c.body)).toEqual([
      { cmd: "run", speed: 2_000_000 },
      { cmd: "pause" },
      { cmd: "step", n: 5 },
      { cmd: "reset" },
    ]);
  });

  it("fault buttons emit the matching inject actions", async () => {
    const { calls, client } = capture();
    const steer = new SteerController(client, "s1");
    await steer.breakLink("S1");
    await steer.restoreLink("S1");
    await steer.setNoise("S1", 0.3);
    await steer.setPower("H1", "off");
    await steer.setParam("rip.update_interval", "10s");
    await steer.ping("H1", "10.0.0.2", 2);
    await steer.traceroute("H1", "10.0.0.2", 8);
    expect(calls.every((c) => c.url === "http://lab/sessions/s1/inject")).toBe(true);
    expect(calls.map((c) => c.body)).toEqual([
      { action: "break_link", segment: "S1" },
      { action: "restore_link", segment: "S1" },
      { action: "set_noise", segment: "S1", p: 0.3 },
      { action: "set_power", node: "H1", power: "off" },
      { action: "set_param", path: "rip.update_interval", value: "10s" },
      { action: "ping", node: "H1", dst: "10.0.0.2", count: 2 },
      { action: "traceroute", node: "H1", dst: "10.0.0.2", max_ttl: 8 },
    ]);
  });

  it("mode follows server acks, never the click", async () => {
    const { client } = capture([{ ok: true, mode: "finished", at: 999 }]);
    const steer = new SteerController(client, "s1");
    expect(steer.mode).toBe("paused");
    await steer.run(); // the server says this session is already done
    expect(steer.mode).toBe("finished");
    expect(steer.at).toBe(999);
  });
});
