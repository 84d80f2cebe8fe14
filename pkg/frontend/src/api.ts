// Thin typed client for the lab service. The UI has no privileged channel:
// everything goes through these public endpoints, and the event stream is
// plain SSE parsed off a streaming fetch so it works in browsers and node.

import type { ApiError, ControlCmd, ReplayBundle, Snapshot, TraceRecord } from "./types.js";

export class LabApiError extends Error {
  code: string;
  status: number;
  path?: string;

  constructor(status: number, body: ApiError) {
    super(body.message || body.code);
    this.code = body.code;
    this.status = status;
    this.path = body.path;
  }
}

async function check(resp: Response): Promise<Response> {
  if (resp.ok) return resp;
  let body: ApiError;
  try {
    body = (await resp.json()) as ApiError;
  } catch {
    body = { code: `http_${resp.status}`, message: resp.statusText };
  }
  throw new LabApiError(resp.status, body);
}

export class LabClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await check(await this.fetchFn(`${this.base}${path}`, init));
    return (await resp.json()) as T;
  }

  createSession(scenarioText: string): Promise<{ id: string; name: string; mode: string }> {
    return this.json("/sessions", { method: "POST", body: scenarioText });
  }

  control(sid: string, cmd: ControlCmd): Promise<{ ok: boolean; mode: string; at: number }> {
    return this.json(`/sessions/${sid}/control`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cmd),
    });
  }

  inject(sid: string, action: Record<string, unknown>): Promise<{ ok: boolean; at: number }> {
    return this.json(`/sessions/${sid}/inject`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(action),
    });
  }

  snapshot(sid: string): Promise<Snapshot> {
    return this.json(`/sessions/${sid}/snapshot`);
  }

  addendum(sid: string): Promise<ReplayBundle> {
    return this.json(`/sessions/${sid}/addendum`);
  }

  listScenarios(): Promise<{ scenarios: string[] }> {
    return this.json("/scenarios");
  }

  async getScenario(name: string): Promise<string> {
    const resp = await check(await this.fetchFn(`${this.base}/scenarios/${name}`));
    return await resp.text();
  }

  async putScenario(name: string, text: string): Promise<void> {
    await check(await this.fetchFn(`${this.base}/scenarios/${name}`, { method: "PUT", body: text }));
  }

  /** Subscribe to the ordered record stream; resolves when the stream ends.
   *  `onRecord` sees every record in (at, seq) order with no gaps. */
  async subscribe(
    sid: string,
    fromSeq: number,
    onRecord: (rec: TraceRecord) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await check(
      await this.fetchFn(`${this.base}/sessions/${sid}/events?from_seq=${fromSeq}`, { signal }),
    );
    const reader = resp.body!.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let nl: number;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        if (line.startsWith("data: ")) {
          onRecord(JSON.parse(line.slice(6)) as TraceRecord);
        }
      }
    }
  }
}
