// Browser shell: toolbar-driven topology editing, session steering and the
// live animation loop. All protocol truth comes from the record stream and
// snapshots; this file only moves it between the API and the canvas.

import { LabApiError, LabClient } from "./api.js";
import { AlgoPanel } from "./algoview.js";
import { CanvasModel, arpBasicModel, ticksOf } from "./model.js";
import { drawScene, pick, segmentHub } from "./render.js";
import { AnimationQueue, SessionState, diffAgainstSnapshot } from "./state.js";
import { SteerController } from "./steer.js";
import type { TraceRecord } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const API_BASE = (window as { LAB_API?: string }).LAB_API ?? "http://127.0.0.1:8080";

class App {
  client = new LabClient(API_BASE);
  model = new CanvasModel();
  queue: AnimationQueue | null = null;
  algoPanel = new AlgoPanel();
  steer: SteerController | null = null;
  abort: AbortController | null = null;
  speed = 1_000_000; // ticks per real second
  lastFrame = performance.now();
  canvas = $("canvas") as unknown as HTMLCanvasElement;
  ctx = (this.canvas as HTMLCanvasElement).getContext("2d")!;
  counters = { host: 0, router: 0, segment: 0 };
  linkFrom: string | null = null;

  constructor() {
    this.bindToolbar();
    this.bindCanvas();
    this.loadCatalogList();
    requestAnimationFrame(() => this.frame());
  }

  status(text: string, isError = false): void {
    const el = $("status");
    el.textContent = text;
    el.className = isError ? "error" : "";
  }

  markers(): void {
    const list = this.model.validate();
    const el = $("markers");
    el.innerHTML = "";
    for (const m of list) {
      const li = document.createElement("li");
      li.textContent = `[${m.code}] ${m.message} (${m.target})`;
      el.appendChild(li);
    }
    ($("btn-create") as HTMLButtonElement).disabled = list.length > 0;
  }

  bindToolbar(): void {
    $("btn-add-host").onclick = () => {
      this.counters.host += 1;
      this.model.addNode("host", `H${this.counters.host}`, 100 + Math.random() * 300, 100 + Math.random() * 200);
      this.refresh();
    };
    $("btn-add-router").onclick = () => {
      this.counters.router += 1;
      this.model.addNode("router", `R${this.counters.router}`, 100 + Math.random() * 300, 100 + Math.random() * 200);
      this.refresh();
    };
    $("btn-add-segment").onclick = () => {
      this.counters.segment += 1;
      this.model.addSegment(`S${this.counters.segment}`, "5ms", 0);
      this.refresh();
    };
    $("btn-link").onclick = () => {
      this.linkFrom = this.model.selection;
      this.status(this.linkFrom ? `linking from ${this.linkFrom}: select the segment/node to join` : "select a node first");
    };
    $("btn-demo").onclick = () => {
      this.model = arpBasicModel();
      this.refresh();
      this.status("loaded the arp-basic starter topology");
    };
    $("btn-create").onclick = () => void this.createSession();
    $("btn-run").onclick = () => void this.guard(async () => {
      await this.steer!.run(this.speed);
      this.status(`running at ${this.speed.toLocaleString()} ticks/s`);
    });
    $("btn-pause").onclick = () => void this.guard(async () => {
      await this.steer!.pause();
      this.queue?.drain();
      this.status(`paused at ${this.steer!.at} ticks`);
    });
    $("btn-step").onclick = () => void this.guard(async () => {
      await this.steer!.step(10);
      this.queue?.drain();
    });
    $("btn-reset").onclick = () => void this.guard(async () => {
      await this.steer!.reset();
      await this.resubscribe();
    });
    ($("speed") as HTMLInputElement).onchange = (ev) => {
      this.speed = Number((ev.target as HTMLInputElement).value) || 1_000_000;
    };
    $("btn-break").onclick = () => void this.onSelectedSegment((s) => this.steer!.breakLink(s));
    $("btn-restore").onclick = () => void this.onSelectedSegment((s) => this.steer!.restoreLink(s));
    $("btn-noise").onclick = () => void this.onSelectedSegment((s) => {
      const p = Number(($("noise") as HTMLInputElement).value);
      return this.steer!.setNoise(s, p);
    });
    $("btn-power").onclick = () => void this.guard(async () => {
      const sel = this.model.selection;
      if (!sel?.startsWith("node:")) return this.status("select a node first", true);
      const node = sel.slice(5);
      const now = this.queue?.state.power.get(node) ?? "on";
      await this.steer!.setPower(node, now === "on" ? "off" : "on");
    });
    $("btn-param").onclick = () => void this.guard(async () => {
      const path = ($("param-path") as HTMLInputElement).value.trim();
      const value = ($("param-value") as HTMLInputElement).value.trim();
      await this.steer!.setParam(path, value);
      this.status(`set ${path} = ${value}`);
    });
    $("btn-ping").onclick = () => void this.guard(async () => {
      const sel = this.model.selection;
      if (!sel?.startsWith("node:")) return this.status("select the source node first", true);
      await this.steer!.ping(sel.slice(5), ($("dst") as HTMLInputElement).value.trim());
    });
    $("btn-traceroute").onclick = () => void this.guard(async () => {
      const sel = this.model.selection;
      if (!sel?.startsWith("node:")) return this.status("select the source node first", true);
      await this.steer!.traceroute(sel.slice(5), ($("dst") as HTMLInputElement).value.trim());
    });
    $("btn-algo").onclick = () => void this.guard(async () => {
      const keys = [42, 17, 63, 8, 51, 29, 74, 3];
      await this.steer!.runAlgo({
        algo: "avl",
        ops: keys.map((k) => ({ op: "insert", key: k })),
      });
      this.status("queued an avl insert demo at the current boundary");
    });
    $("btn-export").onclick = () => void this.guard(async () => {
      const bundle = await this.steer!.exportAddendum();
      const blob = new Blob([JSON.stringify(bundle, null, 2)], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `${bundle.scenario}-addendum.json`;
      a.click();
      this.status(`exported ${bundle.addendum.length} injections (replayable)`);
    });
    $("btn-verify").onclick = () => void this.guard(async () => {
      this.queue?.drain();
      const snap = await this.steer!.snapshot();
      const problems = diffAgainstSnapshot(this.queue!.state, snap);
      this.status(problems.length ? `DIVERGED: ${problems[0]}` : "folded state matches the snapshot", problems.length > 0);
    });
    $("theme-bg").onchange = (ev) => {
      this.model.theme.background = (ev.target as HTMLInputElement).value;
    };
    $("theme-fg").onchange = (ev) => {
      this.model.theme.foreground = (ev.target as HTMLInputElement).value;
    };
  }

  bindCanvas(): void {
    let dragging: string | null = null;
    this.canvas.addEventListener("mousedown", (ev) => {
      const rect = this.canvas.getBoundingClientRect();
      const x = ev.clientX - rect.left;
      const y = ev.clientY - rect.top;
      const hit = pick(this.model, x, y);
      if (this.linkFrom && hit && hit !== this.linkFrom) {
        this.completeLink(this.linkFrom, hit);
        this.linkFrom = null;
        return;
      }
      this.model.selection = hit;
      dragging = hit?.startsWith("node:") ? hit.slice(5) : null;
      this.showSelection();
      this.refresh();
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (!dragging) return;
      const rect = this.canvas.getBoundingClientRect();
      const node = this.model.node(dragging);
      if (node) {
        node.x = ev.clientX - rect.left;
        node.y = ev.clientY - rect.top;
      }
    });
    window.addEventListener("mouseup", () => (dragging = null));
  }

  completeLink(from: string, to: string): void {
    const names = [from, to];
    const nodeName = names.find((n) => n.startsWith("node:"))?.slice(5);
    const segName = names.find((n) => n.startsWith("segment:"))?.slice(8);
    if (!nodeName || !segName) {
      this.status("link a node to a segment (select node, Link, then click the segment hub)", true);
      return;
    }
    const ip = window.prompt(`ip address for ${nodeName} on ${segName} (empty for RARP client)`, "10.0.0.1");
    const plen = Number(window.prompt("prefix length", "24") ?? "24");
    this.model.attach(nodeName, segName, ip ? ip : null, plen);
    this.refresh();
  }

  showSelection(): void {
    const sel = this.model.selection;
    $("selection").textContent = sel ?? "nothing selected";
  }

  async loadCatalogList(): Promise<void> {
    try {
      const { scenarios } = await this.client.listScenarios();
      const select = $("catalog") as HTMLSelectElement;
      select.innerHTML = "<option value=''>load scenario...</option>";
      for (const name of scenarios) {
        const opt = document.createElement("option");
        opt.value = opt.textContent = name;
        select.appendChild(opt);
      }
      select.onchange = () => void this.loadScenario(select.value);
    } catch (err) {
      this.status(`service unreachable at ${API_BASE}: ${(err as Error).message}`, true);
    }
  }

  async loadScenario(name: string): Promise<void> {
    if (!name) return;
    const text = await this.client.getScenario(name);
    const doc = JSON.parse(text) as Record<string, never>;
    const model = new CanvasModel();
    model.meta = { description: "", ...(doc["meta"] as object) } as CanvasModel["meta"];
    const nodes = (doc["nodes"] ?? []) as { name: string; kind: "host" | "router" }[];
    nodes.forEach((n, i) => model.addNode(n.kind, n.name, 120 + (i % 4) * 160, 120 + Math.floor(i / 4) * 140));
    for (const s of (doc["segments"] ?? []) as { name: string; latency: number | string; noise?: number }[]) {
      model.addSegment(s.name, String(s.latency), s.noise ?? 0);
    }
    for (const i of (doc["interfaces"] ?? []) as CanvasModel["interfaces"]) {
      model.attach(i.node, i.segment, i.ip, i.prefix_len);
    }
    for (const e of (doc["script"] ?? []) as CanvasModel["script"]) model.addScript(e);
    this.model = model;
    this.refresh();
    this.status(`loaded ${name}; create a session to run it`);
  }

  async createSession(): Promise<void> {
    await this.guard(async () => {
      const markers = this.model.validate();
      if (markers.length) {
        this.status(`fix ${markers.length} validation markers first`, true);
        return;
      }
      const text = JSON.stringify(this.model.toScenario());
      const { id } = await this.client.createSession(text);
      this.steer = new SteerController(this.client, id);
      this.algoPanel = new AlgoPanel();
      await this.resubscribe();
      this.status(`session ${id} created (paused at 0)`);
    });
  }

  async resubscribe(): Promise<void> {
    this.abort?.abort();
    this.abort = new AbortController();
    this.queue = new AnimationQueue(new SessionState());
    const queue = this.queue;
    void this.client
      .subscribe(this.steer!.sessionId, 0, (rec) => this.onRecord(queue, rec), this.abort.signal)
      .catch((err: unknown) => {
        if ((err as Error).name !== "AbortError") {
          this.status(`stream closed: ${(err as Error).message}`, true);
        }
      });
  }

  onRecord(queue: AnimationQueue, rec: TraceRecord): void {
    queue.push(rec);
    // keep the playhead close to the engine on live runs
    if (queue.playhead < rec.at - ticksOf("2s")) {
      queue.advanceTo(rec.at - ticksOf("1s"));
    }
  }

  async guard(fn: () => Promise<unknown>): Promise<void> {
    if (!this.steer) {
      this.status("create a session first", true);
      return;
    }
    try {
      await fn();
    } catch (err) {
      if (err instanceof LabApiError) {
        this.status(`[${err.code}] ${err.message}`, true);
      } else {
        this.status((err as Error).message, true);
      }
    }
  }

  async onSelectedSegment(fn: (segment: string) => Promise<unknown>): Promise<void> {
    await this.guard(async () => {
      const sel = this.model.selection;
      if (!sel?.startsWith("segment:")) {
        this.status("select a segment hub first", true);
        return;
      }
      await fn(sel.slice(8));
    });
  }

  frame(): void {
    const now = performance.now();
    const dt = (now - this.lastFrame) / 1000;
    this.lastFrame = now;
    if (this.queue && this.steer?.mode === "running") {
      const applied = this.queue.advanceTo(this.queue.playhead + dt * this.speed);
      for (const rec of applied) this.algoPanel.apply(rec);
    } else if (this.queue) {
      for (const rec of this.queue.advanceTo(this.queue.playhead)) this.algoPanel.apply(rec);
    }
    drawScene(this.ctx, this.model, this.queue, this.canvas.width, this.canvas.height);
    this.renderPanels();
    requestAnimationFrame(() => this.frame());
  }

  refresh(): void {
    this.markers();
    this.showSelection();
  }

  renderPanels(): void {
    const state = this.queue?.state;
    if (!state) return;
    const sel = this.model.selection;
    if (sel?.startsWith("node:")) {
      const node = sel.slice(5);
      const routes = state.nodeRoutes(node);
      $("routes").innerHTML =
        `<tr><th>prefix</th><th>metric</th><th>next hop</th><th>src</th></tr>` +
        routes
          .map(
            (r) =>
              `<tr><td>${r.prefix}/${r.prefixLen}</td><td>${r.metric}</td>` +
              `<td>${r.nextHop ?? "direct"}</td><td>${r.source}</td></tr>`,
          )
          .join("");
      const cache = state.arpCaches.get(node);
      $("arp").innerHTML =
        `<tr><th>ip</th><th>hw</th></tr>` +
        [...(cache?.entries() ?? [])].map(([ip, hw]) => `<tr><td>${ip}</td><td>${hw}</td></tr>`).join("");
    }
    const reports = [
      ...state.pingReports.map(
        (r) => `ping ${r.dst}: ${r.received}/${r.sent} replies, rtt ${r.rtt_min ?? "-"}..${r.rtt_max ?? "-"} ticks`,
      ),
      ...state.tracerouteReports.map(
        (r) =>
          `traceroute ${r.dst}: ${r.reached ? "reached" : "incomplete"} via ` +
          r.hops.map((h) => h.probes[0]?.responder ?? "*").join(" → "),
      ),
    ];
    $("reports").innerHTML = reports.map((r) => `<li>${r}</li>`).join("");
    $("events").textContent = state.recentEvents
      .slice(-12)
      .map((e) => `${e.at} ${e.kind} ${JSON.stringify({ ...e, at: undefined, seq: undefined, kind: undefined })}`)
      .join("\n");
    const tree = this.algoPanel.views.get("avl");
    if (tree && tree.algo === "avl") {
      $("algo").textContent = renderTreeAscii(tree.view.root);
    }
  }
}

function renderTreeAscii(root: { key: number; left: unknown; right: unknown } | null): string {
  const lines: string[] = [];
  const walk = (node: typeof root, prefix: string, tag: string): void => {
    if (!node) return;
    lines.push(`${prefix}${tag}${node.key}`);
    walk(node.left as typeof root, prefix + "  ", "L ");
    walk(node.right as typeof root, prefix + "  ", "R ");
  };
  walk(root, "", "");
  return lines.join("\n");
}

new App();
export { segmentHub };
