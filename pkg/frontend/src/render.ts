// Canvas projection of the topology model plus folded session state.
// Routers and hosts get distinct glyphs, broken links render dashed in the
// alert color, and in-flight frames travel their segment spokes.

import type { AnimationQueue } from "./state.js";
import type { CanvasModel } from "./model.js";

interface Point {
  x: number;
  y: number;
}

export function segmentHub(model: CanvasModel, segment: string): Point {
  const members = model.interfaces.filter((i) => i.segment === segment);
  const points = members
    .map((i) => model.node(i.node))
    .filter((n): n is NonNullable<typeof n> => !!n);
  if (!points.length) return { x: 60, y: 60 };
  return {
    x: points.reduce((acc, p) => acc + p.x, 0) / points.length,
    y: points.reduce((acc, p) => acc + p.y, 0) / points.length,
  };
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  model: CanvasModel,
  queue: AnimationQueue | null,
  width: number,
  height: number,
): void {
  const theme = model.theme;
  const state = queue?.state ?? null;
  ctx.fillStyle = theme.background;
  ctx.fillRect(0, 0, width, height);

  for (const seg of model.segments) {
    const hub = segmentHub(model, seg.name);
    const broken = state?.linkStatus.get(seg.name) === "broken";
    ctx.strokeStyle = broken ? theme.corruptColor : theme.foreground;
    ctx.lineWidth = broken ? 2.5 : 1.5;
    ctx.setLineDash(broken ? [6, 5] : []);
    for (const iface of model.interfaces.filter((i) => i.segment === seg.name)) {
      const node = model.node(iface.node);
      if (!node) continue;
      ctx.beginPath();
      ctx.moveTo(node.x, node.y);
      ctx.lineTo(hub.x, hub.y);
      ctx.stroke();
    }
    ctx.setLineDash([]);
    ctx.fillStyle = broken ? theme.corruptColor : theme.foreground;
    ctx.beginPath();
    ctx.arc(hub.x, hub.y, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.font = "11px sans-serif";
    ctx.fillText(`${seg.name} (${seg.latency})`, hub.x + 8, hub.y - 6);
    const selected = model.selection === `segment:${seg.name}`;
    if (selected) {
      ctx.strokeStyle = theme.packetColor;
      ctx.beginPath();
      ctx.arc(hub.x, hub.y, 8, 0, Math.PI * 2);
      ctx.stroke();
    }
  }

  for (const node of model.nodes) {
    const off = state?.power.get(node.name) === "off";
    const base = node.kind === "router" ? theme.routerColor : theme.hostColor;
    ctx.fillStyle = off ? "#555a66" : base;
    ctx.strokeStyle = model.selection === `node:${node.name}` ? theme.packetColor : theme.foreground;
    ctx.lineWidth = model.selection === `node:${node.name}` ? 3 : 1;
    if (node.kind === "router") {
      ctx.beginPath();
      ctx.arc(node.x, node.y, 18, 0, Math.PI * 2);
      ctx.fill();
      ctx.stroke();
      // crossed-arrows router motif
      ctx.strokeStyle = theme.background;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(node.x - 9, node.y);
      ctx.lineTo(node.x + 9, node.y);
      ctx.moveTo(node.x, node.y - 9);
      ctx.lineTo(node.x, node.y + 9);
      ctx.stroke();
    } else {
      ctx.beginPath();
      ctx.roundRect(node.x - 16, node.y - 13, 32, 26, 5);
      ctx.fill();
      ctx.stroke();
      ctx.fillStyle = theme.background;
      ctx.fillRect(node.x - 10, node.y - 7, 20, 10);
    }
    ctx.fillStyle = theme.foreground;
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(node.name + (off ? " (off)" : ""), node.x, node.y + 32);
    ctx.textAlign = "left";
    const addresses = model.interfaces.filter((i) => i.node === node.name && i.ip);
    ctx.font = "10px monospace";
    addresses.forEach((iface, idx) => {
      ctx.fillText(`${iface.ip}/${iface.prefix_len}`, node.x + 22, node.y - 4 + idx * 11);
    });
  }

  if (queue) {
    for (const glyph of queue.glyphs()) {
      const hub = segmentHub(model, glyph.segment);
      const from = model.node(glyph.fromNode);
      if (!from) continue;
      // travel from sender toward the hub, then radiate onwards
      const t = Math.min(glyph.progress, 1);
      const x = from.x + (hub.x - from.x) * t;
      const y = from.y + (hub.y - from.y) * t;
      ctx.fillStyle = glyph.corrupted ? theme.corruptColor : theme.packetColor;
      ctx.beginPath();
      if (glyph.corrupted) {
        ctx.moveTo(x, y - 6);
        ctx.lineTo(x + 6, y + 5);
        ctx.lineTo(x - 6, y + 5);
        ctx.closePath();
      } else {
        ctx.arc(x, y, 5, 0, Math.PI * 2);
      }
      ctx.fill();
    }
  }
}

/** Hit test in canvas coordinates: nodes first, then segment hubs. */
export function pick(model: CanvasModel, x: number, y: number): string | null {
  for (const node of [...model.nodes].reverse()) {
    if (Math.hypot(node.x - x, node.y - y) <= 20) return `node:${node.name}`;
  }
  for (const seg of model.segments) {
    const hub = segmentHub(model, seg.name);
    if (Math.hypot(hub.x - x, hub.y - y) <= 10) return `segment:${seg.name}`;
  }
  return null;
}
