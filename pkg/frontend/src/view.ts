/**
 * Pure rendering: session view in, markup string out.
 *
 * Split in two stages so tests can assert on the structured model
 * (pane point counts, gauge value, bar magnitudes) without scraping
 * markup.  No DOM access happens here.
 */

import type { Vec3 } from "./protocol.js";
import type { SessionView } from "./session.js";

export interface Pane {
  label: string;
  points: Array<[number, number]>;
  marker: [number, number] | null; // latest magnet 0 position
}

export interface ForceBar {
  name: string;
  newtons: number;
}

export interface RenderModel {
  banner: string | null;
  status: string;
  t: number;
  step: number;
  coverage: number; // exactly the last frame's C
  mmcPhase: string | null;
  panes: [Pane, Pane, Pane];
  bars: ForceBar[];
  log: string[];
  magnetPosition: Vec3 | null;
}

const PANES: Array<[string, number, number]> = [
  ["x-y", 0, 1],
  ["x-z", 0, 2],
  ["y-z", 1, 2],
];

export function renderModel(view: SessionView): RenderModel {
  const frame = view.frame;
  const magnet = frame?.magnets[0] ?? null;
  const panes = PANES.map(([label, i, j]) => ({
    label,
    points: view.trajectory.map((p) => [p[i], p[j]] as [number, number]),
    marker: magnet ? ([magnet.position[i], magnet.position[j]] as [number, number]) : null,
  })) as [Pane, Pane, Pane];

  const bars: ForceBar[] = [];
  if (frame?.forces) {
    for (const [name, vec] of Object.entries(frame.forces)) {
      bars.push({ name, newtons: Math.hypot(vec[0], vec[1], vec[2]) });
    }
  }

  let banner: string | null = null;
  if (view.connection === "disconnected") {
    banner = view.retryInMs === null
      ? "disconnected"
      : `disconnected - retrying in ${(view.retryInMs / 1000).toFixed(1)} s`;
  } else if (view.connection === "connecting") {
    banner = "connecting...";
  }

  return {
    banner,
    status: frame?.status ?? "-",
    t: frame?.t ?? 0,
    step: frame?.step ?? 0,
    coverage: frame?.coverage ?? 0,
    mmcPhase: frame?.mmc_phase ?? null,
    panes,
    bars,
    log: view.commandLog.slice(-12).map((e) => `${e.kind}: ${e.text}`),
    magnetPosition: magnet?.position ?? null,
  };
}

const PANE_SIZE = 220;

function paneSvg(pane: Pane): string {
  const pts = pane.marker ? [...pane.points, pane.marker] : pane.points;
  let minX = -0.01, maxX = 0.01, minY = -0.01, maxY = 0.01;
  for (const [x, y] of pts) {
    minX = Math.min(minX, x); maxX = Math.max(maxX, x);
    minY = Math.min(minY, y); maxY = Math.max(maxY, y);
  }
  const span = Math.max(maxX - minX, maxY - minY, 1e-6);
  const pad = 0.05 * span;
  const scale = (PANE_SIZE - 20) / (span + 2 * pad);
  const sx = (x: number) => 10 + (x - minX + pad) * scale;
  const sy = (y: number) => PANE_SIZE - 10 - (y - minY + pad) * scale;

  const path = pane.points
    .map(([x, y], k) => `${k === 0 ? "M" : "L"}${sx(x).toFixed(1)},${sy(y).toFixed(1)}`)
    .join(" ");
  const last = pane.points[pane.points.length - 1];
  const marker = pane.marker;
  return (
    `<svg class="pane" viewBox="0 0 ${PANE_SIZE} ${PANE_SIZE}" data-points="${pane.points.length}">` +
    `<rect width="${PANE_SIZE}" height="${PANE_SIZE}" class="pane-bg"/>` +
    `<text x="8" y="16" class="pane-label">${pane.label}</text>` +
    (path ? `<path d="${path}" class="trajectory" fill="none"/>` : "") +
    (last ? `<circle cx="${sx(last[0]).toFixed(1)}" cy="${sy(last[1]).toFixed(1)}" r="3" class="capsule"/>` : "") +
    (marker ? `<rect x="${(sx(marker[0]) - 3).toFixed(1)}" y="${(sy(marker[1]) - 3).toFixed(1)}" width="6" height="6" class="magnet"/>` : "") +
    `</svg>`
  );
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Full console body as one markup string; host assigns it to innerHTML. */
export function renderHtml(model: RenderModel): string {
  const gaugePct = (100 * model.coverage).toFixed(1);
  const maxBar = Math.max(1e-9, ...model.bars.map((b) => b.newtons));
  const bars = model.bars
    .map(
      (b) =>
        `<div class="bar-row"><span class="bar-name">${esc(b.name)}</span>` +
        `<div class="bar" style="width:${((100 * b.newtons) / maxBar).toFixed(1)}%"></div>` +
        `<span class="bar-value">${b.newtons.toExponential(2)} N</span></div>`,
    )
    .join("");
  const log = model.log.map((line) => `<li>${esc(line)}</li>`).join("");
  const phases = ["I", "II", "III", "IV"]
    .map(
      (p) =>
        `<span class="phase${p === model.mmcPhase ? " active" : ""}">${p}</span>`,
    )
    .join("");

  return (
    (model.banner ? `<div class="banner">${esc(model.banner)}</div>` : "") +
    `<div class="statusline">status <b>${esc(model.status)}</b>` +
    ` | t ${model.t.toFixed(3)} s | step ${model.step}</div>` +
    `<div class="panes">${model.panes.map(paneSvg).join("")}</div>` +
    `<div class="gauge">coverage <b data-coverage="${model.coverage}">${gaugePct}%</b>` +
    `<div class="gauge-bar"><div class="gauge-fill" style="width:${gaugePct}%"></div></div></div>` +
    `<div class="mmc">motility phase ${phases}</div>` +
    `<div class="forces">${bars || "<i>no force report yet</i>"}</div>` +
    `<ul class="cmdlog">${log}</ul>`
  );
}
