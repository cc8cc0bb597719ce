/** Inline-SVG accuracy chart for the per-cycle metrics history. */

import type { CycleRecord } from "./types.js";

export interface ChartGeometry {
  width: number;
  height: number;
  points: { x: number; y: number; cycle: number; accuracy: number }[];
}

const WIDTH = 640;
const HEIGHT = 220;
const PAD = { left: 44, right: 16, top: 14, bottom: 28 };

/** Map history records onto pixel coordinates (accuracy axis fixed to [0, 1]). */
export function chartGeometry(history: CycleRecord[]): ChartGeometry {
  const innerW = WIDTH - PAD.left - PAD.right;
  const innerH = HEIGHT - PAD.top - PAD.bottom;
  const maxCycle = Math.max(1, ...history.map((r) => r.cycle));
  const points = history.map((r) => ({
    x: PAD.left + (r.cycle / maxCycle) * innerW,
    y: PAD.top + (1 - r.val_accuracy) * innerH,
    cycle: r.cycle,
    accuracy: r.val_accuracy,
  }));
  return { width: WIDTH, height: HEIGHT, points };
}

export function accuracyChartSvg(history: CycleRecord[]): string {
  const geo = chartGeometry(history);
  const innerH = HEIGHT - PAD.top - PAD.bottom;
  const gridLines = [0, 0.25, 0.5, 0.75, 1.0]
    .map((frac) => {
      const y = PAD.top + (1 - frac) * innerH;
      return (
        `<line x1="${PAD.left}" y1="${y}" x2="${WIDTH - PAD.right}" y2="${y}" class="grid"/>` +
        `<text x="${PAD.left - 6}" y="${y + 4}" class="tick" text-anchor="end">${frac.toFixed(2)}</text>`
      );
    })
    .join("");
  const ticks = geo.points
    .map(
      (p) =>
        `<text x="${p.x}" y="${HEIGHT - 8}" class="tick" text-anchor="middle">${p.cycle}</text>`,
    )
    .join("");
  const polyline =
    geo.points.length > 0
      ? `<polyline class="curve" fill="none" points="${geo.points
          .map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`)
          .join(" ")}"/>`
      : "";
  const dots = geo.points
    .map(
      (p) =>
        `<circle class="dot" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="3">` +
        `<title>cycle ${p.cycle}: ${(p.accuracy * 100).toFixed(1)}%</title></circle>`,
    )
    .join("");
  return (
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="validation accuracy by cycle">` +
    `${gridLines}${ticks}${polyline}${dots}</svg>`
  );
}
