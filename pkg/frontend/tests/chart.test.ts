import { describe, expect, it } from "vitest";

import { accuracyChartSvg, chartGeometry } from "../src/chart.js";
import { makeHistory } from "./helpers.js";

describe("accuracy chart", () => {
  it("maps an 8-record history onto 8 ordered points", () => {
    const history = makeHistory(8);
    const geo = chartGeometry(history);

    expect(geo.points).toHaveLength(8);
    for (let i = 1; i < geo.points.length; i++) {
      expect(geo.points[i]!.x).toBeGreaterThan(geo.points[i - 1]!.x);
    }
    // Accuracy rises over the run, so the pixel y must fall (SVG y grows down).
    expect(geo.points[7]!.y).toBeLessThan(geo.points[0]!.y);

    const svg = accuracyChartSvg(history);
    expect(svg).toContain("<svg");
    expect((svg.match(/<circle/g) ?? []).length).toBe(8);
    const pointsAttr = svg.match(/<polyline[^>]*points="([^"]+)"/)![1]!;
    expect(pointsAttr.trim().split(/\s+/)).toHaveLength(8);
  });

  it("pins the accuracy axis to [0, 1]", () => {
    const low = chartGeometry([
      { cycle: 0, val_accuracy: 0.0, annotation_seconds: 0, labels_added: 0, labeled_total: 0 },
    ]);
    const high = chartGeometry([
      { cycle: 0, val_accuracy: 1.0, annotation_seconds: 0, labels_added: 0, labeled_total: 0 },
    ]);
    // 0 accuracy sits at the bottom of the plot area, 1 at the top.
    expect(low.points[0]!.y).toBeGreaterThan(high.points[0]!.y);
    expect(high.points[0]!.y).toBeGreaterThan(0);
    expect(low.points[0]!.y).toBeLessThan(low.height);
  });

  it("renders an empty history without a curve", () => {
    const svg = accuracyChartSvg([]);
    expect(svg).toContain("<svg");
    expect(svg).not.toContain("<polyline");
    expect(svg).not.toContain("<circle");
  });
});
