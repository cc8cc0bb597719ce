/** DOM rendering and the polling controller for the annotation page. */

import { ApiClient } from "./api.js";
import { accuracyChartSvg } from "./chart.js";
import { AnnotationSession } from "./session.js";
import type { MetricsPayload, StatusPayload } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderStatus(target: HTMLElement, status: StatusPayload): void {
  target.replaceChildren();
  target.append(
    el("span", "status-cycle", `cycle ${status.cycle}`),
    el("span", `status-phase phase-${status.phase}`, status.phase),
  );
  if (status.phase === "annotating") {
    target.append(el("span", "status-pending", `${status.pending} to label`));
  }
  if (status.error) {
    target.append(el("span", "status-error", status.error));
  }
}

export function renderTiles(
  target: HTMLElement,
  session: AnnotationSession,
  classes: string[],
  onChange: () => void,
): void {
  target.replaceChildren();
  if (session.batch === null) return;
  for (const item of session.batch.items) {
    const tile = el("div", "tile");
    tile.dataset.id = item.id;

    const img = el("img");
    img.src = item.image_url;
    img.alt = item.id;
    tile.append(img);

    const meta = el("div", "tile-meta");
    meta.append(
      el("span", "tile-id", item.id),
      el("span", "tile-entropy", `H=${item.entropy.toFixed(2)}`),
    );
    tile.append(meta);

    const picker = el("div", "tile-labels");
    for (const cls of classes) {
      const button = el("button", "label-option", cls);
      button.type = "button";
      if (cls === item.suggested_label) button.classList.add("suggested");
      if (cls === session.labelFor(item.id)) button.classList.add("selected");
      button.addEventListener("click", () => {
        session.relabel(item.id, cls);
        onChange();
      });
      picker.append(button);
    }
    tile.append(picker);
    if (session.isOverridden(item.id)) tile.classList.add("overridden");
    target.append(tile);
  }
}

export function renderMetrics(target: HTMLElement, metrics: MetricsPayload): void {
  target.replaceChildren();
  const chart = el("div", "chart");
  chart.innerHTML = accuracyChartSvg(metrics.history);
  target.append(chart);

  const counts = el("div", "class-counts");
  for (const [cls, count] of Object.entries(metrics.class_stats.counts)) {
    const row = el("div", "class-count");
    row.append(el("span", "class-name", cls), el("span", "class-n", String(count)));
    counts.append(row);
  }
  target.append(counts);
}

/** Page controller: poll status, keep the batch grid and metrics current. */
export class App {
  readonly session: AnnotationSession;
  private classes: string[] = [];
  private shownCycle = -1;
  private busy = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    annotatorId: string = "ui",
  ) {
    this.session = new AnnotationSession(api, annotatorId);
    root.replaceChildren();
    this.statusEl = el("div", "status");
    this.gridEl = el("div", "grid");
    this.submitEl = el("button", "submit", "submit labels");
    this.submitEl.type = "button";
    this.submitEl.hidden = true;
    this.submitEl.addEventListener("click", () => void this.submit());
    this.metricsEl = el("div", "metrics");
    root.append(this.statusEl, this.gridEl, this.submitEl, this.metricsEl);
  }

  private statusEl: HTMLElement;
  private gridEl: HTMLElement;
  private submitEl: HTMLButtonElement;
  private metricsEl: HTMLElement;

  /** One poll: refresh status, batch grid and metrics as needed. */
  async refresh(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      const status = await this.api.status();
      renderStatus(this.statusEl, status);
      const metrics = await this.api.metrics();
      renderMetrics(this.metricsEl, metrics);
      this.classes = Object.keys(metrics.class_stats.counts);

      if (status.phase === "annotating") {
        if (this.session.batch === null || this.session.batch.cycle !== status.cycle) {
          await this.session.load();
          this.shownCycle = -1;
        }
        if (this.shownCycle !== status.cycle) {
          this.renderGrid();
          this.shownCycle = status.cycle;
        }
        this.submitEl.hidden = false;
      } else {
        this.gridEl.replaceChildren();
        this.submitEl.hidden = true;
        this.shownCycle = -1;
      }
    } finally {
      this.busy = false;
    }
  }

  private renderGrid(): void {
    renderTiles(this.gridEl, this.session, this.classes, () => this.renderGrid());
  }

  async submit(): Promise<void> {
    if (this.session.batch === null) return;
    const outcome = await this.session.submit();
    if (outcome === "stale") {
      // Batch was refetched; repaint it for the cycle we actually hold now.
      this.shownCycle = -1;
    }
    await this.refresh();
  }

  start(pollMs: number): () => void {
    void this.refresh();
    const timer = setInterval(() => void this.refresh(), pollMs);
    return () => clearInterval(timer);
  }
}
