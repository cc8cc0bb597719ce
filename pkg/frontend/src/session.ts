/** One annotation pass over the currently served batch.
 *
 * Every tile starts on the model's suggested label; the annotator only
 * touches the tiles the model got wrong, and submit always posts a label
 * for every item in the batch in a single request.  A 409 means our batch
 * view went stale (another client finished the cycle, or the loop moved
 * on); the session then refetches instead of resubmitting.
 */

import { ApiClient, ApiError } from "./api.js";
import type { BatchPayload, LabelEntry } from "./types.js";

export type SubmitOutcome = "accepted" | "stale";

export class AnnotationSession {
  batch: BatchPayload | null = null;
  private choices = new Map<string, string>();
  private touchedAt = new Map<string, number>();
  private loadedAt = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly annotatorId: string = "ui",
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** Fetch the pending batch; returns true when there is something to label. */
  async load(): Promise<boolean> {
    const batch = await this.api.batch();
    this.batch = batch;
    this.choices = new Map(batch.items.map((item) => [item.id, item.suggested_label]));
    this.touchedAt = new Map();
    this.loadedAt = this.now();
    return batch.items.length > 0;
  }

  labelFor(id: string): string {
    const label = this.choices.get(id);
    if (label === undefined) throw new Error(`unknown batch item ${id}`);
    return label;
  }

  relabel(id: string, label: string): void {
    if (!this.choices.has(id)) throw new Error(`unknown batch item ${id}`);
    this.choices.set(id, label);
    this.touchedAt.set(id, this.now());
  }

  /** True when the annotator overrode the model's suggestion for this tile. */
  isOverridden(id: string): boolean {
    const item = this.batch?.items.find((i) => i.id === id);
    return item !== undefined && this.labelFor(id) !== item.suggested_label;
  }

  /** Labels for every batch item, with per-item annotation times. */
  entries(): LabelEntry[] {
    if (this.batch === null) throw new Error("no batch loaded");
    const submitTime = this.now();
    return this.batch.items.map((item) => ({
      id: item.id,
      label: this.labelFor(item.id),
      elapsed_ms: Math.max(0, (this.touchedAt.get(item.id) ?? submitTime) - this.loadedAt),
    }));
  }

  /** Post all labels; on a stale/busy 409 refetch the batch instead of retrying. */
  async submit(): Promise<SubmitOutcome> {
    if (this.batch === null) throw new Error("no batch loaded");
    try {
      await this.api.submit({
        cycle: this.batch.cycle,
        labels: this.entries(),
        annotator_id: this.annotatorId,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.load();
        return "stale";
      }
      throw err;
    }
    this.batch = null;
    this.choices = new Map();
    this.touchedAt = new Map();
    return "accepted";
  }
}
