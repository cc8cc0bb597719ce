/** Payload shapes of the annotation service HTTP API. */

export interface BatchItem {
  id: string;
  image_url: string;
  suggested_label: string;
  entropy: number;
}

export interface BatchPayload {
  cycle: number;
  items: BatchItem[];
}

export interface LabelEntry {
  id: string;
  label: string;
  elapsed_ms: number;
}

export interface LabelSubmission {
  cycle: number;
  labels: LabelEntry[];
  annotator_id: string;
}

export interface SubmitResult {
  accepted: number;
  remaining: number;
}

export interface CycleRecord {
  cycle: number;
  val_accuracy: number;
  annotation_seconds: number;
  labels_added: number;
  labeled_total: number;
}

export interface MetricsPayload {
  history: CycleRecord[];
  class_stats: {
    counts: Record<string, number>;
    fractions: Record<string, number>;
  };
}

export type Phase = "training" | "annotating" | "idle";

export interface StatusPayload {
  cycle: number;
  phase: Phase;
  pending: number;
  error?: string;
}
