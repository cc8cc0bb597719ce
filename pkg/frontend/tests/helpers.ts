/** Scripted fetch doubles for driving the client against canned API states. */

import type { FetchLike } from "../src/api.js";
import type { BatchPayload, CycleRecord, MetricsPayload, StatusPayload } from "../src/types.js";

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function makeBatch(cycle: number, n: number): BatchPayload {
  const classes = ["broken", "discolored", "pure", "silkcut"];
  return {
    cycle,
    items: Array.from({ length: n }, (_, i) => ({
      id: `img-${cycle}-${String(i).padStart(4, "0")}`,
      image_url: `/api/image/img-${cycle}-${String(i).padStart(4, "0")}`,
      suggested_label: classes[i % classes.length]!,
      entropy: 1.2 - i * 0.01,
    })),
  };
}

export function makeHistory(cycles: number): CycleRecord[] {
  return Array.from({ length: cycles }, (_, i) => ({
    cycle: i,
    val_accuracy: 0.45 + (0.5 * i) / Math.max(1, cycles - 1),
    annotation_seconds: 90 - i,
    labels_added: i === 0 ? 0 : 100,
    labeled_total: 100 + i * 100,
  }));
}

export function makeMetrics(cycles: number): MetricsPayload {
  return {
    history: makeHistory(cycles),
    class_stats: {
      counts: { broken: 32, discolored: 17, pure: 41, silkcut: 10 },
      fractions: { broken: 0.32, discolored: 0.17, pure: 0.41, silkcut: 0.1 },
    },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** fetch stub that answers from per-route queues and records every request. */
export function scriptedFetch(routes: Record<string, (Response | (() => Response))[]>): {
  fetchFn: FetchLike;
  requests: RecordedRequest[];
} {
  const queues = new Map(Object.entries(routes).map(([k, v]) => [k, [...v]]));
  const requests: RecordedRequest[] = [];
  const fetchFn: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    requests.push({
      url: input,
      method,
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    });
    const key = `${method} ${input}`;
    const queue = queues.get(key);
    if (!queue || queue.length === 0) {
      throw new Error(`no scripted response for ${key}`);
    }
    const next = queue.length > 1 ? queue.shift()! : queue[0]!;
    return typeof next === "function" ? next() : next.clone();
  };
  return { fetchFn, requests };
}

export function statusResponse(partial: Partial<StatusPayload> & Pick<StatusPayload, "phase">) {
  const body: StatusPayload = { cycle: 0, pending: 0, ...partial };
  return jsonResponse(body);
}
