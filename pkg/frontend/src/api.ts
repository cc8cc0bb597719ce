/** Thin typed client over the annotation service API. */

import type {
  BatchPayload,
  LabelSubmission,
  MetricsPayload,
  StatusPayload,
  SubmitResult,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx response, carrying the service's structured `detail` if present. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`api error ${status}: ${JSON.stringify(detail)}`);
  }

  /** Service error code such as "stale_cycle" or "cycle_busy", if any. */
  get code(): string | null {
    if (
      typeof this.detail === "object" &&
      this.detail !== null &&
      typeof (this.detail as { error?: unknown }).error === "string"
    ) {
      return (this.detail as { error: string }).error;
    }
    return null;
  }
}

async function parseBody(response: Response): Promise<unknown> {
  const text = await response.text();
  if (!text) return null;
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.base + path);
    const body = await parseBody(response);
    if (!response.ok) {
      throw new ApiError(response.status, (body as { detail?: unknown })?.detail ?? body);
    }
    return body as T;
  }

  status(): Promise<StatusPayload> {
    return this.get<StatusPayload>("/api/status");
  }

  batch(): Promise<BatchPayload> {
    return this.get<BatchPayload>("/api/batch");
  }

  metrics(): Promise<MetricsPayload> {
    return this.get<MetricsPayload>("/api/metrics");
  }

  async submit(body: LabelSubmission): Promise<SubmitResult> {
    const response = await this.fetchFn(this.base + "/api/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const parsed = await parseBody(response);
    if (!response.ok) {
      throw new ApiError(response.status, (parsed as { detail?: unknown })?.detail ?? parsed);
    }
    return parsed as SubmitResult;
  }
}
