/**
 * Typed client for the review service's public HTTP API.
 *
 * Only public endpoints are used; the console has no private backdoor into
 * the service. Errors carry the HTTP status so callers can distinguish the
 * 409 "someone else took this item" path from real failures.
 */

export type LabelName = "dual quality" | "other problems" | "standard";

export interface UiConfig {
  labels: LabelName[];
  subtypes: string[];
  k: number;
  flag_threshold: number;
}

export interface QueueItem {
  review_id: string;
  dq_probability: number;
  text: string;
  product: string | null;
}

export interface QueueView {
  iteration: number | null;
  created_at?: string;
  items: QueueItem[];
}

export interface IterationRecord {
  iteration: number;
  model_id: string;
  pool_scored: number;
  batch_size: number;
  decisions_ingested: number;
  labeled_size: number;
  label_counts: Record<string, number>;
}

export interface RollupRow {
  product: string;
  flagged_count: number;
  escalation: boolean;
}

export interface Subtype {
  kind: string;
  detail: string | null;
}

export interface LabelRequest {
  label: LabelName;
  annotator: string;
  subtype?: Subtype;
}

export interface LabelResponse {
  review_id: string;
  label: LabelName;
  decisions_total: number;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let message = response.statusText;
      try {
        const payload = (await response.json()) as { error?: string };
        if (payload.error) message = payload.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  uiConfig(): Promise<UiConfig> {
    return this.request("GET", "/ui-config");
  }

  queue(): Promise<QueueView> {
    return this.request("GET", "/annotation/queue");
  }

  label(reviewId: string, req: LabelRequest): Promise<LabelResponse> {
    return this.request("POST", `/annotation/${encodeURIComponent(reviewId)}/label`, req);
  }

  iterations(): Promise<IterationRecord[]> {
    return this.request("GET", "/iterations");
  }

  rollup(): Promise<RollupRow[]> {
    return this.request("GET", "/products/rollup");
  }
}
