import type { ZodType } from "zod";
import {
  chartDetailSchema,
  chartsPageSchema,
  decisionResponseSchema,
  exportResponseSchema,
  overallProgressSchema,
  type ChartDetail,
  type ChartsPage,
  type DecisionResponse,
  type ExportResponse,
  type OverallProgress,
  type Verdict,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

export interface DecisionInput {
  code: string;
  verdict: Verdict;
  reviewer_id: string;
  reason?: string;
  idempotency_key?: string;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ApiOptions {
  baseUrl?: string;
  token?: string | null;
  fetchFn?: FetchLike;
}

/** Typed client for the review service; every response is validated. */
export class ReviewApi {
  private readonly baseUrl: string;
  private readonly token: string | null;
  private readonly fetchFn: FetchLike;

  constructor(options: ApiOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.token = options.token ?? null;
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
  }

  listCharts(cursor?: string, limit?: number): Promise<ChartsPage> {
    const params = new URLSearchParams();
    if (cursor) params.set("cursor", cursor);
    if (limit !== undefined) params.set("limit", String(limit));
    const query = params.size > 0 ? `?${params}` : "";
    return this.request(`/api/charts${query}`, chartsPageSchema);
  }

  getChart(chartId: string): Promise<ChartDetail> {
    return this.request(`/api/charts/${encodeURIComponent(chartId)}`, chartDetailSchema);
  }

  decide(chartId: string, input: DecisionInput): Promise<DecisionResponse> {
    return this.request(
      `/api/charts/${encodeURIComponent(chartId)}/decisions`,
      decisionResponseSchema,
      { method: "POST", body: JSON.stringify(input) },
    );
  }

  progress(): Promise<OverallProgress> {
    return this.request("/api/progress", overallProgressSchema);
  }

  exportGroundTruth(reviewerId: string): Promise<ExportResponse> {
    return this.request("/api/export", exportResponseSchema, {
      method: "POST",
      body: JSON.stringify({ reviewer_id: reviewerId }),
    });
  }

  private async request<T>(path: string, schema: ZodType<T>, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Review-Token"] = this.token;
    const response = await this.fetchFn(`${this.baseUrl}${path}`, { ...init, headers });
    if (!response.ok) throw await toApiError(response);
    return schema.parse(await response.json());
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let detail: unknown;
  try {
    detail = (await response.json())?.detail;
  } catch {
    detail = null;
  }
  if (
    typeof detail === "object" &&
    detail !== null &&
    "code" in detail &&
    "message" in detail
  ) {
    const { code, message } = detail as { code: string; message: string };
    return new ApiError(response.status, code, message);
  }
  return new ApiError(response.status, "http_error", `request failed (${response.status})`);
}
