// Typed client for the session service. Payload shapes mirror API.md;
// every number arrives as a JSON double and is passed through untouched.

export interface BoundInfo {
  kind: string;
  gamma: number;
  t: number;
}

export interface EstimateInfo {
  value: number;
  method: string;
  cv: string;
  n: number;
  flags: string[];
  bound: BoundInfo | null;
}

export interface SessionInfo {
  session_id: string;
  test_set: string;
  budget: number;
  n_total: number;
  strategy: string;
  partition: string;
  gamma: number;
  seed: number;
}

export interface ActiveSegment {
  status: "active";
  segment_id: string;
  doc_id: string;
  metrics: Record<string, number>;
  n_rated: number;
  budget: number;
}

export interface CompleteInfo {
  status: "complete";
  final: EstimateInfo | null;
  n_rated: number;
  budget: number;
}

export type NextResponse = ActiveSegment | CompleteInfo;

export interface RatingResponse {
  status: string;
  n_rated: number;
  budget: number;
  estimate: EstimateInfo;
}

export interface TranscriptEntry {
  segment_id: string;
  score: number;
  estimate: number;
  bound_t: number | null;
}

export interface SessionReport {
  session_id: string;
  test_set: string;
  status: string;
  budget: number;
  n_rated: number;
  strategy: string;
  partition: string;
  gamma: number;
  seed: number;
  transcript: TranscriptEntry[];
  final: EstimateInfo | null;
}

export interface HealthResponse {
  status: string;
  backend: string;
  test_sets: string[];
}

export interface CreateSessionParams {
  test_set: string;
  budget: number;
  strategy?: string;
  partition?: string;
  gamma?: number;
  r_override?: number | null;
  seed?: number | null;
  k?: number;
  bin_size?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(status === 0 ? detail : `${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  private fetchFn: FetchLike;

  constructor(
    private base: string,
    fetchFn?: FetchLike,
  ) {
    // wrap so the global fetch keeps its own `this`
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      // status 0 = never reached the server (connection refused, DNS, ...)
      throw new ApiError(0, err instanceof Error ? err.message : String(err));
    }
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail =
        typeof (body as { detail?: unknown }).detail === "string"
          ? (body as { detail: string }).detail
          : `${resp.status} ${resp.statusText}`;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/healthz");
  }

  createSession(params: CreateSessionParams): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
  }

  nextSegment(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${sessionId}/next`);
  }

  submitRating(
    sessionId: string,
    segmentId: string,
    score: number,
  ): Promise<RatingResponse> {
    return this.request<RatingResponse>(`/sessions/${sessionId}/ratings`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ segment_id: segmentId, score }),
    });
  }

  report(sessionId: string): Promise<SessionReport> {
    return this.request<SessionReport>(`/sessions/${sessionId}/report`);
  }
}
