// Console state machine: setup -> rating -> complete, nothing else.
//
// The console never computes an estimate itself; every number it holds
// was taken verbatim from a service response. History grows by exactly
// one entry per accepted rating, and the pending segment is replaced
// only after a successful submit.

import {
  ApiError,
  Client,
  CreateSessionParams,
  EstimateInfo,
  NextResponse,
  SessionInfo,
} from "./api.js";

export type Mode = "setup" | "rating" | "complete";

export interface PendingSegment {
  segmentId: string;
  docId: string;
  metrics: Record<string, number>;
}

export interface HistoryEntry {
  segmentId: string;
  score: number;
  estimate: EstimateInfo;
}

export interface ConsoleState {
  mode: Mode;
  session: SessionInfo | null;
  pending: PendingSegment | null;
  draft: string;
  history: HistoryEntry[];
  nRated: number;
  budget: number;
  final: EstimateInfo | null;
  error: string | null;
  busy: boolean;
  maxScore: number;
}

export interface StartParams extends CreateSessionParams {
  maxScore?: number;
}

export const QUICK_PICKS = [0, 0.1, 1, 5, 25];

export function initialState(): ConsoleState {
  return {
    mode: "setup",
    session: null,
    pending: null,
    draft: "",
    history: [],
    nRated: 0,
    budget: 0,
    final: null,
    error: null,
    busy: false,
    maxScore: 25,
  };
}

function messageOf(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? `server unreachable: ${err.detail}` : err.detail;
  }
  return err instanceof Error ? err.message : String(err);
}

export class Console {
  state: ConsoleState = initialState();
  private inFlight = false;
  private lastSubmitted: string | null = null;

  constructor(
    private client: Client,
    private onChange: (state: ConsoleState) => void = () => {},
  ) {}

  private patch(partial: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...partial };
    this.onChange(this.state);
  }

  private applyNext(next: NextResponse): void {
    if (next.status === "active") {
      this.patch({
        mode: "rating",
        pending: {
          segmentId: next.segment_id,
          docId: next.doc_id,
          metrics: next.metrics,
        },
        draft: "",
        nRated: next.n_rated,
        budget: next.budget,
      });
    } else {
      this.patch({
        mode: "complete",
        pending: null,
        draft: "",
        nRated: next.n_rated,
        budget: next.budget,
        final: next.final,
      });
    }
  }

  /** Parse and range-check a score draft; returns an error string to show. */
  validate(draft: string): number | string {
    const text = draft.trim();
    if (text === "") return "enter a score";
    const value = Number(text);
    if (!Number.isFinite(value)) return `'${text}' is not a number`;
    if (value < 0 || value > this.state.maxScore) {
      return `score must be between 0 and ${this.state.maxScore}`;
    }
    return value;
  }

  setDraft(text: string): void {
    this.patch({ draft: text, error: null });
  }

  async start(params: StartParams): Promise<void> {
    if (this.state.mode !== "setup" || this.inFlight) return;
    const { maxScore, ...request } = params;
    if (!Number.isInteger(request.budget) || request.budget < 1) {
      // blocked client-side, no request leaves the page
      this.patch({ error: "budget must be a positive integer" });
      return;
    }
    this.inFlight = true;
    this.patch({ busy: true, error: null, maxScore: maxScore ?? this.state.maxScore });
    try {
      const session = await this.client.createSession(request);
      this.patch({ session, budget: session.budget });
      this.applyNext(await this.client.nextSegment(session.session_id));
      this.patch({ busy: false });
    } catch (err) {
      // stay in setup so the user can fix the form or retry
      this.patch({ error: messageOf(err), busy: false });
    } finally {
      this.inFlight = false;
    }
  }

  async submit(): Promise<void> {
    const { mode, pending, session } = this.state;
    if (mode !== "rating" || !pending || !session) return;
    if (this.inFlight) return; // one request at a time
    if (this.lastSubmitted === pending.segmentId) return; // double-click guard
    const parsed = this.validate(this.state.draft);
    if (typeof parsed === "string") {
      this.patch({ error: parsed });
      return;
    }
    this.inFlight = true;
    this.lastSubmitted = pending.segmentId;
    this.patch({ busy: true, error: null });
    try {
      const res = await this.client.submitRating(
        session.session_id,
        pending.segmentId,
        parsed,
      );
      const history = [
        ...this.state.history,
        { segmentId: pending.segmentId, score: parsed, estimate: res.estimate },
      ];
      if (res.status === "complete") {
        this.patch({
          mode: "complete",
          pending: null,
          draft: "",
          history,
          nRated: res.n_rated,
          budget: res.budget,
          final: res.estimate,
          busy: false,
        });
      } else {
        this.patch({ history, nRated: res.n_rated });
        this.applyNext(await this.client.nextSegment(session.session_id));
        this.lastSubmitted = null;
        this.patch({ busy: false });
      }
    } catch (err) {
      this.lastSubmitted = null;
      if (err instanceof ApiError && err.status === 409) {
        // our pending segment is stale; ask the service what it expects
        this.patch({ error: messageOf(err) });
        try {
          this.applyNext(await this.client.nextSegment(session.session_id));
        } catch {
          // keep the 409 message; the next submit will retry
        }
      } else {
        this.patch({ error: messageOf(err) });
      }
      this.patch({ busy: false });
    } finally {
      this.inFlight = false;
    }
  }

  reset(): void {
    this.inFlight = false;
    this.lastSubmitted = null;
    this.state = initialState();
    this.onChange(this.state);
  }
}
