/**
 * Typed HTTP client for the depcal gateway.
 *
 * Every method resolves with parsed JSON or rejects with ApiError carrying
 * the HTTP status and the server's `detail` payload, so callers can branch
 * on 409 (already decided) versus 422 (modification failed re-verification)
 * without string matching.
 */

export interface GateTrace {
  gate1_result: string;
  gate2_result: string | null;
  gate3_result: string;
  action_type: "Type1" | "Type2" | "Type3" | "Type4";
  thresholds_used: Record<string, number>;
}

export interface AtomicUnit {
  unit_id: string;
  kind: string;
  target: string;
  pre_signatures: string[];
  post_signatures: string[];
  depends_on_units: string[];
  metadata: Record<string, unknown>;
}

export interface VerificationFinding {
  kind: string;
  [extra: string]: unknown;
}

export interface DraftPatch {
  patch_id: string;
  case_id: string;
  units: AtomicUnit[];
  verified: boolean;
  verification_findings: VerificationFinding[];
}

export interface ScoreBreakdown {
  risk_components: number[];
  risk_weights: number[];
  risk: number;
  confidence_components: number[];
  confidence_weights: number[];
  confidence: number;
}

export interface PlanSummary {
  case_id: string;
  project: string;
  action_type: string;
  strategy: string;
  units_planned: AtomicUnit[];
  requires_human: boolean;
  advisory_text: string | null;
}

export interface ReviewTask {
  case_id: string;
  project: string;
  priority: number;
  gate_trace: GateTrace;
  draft_patch: DraftPatch | null;
  impact_evidence: string[][];
  created_at: number;
  status: "pending" | "decided";
  decision: { verdict: string; [extra: string]: unknown } | null;
}

export interface CaseDetail {
  case_id: string;
  event_id: string;
  event_type: string;
  project: string;
  created_at: number;
  observed_at: number;
  impact_item: {
    project: string;
    impact_score: number;
    depth: number;
    test_adequacy: number;
    remediation_cost: number;
    priority: number;
    evidence_paths: string[][];
  };
  breakdown: ScoreBreakdown;
  gate_trace: GateTrace;
  plan: PlanSummary;
  patch: DraftPatch | null;
  validation_outcome: Record<string, unknown> | null;
  rollback: Record<string, unknown> | null;
  review: Record<string, unknown> | null;
  disposition: string | null;
  disposition_time: number | null;
  status: "open" | "awaiting_review" | "finalized";
  escalated: boolean;
}

export interface MetricsSnapshot {
  cases_total: number;
  dispositions: Record<string, number>;
  gate_type_histogram: Record<string, number>;
  mtr_seconds: number | null;
  mtr_by_event: Record<string, number>;
  automation_rate: number;
  rollback_frequency: number;
  pending_reviews: number;
  policy_versions: number;
  clock: number;
}

/** Delta entry for a modify verdict: drop a unit or retarget it. */
export interface UnitDelta {
  unit_id: string;
  drop?: boolean;
  target?: string;
}

export interface DecisionBody {
  verdict: "accept" | "reject" | "modify";
  reviewer?: string;
  modified_units?: UnitDelta[];
  decided_at?: number;
}

export interface QueueFilter {
  project?: string;
  event_id?: string;
  include_decided?: boolean;
}

export interface CaseFilter {
  event_id?: string;
  status?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function buildQuery(params: Record<string, string | undefined>): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined) search.set(key, value);
  }
  const qs = search.toString();
  return qs ? `?${qs}` : "";
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    // bind lazily so the browser's fetch keeps its window receiver
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async requestWithRaw<T>(
    path: string,
    init?: RequestInit,
  ): Promise<{ data: T; raw: string }> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    const raw = await res.text();
    let payload: unknown = null;
    if (raw !== "") {
      try {
        payload = JSON.parse(raw);
      } catch {
        payload = raw;
      }
    }
    if (!res.ok) {
      const detail =
        payload !== null && typeof payload === "object" && "detail" in payload
          ? (payload as { detail: unknown }).detail
          : payload;
      throw new ApiError(res.status, detail);
    }
    return { data: payload as T, raw };
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const { data } = await this.requestWithRaw<T>(path, init);
    return data;
  }

  reviewQueue(filter: QueueFilter = {}): Promise<ReviewTask[]> {
    const qs = buildQuery({
      project: filter.project,
      event_id: filter.event_id,
      include_decided: filter.include_decided ? "true" : undefined,
    });
    return this.request<ReviewTask[]>(`/review-queue${qs}`);
  }

  caseDetail(caseId: string): Promise<CaseDetail> {
    return this.request<CaseDetail>(`/cases/${encodeURIComponent(caseId)}`);
  }

  /** Case detail plus the exact response body, for display fidelity checks. */
  caseDetailWithRaw(caseId: string): Promise<{ data: CaseDetail; raw: string }> {
    return this.requestWithRaw<CaseDetail>(`/cases/${encodeURIComponent(caseId)}`);
  }

  listCases(filter: CaseFilter = {}): Promise<CaseDetail[]> {
    const qs = buildQuery({ event_id: filter.event_id, status: filter.status });
    return this.request<CaseDetail[]>(`/cases${qs}`);
  }

  submitDecision(caseId: string, body: DecisionBody): Promise<ReviewTask> {
    return this.request<ReviewTask>(
      `/review/${encodeURIComponent(caseId)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
  }

  metrics(): Promise<MetricsSnapshot> {
    return this.request<MetricsSnapshot>("/metrics");
  }

  policy(): Promise<{ policy: Record<string, unknown>; versions: unknown[] }> {
    return this.request("/policy");
  }
}
