/** Payload factories mirroring the gateway's serialized shapes. */

import type {
  AtomicUnit,
  CaseDetail,
  GateTrace,
  MetricsSnapshot,
  ReviewTask,
} from "../src/api.js";

export function makeTrace(overrides: Partial<GateTrace> = {}): GateTrace {
  return {
    gate1_result: "forwarded",
    gate2_result: "forwarded",
    gate3_result: "type3_critical",
    action_type: "Type3",
    thresholds_used: { theta_r_low: 0.3, theta_c_high: 0.7 },
    ...overrides,
  };
}

export function makeUnit(id: string, overrides: Partial<AtomicUnit> = {}): AtomicUnit {
  return {
    unit_id: id,
    kind: "callsite_rewrite",
    target: "project:svc-a",
    pre_signatures: ["libk.old"],
    post_signatures: ["libk.new"],
    depends_on_units: [],
    metadata: {},
    ...overrides,
  };
}

export function makeTask(id: string, overrides: Partial<ReviewTask> = {}): ReviewTask {
  return {
    case_id: id,
    project: "project:svc-a",
    priority: 0.42,
    gate_trace: makeTrace(),
    draft_patch: {
      patch_id: `patch-${id}`,
      case_id: id,
      units: [makeUnit("u1")],
      verified: true,
      verification_findings: [],
    },
    impact_evidence: [["cve:x", "package:k", "project:svc-a"]],
    created_at: 100.0,
    status: "pending",
    decision: null,
    ...overrides,
  };
}

export function makeDetail(id: string, overrides: Partial<CaseDetail> = {}): CaseDetail {
  const manifest = makeUnit("u1", { kind: "manifest_bump", pre_signatures: [], post_signatures: [] });
  const rewrite = makeUnit("u2", { depends_on_units: ["u1"] });
  return {
    case_id: id,
    event_id: "ev1",
    event_type: "cve_disclosure",
    project: "project:svc-a",
    created_at: 100.0,
    observed_at: 90.0,
    impact_item: {
      project: "project:svc-a",
      impact_score: 0.64,
      depth: 2,
      test_adequacy: 0.86,
      remediation_cost: 0.2,
      priority: 0.42,
      evidence_paths: [["cve:x", "package:k", "project:svc-a"]],
    },
    breakdown: {
      risk_components: [0.9, 0.2, 0.5, 0.1, 0.3, 0.4],
      risk_weights: [0.25, 0.2, 0.2, 0.15, 0.1, 0.1],
      risk: 0.47,
      confidence_components: [0.5, 1.0, 0.86, 0.3],
      confidence_weights: [0.25, 0.25, 0.25, 0.25],
      confidence: 0.665,
    },
    gate_trace: makeTrace(),
    plan: {
      case_id: id,
      project: "project:svc-a",
      action_type: "Type3",
      strategy: "human_reviewed_draft",
      units_planned: [manifest, rewrite],
      requires_human: true,
      advisory_text: null,
    },
    patch: {
      patch_id: `patch-${id}`,
      case_id: id,
      units: [manifest, rewrite],
      verified: true,
      verification_findings: [],
    },
    validation_outcome: null,
    rollback: null,
    review: null,
    disposition: null,
    disposition_time: null,
    status: "awaiting_review",
    escalated: false,
  ...overrides,
  };
}

export function makeMetrics(overrides: Partial<MetricsSnapshot> = {}): MetricsSnapshot {
  return {
    cases_total: 7,
    dispositions: { merged_auto: 4, merged_after_review: 2, rejected_by_human: 1 },
    gate_type_histogram: { Type1: 4, Type3: 3 },
    mtr_seconds: 1234.5,
    mtr_by_event: { cve_disclosure: 1500.0 },
    automation_rate: 0.57,
    rollback_frequency: 0.0,
    pending_reviews: 3,
    policy_versions: 2,
    clock: 9000.0,
    ...overrides,
  };
}
