"""Pipeline orchestrator: ingest, analyze, gate, forge, validate, learn.

One Engine instance owns the graph, the case store, the learning loop, the
review queue, and a simulated clock (seconds). Event processing is
synchronous: every impact item above threshold becomes exactly one case and
is driven to a terminal disposition, or parked in the review queue when a
human decision is required and no reviewer policy is installed.

Timing model: cases fan out concurrently from the event's observed_at, so a
case's disposition time is observed_at plus its own validation durations
plus any review latency, independent of sibling cases.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .cases import (
    AlreadyDecided,
    CalibrationCase,
    CaseStatus,
    CaseStore,
    Disposition,
    ReviewDecision,
    UnknownCase,
)
from .events import CanonicalEvent, apply_event, normalize_event
from .gating import (
    ActionType,
    build_context,
    classify,
    escalate_past_gate2,
    score_breakdown,
)
from .graph import EdgeKind, GraphStore, NodeId
from .impact import (
    ImpactReport,
    NoRootFound,
    analyze,
    event_source_packages,
    transitive_closure,
)
from .learning import CaseRecord, LearningLoop
from .patching import (
    AtomicUnit,
    Patch,
    PlanInfeasible,
    generate,
    plan as build_plan,
    verify_semantic_preservation,
)
from .policy import PolicyConfig
from .util import content_hash
from .validation import (
    RollbackDecision,
    ValidationOutcome,
    ValidationProfile,
    decide_rollback,
    finalize_case,
    run as run_validation,
)

DATA_DIR_ENV = "DEPCAL_DATA"


class ModifyFailsVerification(Exception):
    def __init__(self, findings: list):
        self.findings = findings
        super().__init__("modified patch fails semantic re-verification")


@dataclass
class ReviewTask:
    case_id: str
    project: str
    priority: float
    gate_trace: dict
    draft_patch: Optional[dict]
    impact_evidence: list
    created_at: float
    status: str = "pending"
    decision: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "project": self.project,
            "priority": self.priority,
            "gate_trace": self.gate_trace,
            "draft_patch": self.draft_patch,
            "impact_evidence": self.impact_evidence,
            "created_at": self.created_at,
            "status": self.status,
            "decision": self.decision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewTask":
        return cls(**data)


@dataclass
class ScriptedReviewer:
    """Deterministic stand-in for a human; drives scenario replays."""

    verdict: str = "accept"
    latency: float = 600.0
    reviewer: str = "scripted"
    per_case: dict = field(default_factory=dict)
    per_project: dict = field(default_factory=dict)

    def decide(self, case: CalibrationCase) -> dict:
        choice = dict(self.per_project.get(case.project, {}))
        choice.update(self.per_case.get(case.case_id, {}))
        return {
            "verdict": choice.get("verdict", self.verdict),
            "latency": choice.get("latency", self.latency),
            "reviewer": choice.get("reviewer", self.reviewer),
            "modified_units": choice.get("modified_units"),
        }


class Engine:
    def __init__(
        self,
        policy: Optional[PolicyConfig] = None,
        clock_start: float = 0.0,
        reviewer: Optional[ScriptedReviewer] = None,
    ) -> None:
        self._lock = threading.RLock()
        self.store = GraphStore()
        self.cases = CaseStore()
        self.learning = LearningLoop(
            policy=policy, clock_start=clock_start, known_cases=self.cases.has
        )
        self.clock = clock_start
        self.reviewer = reviewer
        self.events: dict[str, CanonicalEvent] = {}
        self.reports: dict[str, ImpactReport] = {}
        self.advisories: dict[str, dict] = {}
        self.review_tasks: dict[str, ReviewTask] = {}
        self.profiles: dict[str, ValidationProfile] = {}
        self.default_profile = ValidationProfile()
        self.policy_versions: list[int] = [self.policy.version]

    @property
    def policy(self) -> PolicyConfig:
        return self.learning.policy

    def _note_policy_version(self) -> None:
        if self.policy.version != self.policy_versions[-1]:
            self.policy_versions.append(self.policy.version)

    def profile_for(self, project_key: str) -> ValidationProfile:
        return self.profiles.get(project_key, self.default_profile)

    # ---- ingest + pipeline -------------------------------------------------

    def ingest_record(self, raw: dict, observed_at: Optional[float] = None) -> tuple:
        """Returns (event, created). Identical content is idempotent."""
        with self._lock:
            at = observed_at if observed_at is not None else self.clock
            event = normalize_event(raw, observed_at=at)
            if event.event_id in self.events:
                return self.events[event.event_id], False
            apply_event(self.store, event)
            self.events[event.event_id] = event
            return event, True

    def submit_event(self, raw: dict, observed_at: Optional[float] = None) -> dict:
        """Ingest plus synchronous impact analysis and case processing."""
        with self._lock:
            event, created = self.ingest_record(raw, observed_at)
            if not created:
                return {
                    "event_id": event.event_id,
                    "created": False,
                    "report_ref": f"/reports/{event.event_id}",
                    "archived_advisory": event.event_id in self.advisories,
                }
            self.process_event(event)
            return {
                "event_id": event.event_id,
                "created": True,
                "report_ref": f"/reports/{event.event_id}",
                "archived_advisory": event.event_id in self.advisories,
            }

    def process_event(self, event: CanonicalEvent) -> Optional[ImpactReport]:
        with self._lock:
            self.clock = max(self.clock, event.observed_at)
            try:
                report = analyze(event, self.store, self.policy)
            except NoRootFound as exc:
                self.advisories[event.event_id] = {
                    "event_id": event.event_id,
                    "reason": str(exc),
                    "archived_at": self.clock,
                }
                return None
            self.reports[event.event_id] = report
            for item in report.items:
                self._open_case(event, item)
            self.store.refresh_propagation_risks(self.learning)
            self.learning.advance_clock(self.clock)
            self._note_policy_version()
            return report

    def _open_case(self, event: CanonicalEvent, item) -> CalibrationCase:
        policy = self.policy
        ctx = build_context(event, item, self.store)
        breakdown = score_breakdown(ctx, self.store, policy, self.learning)
        trace = classify(ctx, breakdown, policy)

        case_id = content_hash([event.event_id, str(item.project)], prefix="case-")
        closure = transitive_closure(
            self.store, item.project, policy.d_max, materialize_at=event.observed_at
        )
        try:
            plan_ = build_plan(ctx, trace, self.store, closure=closure, case_id=case_id)
        except PlanInfeasible:
            trace = escalate_past_gate2(ctx, policy)
            plan_ = build_plan(ctx, trace, self.store, closure=closure, case_id=case_id)

        case = CalibrationCase(
            case_id=case_id,
            event_id=event.event_id,
            event_type=event.event_type.value,
            project=str(item.project),
            created_at=event.observed_at,
            observed_at=event.observed_at,
            impact_item=item.to_dict(),
            breakdown=breakdown,
            gate_trace=trace,
            plan=plan_,
        )
        self.cases.add(case)
        self._drive_case(case)
        return case

    def _exposed_surface(self, project_key: str) -> set:
        project = NodeId.parse(project_key)
        return {
            self.store.node(e.dst).signature
            for e in self.store.out_edges(project, EdgeKind.EXPOSES)
        }

    def _drive_case(self, case: CalibrationCase) -> None:
        action = case.gate_trace.action_type
        if action is ActionType.TYPE4:
            self._finalize(case, None, None, None, now=case.created_at)
            return

        patch = generate(case.plan)
        verify_semantic_preservation(patch, self._exposed_surface(case.project))
        case.patch = patch

        if action is ActionType.TYPE3 or not patch.verified:
            self._enqueue_review(case)
            return

        profile = self.profile_for(NodeId.parse(case.project).key)
        outcome = run_validation(patch, profile)
        rollback = decide_rollback(outcome, patch, self.policy)
        finished_at = case.created_at + outcome.total_duration

        if action is ActionType.TYPE2 and rollback.mode != "none":
            case.validation_outcome = outcome.to_dict()
            case.rollback = rollback.to_dict()
            case.escalated = True
            self._enqueue_review(case, at=finished_at)
            return

        self._finalize(case, outcome, rollback, None, now=finished_at)

    def _enqueue_review(self, case: CalibrationCase, at: Optional[float] = None) -> None:
        created = at if at is not None else case.created_at
        case.status = CaseStatus.AWAITING_REVIEW
        task = ReviewTask(
            case_id=case.case_id,
            project=case.project,
            priority=case.impact_item["priority"],
            gate_trace=case.gate_trace.to_dict(),
            draft_patch=case.patch.to_dict() if case.patch else None,
            impact_evidence=case.impact_item["evidence_paths"],
            created_at=created,
        )
        self.review_tasks[case.case_id] = task
        if self.reviewer is not None:
            choice = self.reviewer.decide(case)
            self.submit_review_decision(
                case.case_id,
                verdict=choice["verdict"],
                reviewer=choice["reviewer"],
                modified_units=choice.get("modified_units"),
                decided_at=created + choice["latency"],
            )

    def review_queue(
        self,
        include_decided: bool = False,
        project: Optional[str] = None,
        event_id: Optional[str] = None,
    ) -> list:
        tasks = list(self.review_tasks.values())
        if not include_decided:
            tasks = [t for t in tasks if t.status == "pending"]
        if project:
            tasks = [t for t in tasks if t.project == project]
        if event_id:
            tasks = [t for t in tasks if self.cases.get(t.case_id).event_id == event_id]
        tasks.sort(key=lambda t: (-t.priority, t.created_at, t.case_id))
        return tasks

    def submit_review_decision(
        self,
        case_id: str,
        verdict: str,
        reviewer: str,
        modified_units: Optional[list] = None,
        decided_at: Optional[float] = None,
    ) -> ReviewTask:
        with self._lock:
            task = self.review_tasks.get(case_id)
            if task is None:
                raise UnknownCase(case_id)
            if task.status != "pending":
                raise AlreadyDecided(case_id)
            case = self.cases.get(case_id)
            at = decided_at if decided_at is not None else max(self.clock, task.created_at)

            if verdict == "modify":
                case.patch = self._apply_modification(case, modified_units)

            decision = ReviewDecision(
                verdict=verdict,
                reviewer=reviewer,
                decided_at=at,
                modified_units=modified_units,
            )
            decision.validate()
            task.status = "decided"
            task.decision = {
                "verdict": verdict,
                "reviewer": reviewer,
                "decided_at": at,
                "modified_units": modified_units,
                "approval_latency": max(0.0, at - task.created_at),
            }
            self._resume_reviewed_case(case, decision)
            self._note_policy_version()
            return task

    def _apply_modification(self, case: CalibrationCase, modified_units: Optional[list]) -> Patch:
        if not modified_units:
            raise ModifyFailsVerification(
                [{"kind": "empty_delta", "detail": "modify carries no unit delta"}]
            )
        keep: dict[str, AtomicUnit] = {u.unit_id: u for u in case.patch.units}
        for delta in modified_units:
            uid = delta.get("unit_id")
            if uid not in keep:
                raise ModifyFailsVerification(
                    [{"kind": "unknown_unit", "detail": f"no unit {uid!r} in draft patch"}]
                )
            if delta.get("drop"):
                dropped = {uid}
                # dropping a unit drops everything that depends on it
                changed = True
                while changed:
                    changed = False
                    for u in list(keep.values()):
                        if u.unit_id not in dropped and u.depends_on_units & dropped:
                            dropped.add(u.unit_id)
                            changed = True
                for d in dropped:
                    keep.pop(d, None)
            elif "target" in delta:
                unit = keep[uid]
                keep[uid] = AtomicUnit(
                    unit_id=unit.unit_id,
                    kind=unit.kind,
                    target=delta["target"],
                    pre_signatures=unit.pre_signatures,
                    post_signatures=unit.post_signatures,
                    depends_on_units=unit.depends_on_units,
                    metadata=unit.metadata,
                )
        units = [u for u in case.patch.units if u.unit_id in keep]
        units = [keep[u.unit_id] for u in units]
        if not units:
            raise ModifyFailsVerification(
                [{"kind": "empty_patch", "detail": "modification drops every unit"}]
            )
        candidate = Patch(
            patch_id=content_hash([case.patch.patch_id] + sorted(keep), prefix="patch-"),
            case_id=case.case_id,
            units=units,
        )
        verify_semantic_preservation(candidate, self._exposed_surface(case.project))
        if not candidate.verified:
            raise ModifyFailsVerification(candidate.verification_findings)
        return candidate

    def _resume_reviewed_case(self, case: CalibrationCase, decision: ReviewDecision) -> None:
        if decision.verdict == "reject":
            outcome = (
                ValidationOutcome.from_dict(case.validation_outcome)
                if case.validation_outcome
                else None
            )
            rollback = self._stored_rollback(case)
            self._finalize(case, outcome, rollback, decision, now=decision.decided_at)
            return

        if case.validation_outcome is not None:
            # post-validation escalation: outcome already known, reviewer signs off
            outcome = ValidationOutcome.from_dict(case.validation_outcome)
            rollback = self._stored_rollback(case)
            self._finalize(case, outcome, rollback, decision, now=decision.decided_at)
            return

        profile = self.profile_for(NodeId.parse(case.project).key)
        outcome = run_validation(case.patch, profile, force=True)
        rollback = decide_rollback(outcome, case.patch, self.policy)
        finished_at = decision.decided_at + outcome.total_duration
        self._finalize(case, outcome, rollback, decision, now=finished_at)

    def _stored_rollback(self, case: CalibrationCase) -> Optional[RollbackDecision]:
        if not case.rollback:
            return None
        return RollbackDecision(
            mode=case.rollback["mode"],
            reverted_units=set(case.rollback["reverted_units"]),
            rationale=case.rollback["rationale"],
        )

    def _finalize(
        self,
        case: CalibrationCase,
        outcome: Optional[ValidationOutcome],
        rollback: Optional[RollbackDecision],
        review: Optional[ReviewDecision],
        now: float,
    ) -> None:
        disposition, signals = finalize_case(case, outcome, rollback, review, now)
        self.clock = max(self.clock, now)

        event = self.events[case.event_id]
        item = case.impact_item
        record = CaseRecord(
            case_id=case.case_id,
            event_type=case.event_type,
            project=case.project,
            project_class=self._project_class(case.project),
            strategy=case.plan.strategy.value,
            action_type=case.gate_trace.action_type.value,
            severity=event.severity,
            urgency=self._urgency_of(event),
            risk_components=case.breakdown.risk_components,
            confidence_components=case.breakdown.confidence_components,
            tau_p=item["test_adequacy"],
            units=[(u.unit_id, u.kind.value) for u in (case.patch.units if case.patch else [])],
            reverted_units=sorted(rollback.reverted_units) if rollback else [],
            disposition=disposition.value,
            observed_at=case.observed_at,
            disposition_time=now,
            policy_version=case.gate_trace.thresholds_used,
            review_latency=(
                max(0.0, review.decided_at - case.created_at) if review else None
            ),
            human_verdict=review.verdict if review else None,
        )
        self.learning.on_case_finalized(record, signals, now)
        self._note_edge_outcomes(case, record)
        self._note_policy_version()

    def _project_class(self, project_key: str) -> str:
        node = self.store.node(NodeId.parse(project_key))
        return f"{node.criticality}/{node.language}"

    def _urgency_of(self, event: CanonicalEvent) -> str:
        bands = self.policy.urgency_bands.get(
            event.event_type.value, {"low": 0.3, "high": 0.7}
        )
        if event.severity >= bands["high"]:
            return "immediate"
        if event.severity >= bands["low"]:
            return "scheduled"
        return "advisory"

    def _note_edge_outcomes(self, case: CalibrationCase, record: CaseRecord) -> None:
        event = self.events[case.event_id]
        project = NodeId.parse(case.project)
        failed = record.rolled_back
        for pkg in sorted(event_source_packages(self.store, event)):
            edge = self.store.get_edge(
                EdgeKind.DEPENDS_ON, project, NodeId.parse(f"package:{pkg}")
            )
            if edge is not None:
                self.learning.note_edge_outcome(edge.ident, failed)

    # ---- views ---------------------------------------------------------------

    def metrics(self) -> dict:
        cases = self.cases.all()
        finalized = [c for c in cases if c.disposition is not None]
        dispositions: dict[str, int] = {}
        gate_types: dict[str, int] = {}
        for c in finalized:
            dispositions[c.disposition.value] = dispositions.get(c.disposition.value, 0) + 1
            gate_types[c.action_type] = gate_types.get(c.action_type, 0) + 1

        merged = [
            c
            for c in finalized
            if c.disposition in (Disposition.MERGED_AUTO, Disposition.MERGED_AFTER_REVIEW)
        ]
        mtr_by_event: dict[str, float] = {}
        for event_id in sorted({c.event_id for c in merged}):
            values = [
                c.disposition_time - c.observed_at for c in merged if c.event_id == event_id
            ]
            mtr_by_event[event_id] = sum(values) / len(values)
        overall_mtr = (
            sum(c.disposition_time - c.observed_at for c in merged) / len(merged)
            if merged
            else None
        )
        rollbacks = sum(
            1 for c in finalized if c.rollback and c.rollback.get("reverted_units")
        )
        return {
            "cases_total": len(finalized),
            "dispositions": dispositions,
            "gate_type_histogram": gate_types,
            "mtr_seconds": overall_mtr,
            "mtr_by_event": mtr_by_event,
            "automation_rate": (
                dispositions.get("merged_auto", 0) / len(finalized) if finalized else None
            ),
            "rollback_frequency": rollbacks / len(finalized) if finalized else None,
            "pending_reviews": sum(
                1 for t in self.review_tasks.values() if t.status == "pending"
            ),
            "policy_versions": list(self.policy_versions),
            "clock": self.clock,
        }

    # ---- persistence ----------------------------------------------------------

    def save(self, data_dir: Optional[str] = None) -> Path:
        root = Path(data_dir or os.environ.get(DATA_DIR_ENV, ".depcal"))
        root.mkdir(parents=True, exist_ok=True)
        (root / "graph.json").write_bytes(self.store.snapshot())
        state = {
            "clock": self.clock,
            "events": [e.to_dict() for e in self.events.values()],
            "reports": {eid: r.to_dict() for eid, r in sorted(self.reports.items())},
            "advisories": dict(sorted(self.advisories.items())),
            "review_tasks": [
                t.to_dict() for _, t in sorted(self.review_tasks.items())
            ],
            "profiles": {k: p.to_dict() for k, p in sorted(self.profiles.items())},
            "default_profile": self.default_profile.to_dict(),
            "policy_versions": list(self.policy_versions),
            "cases": self.cases.to_dict(),
            "learning": self.learning.to_dict(),
        }
        (root / "state.json").write_text(
            json.dumps(state, indent=2, sort_keys=True), encoding="utf-8"
        )
        return root

    @classmethod
    def load(cls, data_dir: Optional[str] = None) -> "Engine":
        root = Path(data_dir or os.environ.get(DATA_DIR_ENV, ".depcal"))
        engine = cls()
        engine.store = GraphStore.load((root / "graph.json").read_bytes())
        state = json.loads((root / "state.json").read_text(encoding="utf-8"))
        engine.clock = state["clock"]
        engine.events = {
            e["event_id"]: CanonicalEvent.from_dict(e) for e in state["events"]
        }
        engine.cases = CaseStore.from_dict(state["cases"])
        engine.learning = LearningLoop.from_dict(
            state["learning"], known_cases=engine.cases.has
        )
        engine.advisories = dict(state["advisories"])
        engine.review_tasks = {
            t["case_id"]: ReviewTask.from_dict(t) for t in state["review_tasks"]
        }
        engine.profiles = {
            k: ValidationProfile.from_dict(p) for k, p in state["profiles"].items()
        }
        engine.default_profile = ValidationProfile.from_dict(state["default_profile"])
        engine.policy_versions = list(state["policy_versions"])
        engine.reports = {}
        for event_id, rep in state["reports"].items():
            engine.reports[event_id] = _report_from_dict(rep)
        return engine


def _report_from_dict(data: dict) -> ImpactReport:
    from .impact import ImpactItem

    items = []
    for entry in data["items"]:
        items.append(
            ImpactItem(
                project=NodeId.parse(entry["project"]),
                impact_score=entry["impact_score"],
                depth=entry["depth"],
                test_adequacy=entry["test_adequacy"],
                remediation_cost=entry["remediation_cost"],
                priority=entry["priority"],
                evidence_paths=[
                    [NodeId.parse(n) for n in path] for path in entry["evidence_paths"]
                ],
            )
        )
    return ImpactReport(
        event_id=data["event_id"],
        items=items,
        root_nodes=[NodeId.parse(n) for n in data["root_nodes"]],
        config_version=data["config_version"],
        truncated=data["truncated"],
    )
