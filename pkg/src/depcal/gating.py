"""Risk/confidence scoring and the three-gate action classifier.

Risk aggregates six components, confidence four, each a weighted mean under
weights owned by the policy. The classifier is a pure cascade:

  Gate-1  manifest-only, backward-compatible, no code logic  -> Type1
  Gate-2  R < theta_R_low and C > theta_C_high               -> Type2
          R < theta_R_mod and C > theta_C_high and
              tau_p > theta_tau                              -> Type2
  Gate-3  critical project, security flag, or blast > limit  -> Type3
          architectural call or no clear transformation path -> Type4
          otherwise                                          -> Type3

All comparisons are strict; values sitting exactly on a threshold take the
else branch. Per-project overrides can force the Type3 floor or relax the
Gate-2 coverage bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .events import CanonicalEvent, EventType
from .graph import EdgeKind, GraphStore, NodeId, NodeKind
from .impact import ImpactItem, affected_api_signatures, event_source_packages
from .policy import PolicyConfig
from .util import canonical_json


class ActionType(str, Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    TYPE3 = "Type3"
    TYPE4 = "Type4"


class Gate1Result(str, Enum):
    PASSED_TO_TYPE1 = "passed_to_type1"
    FORWARDED = "forwarded"


class Gate2Result(str, Enum):
    TYPE2_LOW_RISK = "type2_low_risk"
    TYPE2_MODERATE_COVERED = "type2_moderate_covered"
    FORWARDED = "forwarded"


class Gate3Result(str, Enum):
    TYPE3_CRITICAL = "type3_critical"
    TYPE4_ADVISORY = "type4_advisory"
    TYPE3_DEFAULT = "type3_default"
    NOT_REACHED = "not_reached"


@dataclass(frozen=True)
class ScoreBreakdown:
    risk_components: tuple
    risk_weights: tuple
    risk: float
    confidence_components: tuple
    confidence_weights: tuple
    confidence: float

    def validate(self) -> None:
        for name, comps, weights, total in (
            ("risk", self.risk_components, self.risk_weights, self.risk),
            ("confidence", self.confidence_components, self.confidence_weights, self.confidence),
        ):
            if len(comps) != len(weights):
                raise ValueError(f"{name}: component/weight arity mismatch")
            for v in comps + weights:
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}: value {v} outside [0, 1]")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError(f"{name}: weights do not sum to 1")
            if abs(sum(w * c for w, c in zip(weights, comps)) - total) > 1e-9:
                raise ValueError(f"{name}: aggregate does not match components")

    def to_dict(self) -> dict:
        return {
            "risk_components": list(self.risk_components),
            "risk_weights": list(self.risk_weights),
            "risk": self.risk,
            "confidence_components": list(self.confidence_components),
            "confidence_weights": list(self.confidence_weights),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreBreakdown":
        return cls(
            risk_components=tuple(data["risk_components"]),
            risk_weights=tuple(data["risk_weights"]),
            risk=data["risk"],
            confidence_components=tuple(data["confidence_components"]),
            confidence_weights=tuple(data["confidence_weights"]),
            confidence=data["confidence"],
        )


@dataclass(frozen=True)
class CalibrationContext:
    event: CanonicalEvent
    item: ImpactItem
    manifest_only: bool
    backward_compatible: bool
    security_flagged: bool
    blast_radius_count: int
    architectural_decision_required: bool
    clear_transformation_path: bool
    project_criticality: str = "medium"

    def validate(self) -> None:
        if self.blast_radius_count < 0:
            raise ValueError("blast_radius_count must be >= 0")


@dataclass(frozen=True)
class GateTrace:
    gate1_result: Gate1Result
    gate2_result: Optional[Gate2Result]
    gate3_result: Gate3Result
    action_type: ActionType
    thresholds_used: int

    def to_dict(self) -> dict:
        return {
            "gate1_result": self.gate1_result.value,
            "gate2_result": self.gate2_result.value if self.gate2_result else None,
            "gate3_result": self.gate3_result.value,
            "action_type": self.action_type.value,
            "thresholds_used": self.thresholds_used,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GateTrace":
        return cls(
            gate1_result=Gate1Result(data["gate1_result"]),
            gate2_result=Gate2Result(data["gate2_result"]) if data.get("gate2_result") else None,
            gate3_result=Gate3Result(data["gate3_result"]),
            action_type=ActionType(data["action_type"]),
            thresholds_used=data["thresholds_used"],
        )

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")


class _NullLearningState:
    """Priors used before any feedback exists."""

    def template_match(self, event_type: str, unit_kind: str) -> float:
        return 0.5

    def template_success_rate(self, event_type: str, unit_kind: str) -> float:
        return 0.3

    def project_rollback_rate(self, project_key: str) -> float:
        return 0.5


NULL_LEARNING_STATE = _NullLearningState()


def affected_consume_edges(store: GraphStore, project: NodeId, event: CanonicalEvent) -> list:
    """CONSUMES edges from the project into APIs this event touches."""
    sigs = set(affected_api_signatures(store, event))
    if not sigs:
        return []
    return [
        edge
        for edge in store.out_edges(project, EdgeKind.CONSUMES)
        if store.node(edge.dst).signature in sigs
    ]


def dominant_unit_kind(ctx: CalibrationContext, store: Optional[GraphStore] = None) -> str:
    """The unit kind a plan for this context would mostly consist of."""
    if ctx.event.event_type == EventType.CONFIG_CHANGE:
        return "config_change"
    if store is not None:
        for pkg in sorted(ctx.event.payload.get("affects", [])):
            pkg_id = NodeId(NodeKind.PACKAGE, pkg)
            if store.has_node(pkg_id) and store.node(pkg_id).ecosystem == "container":
                return "config_change"
    if ctx.manifest_only:
        return "manifest_bump"
    return "callsite_rewrite"


def build_context(
    event: CanonicalEvent, item: ImpactItem, store: GraphStore
) -> CalibrationContext:
    """Derive the gate-relevant facts for one affected project."""
    project_node = store.node(item.project)
    payload = event.payload
    affected_edges = affected_consume_edges(store, item.project, event)

    # only manifest/config files change when no consumed API needs a rewrite
    manifest_only = len(affected_edges) == 0

    if event.event_type == EventType.PACKAGE_UPDATE:
        backward_compatible = bool(payload.get("backward_compatible", True))
    elif event.event_type == EventType.CVE_DISCLOSURE:
        backward_compatible = bool(payload.get("fix_backward_compatible", True))
    else:
        backward_compatible = bool(payload.get("backward_compatible", True))

    security_flagged = bool(project_node.security_critical) or bool(
        payload.get("security_critical", False)
    )

    blast = sum(
        1
        for n in store.reachable_downstream([item.project]) - {item.project}
        if n.kind == NodeKind.PROJECT
    )

    architectural = bool(payload.get("architectural_decision_required", False))

    if "clear_transformation_path" in payload:
        clear_path = bool(payload["clear_transformation_path"])
    elif event.event_type == EventType.API_DEPRECATION and affected_edges:
        clear_path = payload.get("replacement") is not None
    elif event.event_type == EventType.PACKAGE_UPDATE and affected_edges:
        # rewrites are mechanical only when every deprecated API names a successor
        consumed = {store.node(e.dst).signature for e in affected_edges}
        replacements = {
            entry["signature"]: entry.get("replacement")
            for entry in payload.get("deprecated_apis", [])
            if isinstance(entry, dict)
        }
        clear_path = all(replacements.get(sig) is not None for sig in consumed)
    else:
        clear_path = True

    ctx = CalibrationContext(
        event=event,
        item=item,
        manifest_only=manifest_only,
        backward_compatible=backward_compatible,
        security_flagged=security_flagged,
        blast_radius_count=blast,
        architectural_decision_required=architectural,
        clear_transformation_path=clear_path,
        project_criticality=project_node.criticality,
    )
    ctx.validate()
    return ctx


def risk_components(
    ctx: CalibrationContext,
    store: GraphStore,
    policy: PolicyConfig,
    learning=None,
) -> tuple:
    learning = learning or NULL_LEARNING_STATE
    project = ctx.item.project

    callsites = len(affected_consume_edges(store, project, ctx.event))
    tests = len(store.in_edges(project, EdgeKind.TESTS))
    touched_files = 1 + callsites + tests
    r1 = min(1.0, touched_files / 50.0)

    r2 = min(1.0, math.log10(1 + ctx.blast_radius_count) / 2.0)

    if ctx.manifest_only:
        r3 = 0.0
    elif not ctx.backward_compatible:
        r3 = 1.0
    else:
        r3 = 0.5

    r4 = 1.0 - ctx.item.test_adequacy

    r5 = learning.project_rollback_rate(str(project))

    own = policy.criticality_weight(store.node(project).criticality)
    downstream = [
        policy.criticality_weight(store.node(n).criticality)
        for n in store.reachable_downstream([project]) - {project}
        if n.kind == NodeKind.PROJECT
    ]
    r6 = max([own] + downstream)

    return (r1, r2, r3, r4, r5, r6)


def confidence_components(
    ctx: CalibrationContext,
    store: GraphStore,
    policy: PolicyConfig,
    learning=None,
) -> tuple:
    learning = learning or NULL_LEARNING_STATE
    project = ctx.item.project
    kind = dominant_unit_kind(ctx, store)

    c1 = learning.template_match(ctx.event.event_type.value, kind)

    # pre-check warns when the change could touch the project's own public surface
    exposed = {
        store.node(e.dst).signature for e in store.out_edges(project, EdgeKind.EXPOSES)
    }
    affected = set(affected_api_signatures(store, ctx.event))
    c2 = 0.5 if exposed & affected else 1.0

    c3 = ctx.item.test_adequacy

    c4 = learning.template_success_rate(ctx.event.event_type.value, kind)

    return (c1, c2, c3, c4)


def score_breakdown(
    ctx: CalibrationContext,
    store: GraphStore,
    policy: PolicyConfig,
    learning=None,
) -> ScoreBreakdown:
    rc = risk_components(ctx, store, policy, learning)
    cc = confidence_components(ctx, store, policy, learning)
    rw = tuple(policy.risk_weights)
    cw = tuple(policy.confidence_weights)
    breakdown = ScoreBreakdown(
        risk_components=rc,
        risk_weights=rw,
        risk=sum(w * r for w, r in zip(rw, rc)),
        confidence_components=cc,
        confidence_weights=cw,
        confidence=sum(w * c for w, c in zip(cw, cc)),
    )
    breakdown.validate()
    return breakdown


def risk_score(ctx: CalibrationContext, store: GraphStore, policy: PolicyConfig, learning=None) -> float:
    return score_breakdown(ctx, store, policy, learning).risk


def confidence_score(ctx: CalibrationContext, store: GraphStore, policy: PolicyConfig, learning=None) -> float:
    return score_breakdown(ctx, store, policy, learning).confidence


def classify(
    ctx: CalibrationContext, scores: ScoreBreakdown, policy: PolicyConfig
) -> GateTrace:
    scores.validate()
    ctx.validate()
    override = policy.override_for(str(ctx.item.project))
    force_floor = bool(override.get("force_type3", False))
    theta_tau = override.get("relaxed_tau", policy.theta_tau)

    if not force_floor and ctx.manifest_only and ctx.backward_compatible:
        return GateTrace(
            gate1_result=Gate1Result.PASSED_TO_TYPE1,
            gate2_result=None,
            gate3_result=Gate3Result.NOT_REACHED,
            action_type=ActionType.TYPE1,
            thresholds_used=policy.version,
        )

    gate2 = Gate2Result.FORWARDED
    if not force_floor:
        if scores.risk < policy.theta_r_low and scores.confidence > policy.theta_c_high:
            gate2 = Gate2Result.TYPE2_LOW_RISK
        elif (
            scores.risk < policy.theta_r_mod
            and scores.confidence > policy.theta_c_high
            and ctx.item.test_adequacy > theta_tau
        ):
            gate2 = Gate2Result.TYPE2_MODERATE_COVERED
    if gate2 is not Gate2Result.FORWARDED:
        return GateTrace(
            gate1_result=Gate1Result.FORWARDED,
            gate2_result=gate2,
            gate3_result=Gate3Result.NOT_REACHED,
            action_type=ActionType.TYPE2,
            thresholds_used=policy.version,
        )

    return _gate3(ctx, policy)


def escalate_past_gate2(ctx: CalibrationContext, policy: PolicyConfig) -> GateTrace:
    """Reclassify through Gate-3 when a granted Type2 turns out infeasible."""
    return _gate3(ctx, policy)


def _gate3(ctx: CalibrationContext, policy: PolicyConfig) -> GateTrace:
    if (
        ctx.project_criticality == "critical"
        or ctx.security_flagged
        or ctx.blast_radius_count > policy.blast_limit
    ):
        g3 = Gate3Result.TYPE3_CRITICAL
        action = ActionType.TYPE3
    elif ctx.architectural_decision_required or not ctx.clear_transformation_path:
        g3 = Gate3Result.TYPE4_ADVISORY
        action = ActionType.TYPE4
    else:
        g3 = Gate3Result.TYPE3_DEFAULT
        action = ActionType.TYPE3
    return GateTrace(
        gate1_result=Gate1Result.FORWARDED,
        gate2_result=Gate2Result.FORWARDED,
        gate3_result=g3,
        action_type=action,
        thresholds_used=policy.version,
    )
