"""Plan and patch construction with semantic-preservation checking.

A classified calibration becomes a plan (strategy row keyed by action type),
then a patch of atomic units in dependency order. Units declare their effect
on the API surface as pre/post signature sets; verification replays the
cumulative set transform and flags any publicly exposed signature that the
patch would remove. Partial rollback reverts a failed unit together with
everything that transitively depends on it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .events import CanonicalEvent, EventType
from .gating import ActionType, CalibrationContext, GateTrace
from .graph import EdgeKind, GraphStore, NodeId, NodeKind
from .impact import affected_api_signatures
from .util import content_hash


class PlanInfeasible(Exception):
    """No automatic transformation can be constructed for this calibration."""


class CyclicUnitDependency(Exception):
    pass


class UnknownUnit(Exception):
    pass


class Strategy(str, Enum):
    DIRECT_COMMIT = "direct_commit"
    TRANSFORM_AND_VALIDATE = "transform_and_validate"
    DRAFT_FOR_REVIEW = "draft_for_review"
    ADVISORY_REPORT = "advisory_report"


STRATEGY_BY_ACTION = {
    ActionType.TYPE1: Strategy.DIRECT_COMMIT,
    ActionType.TYPE2: Strategy.TRANSFORM_AND_VALIDATE,
    ActionType.TYPE3: Strategy.DRAFT_FOR_REVIEW,
    ActionType.TYPE4: Strategy.ADVISORY_REPORT,
}

class UnitKind(str, Enum):
    MANIFEST_BUMP = "manifest_bump"
    CALLSITE_REWRITE = "callsite_rewrite"
    TEST_UPDATE = "test_update"
    CONFIG_CHANGE = "config_change"
    MITIGATION_INSERT = "mitigation_insert"


# ordering tier for the deterministic topological sort
_KIND_TIER = {
    UnitKind.MANIFEST_BUMP: 0,
    UnitKind.CONFIG_CHANGE: 0,
    UnitKind.CALLSITE_REWRITE: 1,
    UnitKind.MITIGATION_INSERT: 1,
    UnitKind.TEST_UPDATE: 2,
}


@dataclass(frozen=True)
class AtomicUnit:
    unit_id: str
    kind: UnitKind
    target: str
    pre_signatures: frozenset
    post_signatures: frozenset
    depends_on_units: frozenset
    metadata: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.kind in (UnitKind.MANIFEST_BUMP, UnitKind.CONFIG_CHANGE):
            if self.pre_signatures != self.post_signatures:
                raise ValueError(f"{self.kind.value} unit must not alter signatures")
        if self.unit_id in self.depends_on_units:
            raise CyclicUnitDependency(f"{self.unit_id} depends on itself")

    def to_dict(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "kind": self.kind.value,
            "target": self.target,
            "pre_signatures": sorted(self.pre_signatures),
            "post_signatures": sorted(self.post_signatures),
            "depends_on_units": sorted(self.depends_on_units),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AtomicUnit":
        return cls(
            unit_id=data["unit_id"],
            kind=UnitKind(data["kind"]),
            target=data["target"],
            pre_signatures=frozenset(data["pre_signatures"]),
            post_signatures=frozenset(data["post_signatures"]),
            depends_on_units=frozenset(data["depends_on_units"]),
            metadata=data.get("metadata", {}),
        )


@dataclass
class CalibrationPlan:
    case_id: str
    project: str
    action_type: ActionType
    strategy: Strategy
    units_planned: list
    requires_human: bool
    advisory_text: str = ""

    def validate(self) -> None:
        if STRATEGY_BY_ACTION[self.action_type] is not self.strategy:
            raise ValueError("strategy does not match action type")
        if self.action_type is ActionType.TYPE4:
            if self.units_planned:
                raise ValueError("advisory plans carry no units")
            if not self.advisory_text:
                raise ValueError("advisory plans need advisory text")

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "project": self.project,
            "action_type": self.action_type.value,
            "strategy": self.strategy.value,
            "units_planned": [u.to_dict() for u in self.units_planned],
            "requires_human": self.requires_human,
            "advisory_text": self.advisory_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationPlan":
        return cls(
            case_id=data["case_id"],
            project=data["project"],
            action_type=ActionType(data["action_type"]),
            strategy=Strategy(data["strategy"]),
            units_planned=[AtomicUnit.from_dict(u) for u in data["units_planned"]],
            requires_human=data["requires_human"],
            advisory_text=data.get("advisory_text", ""),
        )


@dataclass
class Patch:
    patch_id: str
    case_id: str
    units: list
    verified: bool = False
    verification_findings: list = field(default_factory=list)

    def unit(self, unit_id: str) -> AtomicUnit:
        for u in self.units:
            if u.unit_id == unit_id:
                return u
        raise UnknownUnit(unit_id)

    def to_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "case_id": self.case_id,
            "units": [u.to_dict() for u in self.units],
            "verified": self.verified,
            "verification_findings": self.verification_findings,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Patch":
        return cls(
            patch_id=data["patch_id"],
            case_id=data["case_id"],
            units=[AtomicUnit.from_dict(u) for u in data["units"]],
            verified=data["verified"],
            verification_findings=list(data["verification_findings"]),
        )


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in text)


def base_unit_kind(store: GraphStore, event: CanonicalEvent) -> UnitKind:
    """Container-ecosystem changes land in config files, not manifests."""
    if event.event_type == EventType.CONFIG_CHANGE:
        return UnitKind.CONFIG_CHANGE
    for pkg in sorted(event.payload.get("affects", [])):
        node_id = NodeId(NodeKind.PACKAGE, pkg)
        if store.has_node(node_id) and store.node(node_id).ecosystem == "container":
            return UnitKind.CONFIG_CHANGE
    return UnitKind.MANIFEST_BUMP


def plan(
    ctx: CalibrationContext,
    gate_trace: GateTrace,
    store: GraphStore,
    closure: Optional[list] = None,
    case_id: Optional[str] = None,
) -> CalibrationPlan:
    """Unit layout per strategy row; raises PlanInfeasible when Type2 has
    nothing mechanical to do."""
    action = gate_trace.action_type
    project = ctx.item.project
    case_id = case_id or content_hash(
        [ctx.event.event_id, str(project)], prefix="case-"
    )

    if action is ActionType.TYPE4:
        lines = [
            f"Calibration for {project} requires an architectural decision.",
            f"Event {ctx.event.event_id} ({ctx.event.event_type.value}) has no",
            "mechanical transformation path. Options:",
            "  1. migrate to a successor API or package major version",
            "  2. pin the current version and schedule a redesign",
            "  3. accept the risk and monitor",
        ]
        if closure:
            lines.append("Affected dependency closure:")
            lines.extend(f"  {dep.package} (depth {dep.depth})" for dep in closure)
        p = CalibrationPlan(
            case_id=case_id,
            project=str(project),
            action_type=action,
            strategy=Strategy.ADVISORY_REPORT,
            units_planned=[],
            requires_human=True,
            advisory_text="\n".join(lines),
        )
        p.validate()
        return p

    meta = {
        "event_id": ctx.event.event_id,
        "impact_evidence": [[str(n) for n in path] for path in ctx.item.evidence_paths],
        "gate_trace": gate_trace.to_dict(),
    }
    base_kind = base_unit_kind(store, ctx.event)
    base_target = (
        "config/runtime.yaml" if base_kind is UnitKind.CONFIG_CHANGE else "manifest/dependencies.json"
    )
    units: list[AtomicUnit] = []
    base = AtomicUnit(
        unit_id=f"{case_id}:u0-{base_kind.value}",
        kind=base_kind,
        target=base_target,
        pre_signatures=frozenset(),
        post_signatures=frozenset(),
        depends_on_units=frozenset(),
        metadata=meta,
    )
    units.append(base)

    rewrites: list[AtomicUnit] = []
    if action in (ActionType.TYPE2, ActionType.TYPE3):
        replacements = _replacement_map(store, ctx.event)
        affected = sorted(
            {
                store.node(e.dst).signature
                for e in store.out_edges(project, EdgeKind.CONSUMES)
                if store.node(e.dst).signature in set(affected_api_signatures(store, ctx.event))
            }
        )
        for i, sig in enumerate(affected, start=1):
            new_sig = replacements.get(sig)
            rewrites.append(
                AtomicUnit(
                    unit_id=f"{case_id}:u{i}-rewrite-{_slug(sig)}",
                    kind=UnitKind.CALLSITE_REWRITE,
                    target=f"src/callsites/{_slug(sig)}.code",
                    pre_signatures=frozenset({sig}),
                    post_signatures=frozenset({new_sig} if new_sig else set()),
                    depends_on_units=frozenset({base.unit_id}),
                    metadata=meta,
                )
            )
        units.extend(rewrites)

        if action is ActionType.TYPE2 and not rewrites and _needs_code_change(ctx):
            raise PlanInfeasible(
                f"no call sites identified for {project} and the event cannot be"
                " remediated by a manifest change alone"
            )

        if (
            action is ActionType.TYPE3
            and ctx.event.event_type == EventType.CVE_DISCLOSURE
            and ctx.security_flagged
        ):
            units.append(
                AtomicUnit(
                    unit_id=f"{case_id}:u{len(units)}-mitigation",
                    kind=UnitKind.MITIGATION_INSERT,
                    target=f"src/mitigations/{_slug(ctx.event.source_ref.key)}.code",
                    pre_signatures=frozenset(),
                    post_signatures=frozenset(),
                    depends_on_units=frozenset({base.unit_id}),
                    metadata=meta,
                )
            )

        rewrite_ids = frozenset(u.unit_id for u in rewrites) or frozenset({base.unit_id})
        test_edges = store.in_edges(project, EdgeKind.TESTS)
        for j, edge in enumerate(test_edges):
            test_key = edge.src.key
            units.append(
                AtomicUnit(
                    unit_id=f"{case_id}:t{j}-{_slug(test_key)}",
                    kind=UnitKind.TEST_UPDATE,
                    target=f"tests/{_slug(test_key)}.test",
                    pre_signatures=frozenset(),
                    post_signatures=frozenset(),
                    depends_on_units=rewrite_ids,
                    metadata=meta,
                )
            )

    for u in units:
        u.validate()
    p = CalibrationPlan(
        case_id=case_id,
        project=str(project),
        action_type=action,
        strategy=STRATEGY_BY_ACTION[action],
        units_planned=units,
        requires_human=action is ActionType.TYPE3,
    )
    p.validate()
    return p


def _needs_code_change(ctx: CalibrationContext) -> bool:
    if ctx.event.event_type == EventType.API_DEPRECATION:
        return True
    if ctx.event.event_type == EventType.CVE_DISCLOSURE:
        return ctx.event.payload.get("fix_version") is None
    return False


def _replacement_map(store: GraphStore, event: CanonicalEvent) -> dict:
    if event.event_type == EventType.API_DEPRECATION:
        return {event.source_ref.key: event.payload.get("replacement")}
    out = {}
    for entry in event.payload.get("deprecated_apis", []):
        if isinstance(entry, dict):
            out[entry["signature"]] = entry.get("replacement")
        else:
            out[str(entry)] = None
    return out


def generate(plan_: CalibrationPlan, project_api_surface: Iterable[str] = ()) -> Patch:
    """Topologically order the planned units into a patch.

    Order is dependency-first; among ready units the cheaper tier goes first
    (manifests, then code, then tests) with unit_id as the stable tie-break.
    """
    if plan_.action_type is ActionType.TYPE4:
        raise ValueError("advisory plans produce no patch")
    by_id = {u.unit_id: u for u in plan_.units_planned}
    for u in plan_.units_planned:
        unknown = u.depends_on_units - set(by_id)
        if unknown:
            raise UnknownUnit(", ".join(sorted(unknown)))

    indegree = {uid: len(u.depends_on_units) for uid, u in by_id.items()}
    dependents: dict[str, list[str]] = {uid: [] for uid in by_id}
    for u in plan_.units_planned:
        for dep in u.depends_on_units:
            dependents[dep].append(u.unit_id)

    ready = [
        (_KIND_TIER[by_id[uid].kind], uid) for uid, d in indegree.items() if d == 0
    ]
    heapq.heapify(ready)
    ordered = []
    while ready:
        _, uid = heapq.heappop(ready)
        ordered.append(by_id[uid])
        for nxt in dependents[uid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, (_KIND_TIER[by_id[nxt].kind], nxt))
    if len(ordered) != len(by_id):
        stuck = sorted(uid for uid, d in indegree.items() if d > 0)
        raise CyclicUnitDependency(", ".join(stuck))

    patch_id = content_hash([plan_.case_id] + [u.unit_id for u in ordered], prefix="patch-")
    return Patch(patch_id=patch_id, case_id=plan_.case_id, units=ordered)


def verify_semantic_preservation(patch: Patch, exposed_surface: Iterable[str]) -> Patch:
    """Replay the cumulative surface transform and flag removed public names.

    Additions never violate; a signature counts as removed only when it is
    absent from the final surface.
    """
    exposed = set(exposed_surface)
    surface = set(exposed)
    removed_by: dict[str, str] = {}
    for unit in patch.units:
        removed = unit.pre_signatures - unit.post_signatures
        added = unit.post_signatures - unit.pre_signatures
        for sig in removed:
            if sig in surface:
                removed_by[sig] = unit.unit_id
        surface = (surface - removed) | added

    findings = [
        {
            "kind": "public_signature_removed",
            "signature": sig,
            "unit_id": removed_by[sig],
            "detail": f"publicly exposed signature {sig!r} absent after patch",
        }
        for sig in sorted(exposed - surface)
    ]
    patch.verification_findings = findings
    patch.verified = not findings
    return patch


def partial_apply_sets(patch: Patch, failed_units: Iterable[str]) -> dict:
    """Split units into kept and reverted; failure drags its dependents."""
    all_ids = {u.unit_id for u in patch.units}
    failed = set(failed_units)
    unknown = failed - all_ids
    if unknown:
        raise UnknownUnit(", ".join(sorted(unknown)))

    dependents: dict[str, set] = {uid: set() for uid in all_ids}
    for u in patch.units:
        for dep in u.depends_on_units:
            dependents[dep].add(u.unit_id)

    reverted = set(failed)
    frontier = list(failed)
    while frontier:
        uid = frontier.pop()
        for nxt in dependents[uid]:
            if nxt not in reverted:
                reverted.add(nxt)
                frontier.append(nxt)
    return {"applied": all_ids - reverted, "reverted": reverted}
