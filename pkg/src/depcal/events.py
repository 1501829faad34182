"""Event ingestion: raw source records -> canonical events -> graph updates.

Raw records are newline-delimited JSON objects tagged with a ``source``
field. Each recognized source maps deterministically onto a canonical event;
the event id is a content hash of the source tag plus that source's stable
fields, so replayed records deduplicate instead of double-processing.

Severity mapping: CVSS/10 for CVE disclosures; version bumps score 0.8
(major) / 0.4 (minor) / 0.2 (patch); API deprecations 0.5; config changes
0.3. Urgency banding on top of severity starts at 0.3/0.7 and is owned by
the policy config, which the learning loop tunes per event type.

This is the only module allowed to create stub nodes: an event whose subject
is missing from the graph upserts a minimal node so impact analysis never
dead-ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .graph import ApiNode, CveNode, Edge, EdgeKind, GraphStore, NodeId, NodeKind, PackageNode, ProjectNode
from .policy import PolicyConfig
from .util import content_hash, semver_delta


class IngestError(Exception):
    pass


class UnrecognizedSource(IngestError):
    pass


class MalformedRecord(IngestError):
    def __init__(self, field_name: str, message: str = ""):
        self.field_name = field_name
        super().__init__(message or f"missing or invalid field: {field_name}")


class EventType(str, Enum):
    PACKAGE_UPDATE = "package_update"
    CVE_DISCLOSURE = "cve_disclosure"
    API_DEPRECATION = "api_deprecation"
    CONFIG_CHANGE = "config_change"


class Urgency(str, Enum):
    IMMEDIATE = "immediate"
    SCHEDULED = "scheduled"
    ADVISORY = "advisory"


_SOURCE_REQUIRED = {
    "cve_feed": ("id", "cvss"),
    "registry_feed": ("pkg", "old", "new"),
    "repo_webhook": ("repo", "change"),
    "api_spec": ("signature",),
}

# fields that participate in the dedupe hash, per source
_SOURCE_STABLE = {
    "cve_feed": ("id", "cvss", "pkg", "affects"),
    "registry_feed": ("pkg", "old", "new"),
    "repo_webhook": ("repo", "change", "path"),
    "api_spec": ("signature", "deprecated"),
}


@dataclass
class CanonicalEvent:
    event_id: str
    event_type: EventType
    source_ref: NodeId
    severity: float
    observed_at: float
    payload: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not (0.0 <= self.severity <= 1.0):
            raise MalformedRecord("severity", f"severity {self.severity} outside [0, 1]")
        compatible = {
            EventType.CVE_DISCLOSURE: {NodeKind.CVE},
            EventType.PACKAGE_UPDATE: {NodeKind.PACKAGE},
            EventType.API_DEPRECATION: {NodeKind.API},
            EventType.CONFIG_CHANGE: {NodeKind.PACKAGE, NodeKind.PROJECT},
        }[self.event_type]
        if self.source_ref.kind not in compatible:
            raise MalformedRecord(
                "source_ref", f"{self.event_type.value} cannot reference a {self.source_ref.kind.value} node"
            )

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "event_type": self.event_type.value,
            "source_ref": str(self.source_ref),
            "severity": self.severity,
            "observed_at": self.observed_at,
            "payload": dict(self.payload),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CanonicalEvent":
        return cls(
            event_id=data["event_id"],
            event_type=EventType(data["event_type"]),
            source_ref=NodeId.parse(data["source_ref"]),
            severity=data["severity"],
            observed_at=data["observed_at"],
            payload=dict(data.get("payload", {})),
        )


@dataclass(frozen=True)
class EventClassification:
    event_type: EventType
    severity: float
    urgency: Urgency


def severity_of(event_type: EventType, payload: dict) -> float:
    if event_type == EventType.CVE_DISCLOSURE:
        if "cvss" not in payload:
            raise MalformedRecord("cvss")
        cvss = float(payload["cvss"])
        if not (0.0 <= cvss <= 10.0):
            raise MalformedRecord("cvss", f"cvss {cvss} outside [0, 10]")
        return cvss / 10.0
    if event_type == EventType.PACKAGE_UPDATE:
        for name in ("old_version", "new_version"):
            if name not in payload:
                raise MalformedRecord(name)
        try:
            delta = semver_delta(payload["old_version"], payload["new_version"])
        except ValueError as exc:
            raise MalformedRecord("new_version", str(exc)) from exc
        return {"major": 0.8, "minor": 0.4, "patch": 0.2}[delta]
    if event_type == EventType.API_DEPRECATION:
        return 0.5
    return 0.3  # config_change


def classify_event(event: CanonicalEvent, policy: Optional[PolicyConfig] = None) -> EventClassification:
    """Band severity into urgency; band edges come from policy when given."""
    bands = {"low": 0.3, "high": 0.7}
    if policy is not None:
        bands = policy.urgency_bands.get(event.event_type.value, bands)
    if event.severity >= bands["high"]:
        urgency = Urgency.IMMEDIATE
    elif event.severity >= bands["low"]:
        urgency = Urgency.SCHEDULED
    else:
        urgency = Urgency.ADVISORY
    return EventClassification(event.event_type, event.severity, urgency)


def normalize_event(raw: dict, observed_at: Optional[float] = None) -> CanonicalEvent:
    """Map a source-tagged record onto a canonical event. Pure and replay-stable."""
    source = raw.get("source")
    if source not in _SOURCE_REQUIRED:
        raise UnrecognizedSource(f"unknown source tag: {source!r}")
    for name in _SOURCE_REQUIRED[source]:
        if name not in raw or raw[name] in (None, ""):
            raise MalformedRecord(name)

    stable = {name: raw.get(name) for name in _SOURCE_STABLE[source] if name in raw}
    event_id = content_hash([source, stable], prefix="ev-")
    at = float(observed_at if observed_at is not None else raw.get("observed_at", 0.0))

    if source == "cve_feed":
        affects = list(raw.get("affects") or ([raw["pkg"]] if raw.get("pkg") else []))
        payload: dict[str, Any] = {"cvss": float(raw["cvss"]), "affects": affects}
        for extra in ("exploitability", "security_critical", "fix_backward_compatible", "fix_version"):
            if extra in raw:
                payload[extra] = raw[extra]
        event = CanonicalEvent(
            event_id=event_id,
            event_type=EventType.CVE_DISCLOSURE,
            source_ref=NodeId(NodeKind.CVE, str(raw["id"])),
            severity=severity_of(EventType.CVE_DISCLOSURE, payload),
            observed_at=at,
            payload=payload,
        )
    elif source == "registry_feed":
        payload = {
            "old_version": str(raw["old"]),
            "new_version": str(raw["new"]),
            "ecosystem": raw.get("ecosystem", "pip"),
            "deprecated_apis": list(raw.get("deprecated_apis", [])),
        }
        if "security_critical" in raw:
            payload["security_critical"] = raw["security_critical"]
        event = CanonicalEvent(
            event_id=event_id,
            event_type=EventType.PACKAGE_UPDATE,
            source_ref=NodeId(NodeKind.PACKAGE, str(raw["pkg"])),
            severity=severity_of(EventType.PACKAGE_UPDATE, payload),
            observed_at=at,
            payload=payload,
        )
    elif source == "repo_webhook":
        if raw["change"] != "config":
            raise MalformedRecord("change", f"unsupported webhook change kind: {raw['change']!r}")
        payload = {"path": raw.get("path", "config.yaml")}
        kind = NodeKind.PACKAGE if raw.get("ref_kind") == "package" else NodeKind.PROJECT
        event = CanonicalEvent(
            event_id=event_id,
            event_type=EventType.CONFIG_CHANGE,
            source_ref=NodeId(kind, str(raw["repo"])),
            severity=severity_of(EventType.CONFIG_CHANGE, payload),
            observed_at=at,
            payload=payload,
        )
    else:  # api_spec
        payload = {"deprecated": bool(raw.get("deprecated", True))}
        if "replacement" in raw:
            payload["replacement"] = raw["replacement"]
        event = CanonicalEvent(
            event_id=event_id,
            event_type=EventType.API_DEPRECATION,
            source_ref=NodeId(NodeKind.API, str(raw["signature"])),
            severity=severity_of(EventType.API_DEPRECATION, payload),
            observed_at=at,
            payload=payload,
        )
    event.validate()
    return event


def apply_event(store: GraphStore, event: CanonicalEvent) -> None:
    """Fold an event into the graph, creating stub nodes where needed."""
    now = event.observed_at
    with store.writer():
        if event.event_type == EventType.CVE_DISCLOSURE:
            cve = CveNode(cve_id=event.source_ref.key, cvss=event.payload["cvss"], disclosed_at=now)
            cve_id = store.upsert_node(cve, now=now)
            for pkg in event.payload.get("affects", []):
                pkg_id = NodeId(NodeKind.PACKAGE, pkg)
                if not store.has_node(pkg_id):
                    store.upsert_node(PackageNode(pkg_id=pkg), now=now)
                store.upsert_edge(
                    Edge(
                        kind=EdgeKind.AFFECTS,
                        src=cve_id,
                        dst=pkg_id,
                        exploitability=float(event.payload.get("exploitability", 0.5)),
                        last_touched=now,
                    )
                )
        elif event.event_type == EventType.PACKAGE_UPDATE:
            existing = store.node(event.source_ref) if store.has_node(event.source_ref) else None
            store.upsert_node(
                PackageNode(
                    pkg_id=event.source_ref.key,
                    version=event.payload["new_version"],
                    ecosystem=existing.ecosystem if existing else event.payload.get("ecosystem", "pip"),
                    released_at=now,
                ),
                now=now,
            )
            for entry in event.payload.get("deprecated_apis", []):
                signature = entry["signature"] if isinstance(entry, dict) else str(entry)
                api_id = NodeId(NodeKind.API, signature)
                prior = store.node(api_id) if store.has_node(api_id) else None
                store.upsert_node(
                    ApiNode(
                        signature=signature,
                        deprecated=True,
                        usage_frequency=prior.usage_frequency if prior else 0,
                    ),
                    now=now,
                )
        elif event.event_type == EventType.API_DEPRECATION:
            api_id = event.source_ref
            prior = store.node(api_id) if store.has_node(api_id) else None
            store.upsert_node(
                ApiNode(
                    signature=api_id.key,
                    deprecated=bool(event.payload.get("deprecated", True)),
                    usage_frequency=prior.usage_frequency if prior else 0,
                ),
                now=now,
            )
        else:  # config_change
            if not store.has_node(event.source_ref):
                if event.source_ref.kind == NodeKind.PROJECT:
                    store.upsert_node(ProjectNode(repo_id=event.source_ref.key), now=now)
                else:
                    store.upsert_node(PackageNode(pkg_id=event.source_ref.key), now=now)
            else:
                store.upsert_node(store.node(event.source_ref), now=now)
