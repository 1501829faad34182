"""Typed knowledge graph of the software ecosystem.

Five node kinds (project, package, CVE, API, test) and six edge kinds, with
schema enforcement on every upsert, computed attributes (impact radius,
propagation risk, remediation cost), age-based decay, and a checksummed JSON
snapshot format.

Propagation semantics: the downstream successors of a package are everything
that depends on it (reverse DEPENDS_ON), and the downstream successors of a
project are the projects consuming any API it exposes. An API node's
successors are its consumers. This composed relation is what impact analysis
traverses.

Concurrency: single writer, many readers. All mutations go through
``GraphStore.writer()`` which serializes them and bumps the published
version; reads never observe a half-applied batch.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Iterable, Optional

from .util import canonical_json, crc32c, parse_semver

SNAPSHOT_SCHEMA_VERSION = 1

CRITICALITY_LEVELS = ("critical", "high", "medium", "low")
SEVERITY_CLASSES = ("low", "medium", "high", "critical")


class GraphError(Exception):
    pass


class InvalidAttribute(GraphError):
    pass


class EndpointMissing(GraphError):
    pass


class SchemaViolation(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class CorruptSnapshot(GraphError):
    pass


class NodeKind(str, Enum):
    PROJECT = "project"
    PACKAGE = "package"
    CVE = "cve"
    API = "api"
    TEST = "test"


class EdgeKind(str, Enum):
    DEPENDS_ON = "depends_on"
    EXPOSES = "exposes"
    CONSUMES = "consumes"
    AFFECTS = "affects"
    TESTS = "tests"
    TRANS_DEPENDS = "trans_depends"


# legal (src kind, dst kind) pairs per edge kind
_EDGE_SCHEMA = {
    EdgeKind.DEPENDS_ON: {(NodeKind.PROJECT, NodeKind.PACKAGE), (NodeKind.PACKAGE, NodeKind.PACKAGE)},
    EdgeKind.EXPOSES: {(NodeKind.PROJECT, NodeKind.API)},
    EdgeKind.CONSUMES: {(NodeKind.PROJECT, NodeKind.API)},
    EdgeKind.AFFECTS: {(NodeKind.CVE, NodeKind.PACKAGE)},
    EdgeKind.TESTS: {(NodeKind.TEST, NodeKind.PROJECT)},
    EdgeKind.TRANS_DEPENDS: {(NodeKind.PROJECT, NodeKind.PACKAGE)},
}


@dataclass(frozen=True, order=True)
class NodeId:
    kind: NodeKind
    key: str

    def __post_init__(self):
        if not self.key:
            raise InvalidAttribute("node key must be non-empty")

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.key}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        kind, _, key = text.partition(":")
        return cls(NodeKind(kind), key)


def _check_fraction(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise InvalidAttribute(f"{name}={value} outside [0, 1]")


@dataclass
class ProjectNode:
    repo_id: str
    language: str = "python"
    criticality: str = "medium"
    coverage: float = 0.0
    security_critical: bool = False
    computed_remediation_cost: float = 0.0
    computed_impact_radius: float = 0.0

    kind = NodeKind.PROJECT

    def validate(self) -> None:
        if not self.repo_id:
            raise InvalidAttribute("repo_id must be non-empty")
        if self.criticality not in CRITICALITY_LEVELS:
            raise InvalidAttribute(f"unknown criticality {self.criticality!r}")
        _check_fraction("coverage", self.coverage)
        _check_fraction("computed_remediation_cost", self.computed_remediation_cost)
        if self.computed_impact_radius < 0:
            raise InvalidAttribute("computed_impact_radius must be >= 0")

    @property
    def key(self) -> str:
        return self.repo_id


@dataclass
class PackageNode:
    pkg_id: str
    version: str = "0.1.0"
    ecosystem: str = "pip"
    released_at: float = 0.0

    kind = NodeKind.PACKAGE

    def validate(self) -> None:
        if not self.pkg_id:
            raise InvalidAttribute("pkg_id must be non-empty")
        try:
            parse_semver(self.version)
        except ValueError as exc:
            raise InvalidAttribute(str(exc)) from exc

    @property
    def key(self) -> str:
        return self.pkg_id


def cvss_severity_class(cvss: float) -> str:
    """CVSS v3 banding; scores below 4.0 (including 0.0) map to low."""
    if cvss < 4.0:
        return "low"
    if cvss < 7.0:
        return "medium"
    if cvss < 9.0:
        return "high"
    return "critical"


@dataclass
class CveNode:
    cve_id: str
    cvss: float = 0.0
    severity_class: str = ""
    disclosed_at: float = 0.0

    kind = NodeKind.CVE

    def validate(self) -> None:
        if not self.cve_id:
            raise InvalidAttribute("cve_id must be non-empty")
        if not (0.0 <= self.cvss <= 10.0):
            raise InvalidAttribute(f"cvss={self.cvss} outside [0, 10]")
        derived = cvss_severity_class(self.cvss)
        if not self.severity_class:
            self.severity_class = derived
        elif self.severity_class != derived:
            raise InvalidAttribute(
                f"severity_class {self.severity_class!r} inconsistent with cvss {self.cvss} (expected {derived!r})"
            )

    @property
    def key(self) -> str:
        return self.cve_id


@dataclass
class ApiNode:
    signature: str
    deprecated: bool = False
    usage_frequency: int = 0

    kind = NodeKind.API

    def validate(self) -> None:
        if not self.signature:
            raise InvalidAttribute("signature must be non-empty")
        if self.usage_frequency < 0:
            raise InvalidAttribute("usage_frequency must be >= 0")

    @property
    def key(self) -> str:
        return self.signature

    @property
    def owner_package(self) -> str:
        """Owning package by naming convention: prefix before the first dot."""
        return self.signature.split(".", 1)[0]


@dataclass
class TestNode:
    test_id: str
    scope: str = "unit"
    pass_rate: float = 1.0

    kind = NodeKind.TEST

    def validate(self) -> None:
        if not self.test_id:
            raise InvalidAttribute("test_id must be non-empty")
        _check_fraction("pass_rate", self.pass_rate)

    @property
    def key(self) -> str:
        return self.test_id


Node = ProjectNode | PackageNode | CveNode | ApiNode | TestNode

_NODE_CLASSES = {
    NodeKind.PROJECT: ProjectNode,
    NodeKind.PACKAGE: PackageNode,
    NodeKind.CVE: CveNode,
    NodeKind.API: ApiNode,
    NodeKind.TEST: TestNode,
}


@dataclass
class Edge:
    kind: EdgeKind
    src: NodeId
    dst: NodeId
    depth_class: str = "direct"  # DEPENDS_ON / TRANS_DEPENDS only
    dep_strength: float = 1.0
    coupling: float = 1.0
    exploitability: float = 0.5
    test_coverage: float = 0.0
    propagation_risk: float = 0.5
    last_touched: float = 0.0

    def validate(self) -> None:
        if (self.src.kind, self.dst.kind) not in _EDGE_SCHEMA[self.kind]:
            raise SchemaViolation(
                f"{self.kind.value} edge cannot link {self.src.kind.value} -> {self.dst.kind.value}"
            )
        if self.depth_class not in ("direct", "transitive"):
            raise InvalidAttribute(f"unknown depth_class {self.depth_class!r}")
        for name in ("dep_strength", "coupling", "exploitability", "test_coverage", "propagation_risk"):
            _check_fraction(name, getattr(self, name))

    @property
    def ident(self) -> tuple:
        return (self.kind.value, str(self.src), str(self.dst))


class EdgeHistory:
    """Read interface the store uses to score propagation risk.

    The learning loop implements it; ``edge_counts`` returns
    (failures, calibrations) observed on an edge identity.
    """

    def edge_counts(self, ident: tuple) -> tuple[int, int]:  # pragma: no cover - interface
        return (0, 0)


@dataclass
class RetentionPolicy:
    max_age: float = 180 * 86400.0
    now: float = 0.0

    def __post_init__(self):
        if self.max_age <= 0:
            raise InvalidAttribute("max_age must be > 0")


class GraphStore:
    """Mutable ecosystem graph with serialized writes."""

    # length scale for the remediation cost curve: cost = 1 - exp(-callsites/20),
    # so typical 5-30 callsite migrations land around 0.2-0.8
    REMEDIATION_SCALE = 20.0

    def __init__(self):
        self._nodes: dict[NodeId, Node] = {}
        self._touched: dict[NodeId, float] = {}
        self._edges: dict[tuple, Edge] = {}
        self._out: dict[NodeId, set[tuple]] = {}
        self._in: dict[NodeId, set[tuple]] = {}
        self._lock = threading.RLock()
        self.version = 0

    # -- mutation ----------------------------------------------------------

    def writer(self):
        """Serialized mutation scope; bumps the published version on exit."""
        return _WriteBatch(self)

    def upsert_node(self, node: Node, now: float = 0.0) -> NodeId:
        node.validate()
        node_id = NodeId(node.kind, node.key)
        with self._lock:
            self._nodes[node_id] = node
            self._touched[node_id] = now
            self._out.setdefault(node_id, set())
            self._in.setdefault(node_id, set())
            self.version += 1
        return node_id

    def upsert_edge(self, edge: Edge) -> Edge:
        with self._lock:
            if edge.src not in self._nodes:
                raise EndpointMissing(f"source {edge.src} not in graph")
            if edge.dst not in self._nodes:
                raise EndpointMissing(f"destination {edge.dst} not in graph")
            edge.validate()
            key = (edge.kind, edge.src, edge.dst)
            self._edges[key] = edge
            self._out[edge.src].add(key)
            self._in[edge.dst].add(key)
            self.version += 1
        return edge

    # -- lookups -----------------------------------------------------------

    def node(self, node_id: NodeId) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(str(node_id)) from None

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self._nodes

    def get_edge(self, kind: EdgeKind, src: NodeId, dst: NodeId) -> Optional[Edge]:
        return self._edges.get((kind, src, dst))

    def nodes(self, kind: Optional[NodeKind] = None) -> list[NodeId]:
        ids = [n for n in self._nodes if kind is None or n.kind == kind]
        return sorted(ids)

    def edges(self, kind: Optional[EdgeKind] = None) -> list[Edge]:
        out = [e for (k, _, _), e in self._edges.items() if kind is None or k == kind]
        return sorted(out, key=lambda e: e.ident)

    def out_edges(self, node_id: NodeId, kind: Optional[EdgeKind] = None) -> list[Edge]:
        keys = self._out.get(node_id, set())
        return sorted(
            (self._edges[k] for k in keys if kind is None or k[0] == kind),
            key=lambda e: e.ident,
        )

    def in_edges(self, node_id: NodeId, kind: Optional[EdgeKind] = None) -> list[Edge]:
        keys = self._in.get(node_id, set())
        return sorted(
            (self._edges[k] for k in keys if kind is None or k[0] == kind),
            key=lambda e: e.ident,
        )

    def node_count(self) -> int:
        return len(self._nodes)

    def edge_count(self) -> int:
        return len(self._edges)

    # -- propagation -------------------------------------------------------

    def downstream_neighbors(self, node_id: NodeId) -> list[NodeId]:
        """Direct propagation successors, sorted for determinism.

        package -> its dependents (reverse DEPENDS_ON, projects or packages);
        project -> projects consuming any API it exposes;
        API     -> projects consuming it.
        """
        if node_id not in self._nodes:
            raise UnknownNode(str(node_id))
        successors: set[NodeId] = set()
        if node_id.kind == NodeKind.PACKAGE:
            for edge in self.in_edges(node_id, EdgeKind.DEPENDS_ON):
                successors.add(edge.src)
        elif node_id.kind == NodeKind.PROJECT:
            for exposed in self.out_edges(node_id, EdgeKind.EXPOSES):
                for consume in self.in_edges(exposed.dst, EdgeKind.CONSUMES):
                    if consume.src != node_id:
                        successors.add(consume.src)
        elif node_id.kind == NodeKind.API:
            for consume in self.in_edges(node_id, EdgeKind.CONSUMES):
                successors.add(consume.src)
        return sorted(successors)

    def reachable_downstream(self, roots: Iterable[NodeId]) -> set[NodeId]:
        roots = list(roots)
        seen: set[NodeId] = set(roots)
        frontier = list(roots)
        while frontier:
            nxt: list[NodeId] = []
            for node in frontier:
                for succ in self.downstream_neighbors(node):
                    if succ not in seen:
                        seen.add(succ)
                        nxt.append(succ)
            frontier = nxt
        return seen

    # -- computed attributes -----------------------------------------------

    def compute_impact_radius(self, node_id: NodeId, criticality_weights: dict) -> float:
        """Criticality-weighted count of downstream projects, each once."""
        reachable = self.reachable_downstream([node_id]) - {node_id}
        total = 0.0
        for nid in reachable:
            if nid.kind == NodeKind.PROJECT:
                total += criticality_weights[self._nodes[nid].criticality]
        return total

    def compute_propagation_risk(self, edge: Edge, history: Optional[EdgeHistory] = None) -> float:
        """Laplace-smoothed failure rate on the edge; 0.5 prior when unexercised."""
        failures, calibrations = (0, 0) if history is None else history.edge_counts(edge.ident)
        return (failures + 1) / (calibrations + 2)

    def refresh_propagation_risks(self, history: Optional[EdgeHistory]) -> None:
        with self._lock:
            for edge in self._edges.values():
                edge.propagation_risk = self.compute_propagation_risk(edge, history)
            self.version += 1

    def matched_callsites(self, project: NodeId, source_pkgs: Iterable[str]) -> int:
        """CONSUMES edges from the project to APIs owned by any given package."""
        if project not in self._nodes:
            raise UnknownNode(str(project))
        owners = set(source_pkgs)
        if not owners:
            return 0
        count = 0
        for edge in self.out_edges(project, EdgeKind.CONSUMES):
            api = self._nodes[edge.dst]
            if isinstance(api, ApiNode) and api.owner_package in owners:
                count += 1
        return count

    def compute_remediation_cost(self, project: NodeId, source_pkgs: Iterable[str]) -> float:
        """1 - exp(-callsites/20); a manifest-only calibration counts as one callsite."""
        callsites = max(1, self.matched_callsites(project, source_pkgs))
        return 1.0 - math.exp(-callsites / self.REMEDIATION_SCALE)

    # -- maintenance -------------------------------------------------------

    def decay_and_prune(self, policy: RetentionPolicy) -> dict:
        cutoff = policy.now - policy.max_age
        with self._lock:
            stale = [key for key, edge in self._edges.items() if edge.last_touched < cutoff]
            for key in stale:
                edge = self._edges.pop(key)
                self._out[edge.src].discard(key)
                self._in[edge.dst].discard(key)
            orphans = [
                nid
                for nid in self._nodes
                if nid.kind != NodeKind.PROJECT and not self._out[nid] and not self._in[nid]
            ]
            for nid in orphans:
                del self._nodes[nid]
                del self._touched[nid]
                del self._out[nid]
                del self._in[nid]
            if stale or orphans:
                self.version += 1
        return {"nodes_removed": len(orphans), "edges_removed": len(stale)}

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> bytes:
        body = self._snapshot_body()
        checksum = crc32c(canonical_json(body).encode("utf-8"))
        body["crc32c"] = checksum
        return canonical_json(body).encode("utf-8")

    def _snapshot_body(self) -> dict:
        nodes = []
        for node_id in sorted(self._nodes):
            node = self._nodes[node_id]
            record = {"kind": node_id.kind.value, "key": node_id.key, "last_touched": self._touched[node_id]}
            for f in fields(node):
                record[f.name] = getattr(node, f.name)
            nodes.append(record)
        edges = []
        for _, edge in sorted(self._edges.items(), key=lambda kv: kv[1].ident):
            edges.append(
                {
                    "kind": edge.kind.value,
                    "src": str(edge.src),
                    "dst": str(edge.dst),
                    "depth_class": edge.depth_class,
                    "dep_strength": edge.dep_strength,
                    "coupling": edge.coupling,
                    "exploitability": edge.exploitability,
                    "test_coverage": edge.test_coverage,
                    "propagation_risk": edge.propagation_risk,
                    "last_touched": edge.last_touched,
                }
            )
        return {"schema_version": SNAPSHOT_SCHEMA_VERSION, "nodes": nodes, "edges": edges}

    @classmethod
    def load(cls, data: bytes) -> "GraphStore":
        import json

        try:
            doc = json.loads(data.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise CorruptSnapshot(f"unparseable snapshot: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
            raise CorruptSnapshot("unknown snapshot schema")
        claimed = doc.pop("crc32c", None)
        actual = crc32c(canonical_json(doc).encode("utf-8"))
        if claimed != actual:
            raise CorruptSnapshot(f"checksum mismatch (stored {claimed}, computed {actual})")
        store = cls()
        for record in doc["nodes"]:
            record = dict(record)
            kind = NodeKind(record.pop("kind"))
            record.pop("key")
            touched = record.pop("last_touched")
            node_cls = _NODE_CLASSES[kind]
            store.upsert_node(node_cls(**record), now=touched)
        for record in doc["edges"]:
            record = dict(record)
            store.upsert_edge(
                Edge(
                    kind=EdgeKind(record.pop("kind")),
                    src=NodeId.parse(record.pop("src")),
                    dst=NodeId.parse(record.pop("dst")),
                    **record,
                )
            )
        store.version = 0
        return store


class _WriteBatch:
    def __init__(self, store: GraphStore):
        self._store = store

    def __enter__(self) -> GraphStore:
        self._store._lock.acquire()
        return self._store

    def __exit__(self, exc_type, exc, tb) -> None:
        self._store._lock.release()
