"""Cross-repository impact analysis.

Two traversals work together. A breadth-first pass from the event's root
nodes discovers the affected set and fixes shortest-path depths (pruned by
the inclusion threshold and the depth cap). The reported score of each
reached project, however, is the exact all-paths value

    score(p) = sum over simple paths pi from any root to p of
               severity * alpha^|pi| * criticality_weight(p)

computed by dynamic programming over path lengths when the reachable
subgraph is acyclic. On cyclic subgraphs, simple paths are enumerated up to
the depth cap and the report is flagged truncated.

Test adequacy is the backward half: a saturating union over the tests
attached to a project, 1 - prod(1 - coverage * pass_rate).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .events import CanonicalEvent, EventType
from .graph import ApiNode, EdgeKind, Edge, GraphStore, NodeId, NodeKind, UnknownNode
from .policy import PolicyConfig

# expansion budget for explicit path enumeration on cyclic subgraphs
_PATH_ENUMERATION_BUDGET = 200_000


class NoRootFound(Exception):
    """The event's subject resolves to nothing that can propagate."""


@dataclass
class ImpactItem:
    project: NodeId
    impact_score: float
    depth: int
    test_adequacy: float
    remediation_cost: float
    priority: float
    evidence_paths: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "project": str(self.project),
            "impact_score": self.impact_score,
            "depth": self.depth,
            "test_adequacy": self.test_adequacy,
            "remediation_cost": self.remediation_cost,
            "priority": self.priority,
            "evidence_paths": [[str(n) for n in path] for path in self.evidence_paths],
        }


@dataclass
class ImpactReport:
    event_id: str
    items: list
    root_nodes: list
    config_version: int
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "root_nodes": [str(n) for n in self.root_nodes],
            "config_version": self.config_version,
            "truncated": self.truncated,
            "items": [item.to_dict() for item in self.items],
        }


@dataclass(frozen=True)
class AnnotatedDependency:
    package: NodeId
    depth: int
    cves: frozenset

    def to_dict(self) -> dict:
        return {
            "package": str(self.package),
            "depth": self.depth,
            "cves": sorted(str(c) for c in self.cves),
        }


def event_source_packages(store: GraphStore, event: CanonicalEvent) -> set[str]:
    """Package ids whose APIs count as affected call-site targets for this event."""
    if event.event_type == EventType.CVE_DISCLOSURE:
        return set(event.payload.get("affects", []))
    if event.event_type == EventType.PACKAGE_UPDATE:
        return {event.source_ref.key}
    if event.event_type == EventType.API_DEPRECATION:
        node = store.node(event.source_ref) if store.has_node(event.source_ref) else None
        return {node.owner_package} if isinstance(node, ApiNode) else set()
    return set()


def affected_api_signatures(store: GraphStore, event: CanonicalEvent) -> list[str]:
    """API signatures a project must migrate away from for this event."""
    if event.event_type == EventType.API_DEPRECATION:
        return [event.source_ref.key]
    if event.event_type == EventType.PACKAGE_UPDATE:
        out = []
        for entry in event.payload.get("deprecated_apis", []):
            out.append(entry["signature"] if isinstance(entry, dict) else str(entry))
        return sorted(out)
    if event.event_type == EventType.CVE_DISCLOSURE:
        owners = set(event.payload.get("affects", []))
        sigs = [
            store.node(api_id).signature
            for api_id in store.nodes(NodeKind.API)
            if store.node(api_id).owner_package in owners
        ]
        return sorted(sigs)
    return []


def identify_root_nodes(store: GraphStore, event: CanonicalEvent) -> list[NodeId]:
    if event.event_type == EventType.CVE_DISCLOSURE:
        if not store.has_node(event.source_ref):
            raise NoRootFound(f"CVE {event.source_ref} not in graph")
        roots = sorted(edge.dst for edge in store.out_edges(event.source_ref, EdgeKind.AFFECTS))
        if not roots:
            raise NoRootFound(f"CVE {event.source_ref} affects no known package")
        return roots
    if event.event_type in (EventType.PACKAGE_UPDATE, EventType.CONFIG_CHANGE):
        if not store.has_node(event.source_ref):
            raise NoRootFound(f"{event.source_ref} not in graph")
        return [event.source_ref]
    # api_deprecation: the API itself propagates to consumers, and the owning
    # package (when modeled) propagates to its dependents
    if not store.has_node(event.source_ref):
        raise NoRootFound(f"{event.source_ref} not in graph")
    roots = [event.source_ref]
    api = store.node(event.source_ref)
    owner = NodeId(NodeKind.PACKAGE, api.owner_package)
    if store.has_node(owner):
        roots.append(owner)
    return sorted(roots)


def test_adequacy(store: GraphStore, project: NodeId) -> float:
    if not store.has_node(project):
        raise UnknownNode(str(project))
    remaining = 1.0
    for edge in store.in_edges(project, EdgeKind.TESTS):
        test = store.node(edge.src)
        remaining *= 1.0 - edge.test_coverage * test.pass_rate
    return 1.0 - remaining


def blast_radius(store: GraphStore, project: NodeId) -> int:
    """Transitive count of downstream dependent projects."""
    reachable = store.reachable_downstream([project]) - {project}
    return sum(1 for n in reachable if n.kind == NodeKind.PROJECT)


def _reachable_subgraph(store: GraphStore, roots: list[NodeId]) -> dict[NodeId, list[NodeId]]:
    adjacency: dict[NodeId, list[NodeId]] = {}
    frontier = list(dict.fromkeys(roots))
    seen = set(frontier)
    while frontier:
        nxt = []
        for node in frontier:
            succ = store.downstream_neighbors(node)
            adjacency[node] = succ
            for s in succ:
                if s not in seen:
                    seen.add(s)
                    nxt.append(s)
        frontier = nxt
    return adjacency


def _is_acyclic(adjacency: dict[NodeId, list[NodeId]]) -> Optional[list[NodeId]]:
    """Kahn's algorithm; returns a topological order, or None when cyclic."""
    indegree = {n: 0 for n in adjacency}
    for succs in adjacency.values():
        for s in succs:
            indegree[s] = indegree.get(s, 0) + 1
    queue = deque(sorted(n for n, d in indegree.items() if d == 0))
    order = []
    while queue:
        node = queue.popleft()
        order.append(node)
        for s in adjacency.get(node, []):
            indegree[s] -= 1
            if indegree[s] == 0:
                queue.append(s)
    return order if len(order) == len(indegree) else None


def _path_length_counts(
    adjacency: dict, roots: list[NodeId], order: list[NodeId], cap: Optional[int]
) -> dict[NodeId, dict[int, int]]:
    counts: dict[NodeId, dict[int, int]] = {n: {} for n in order}
    for root in roots:
        counts[root][0] = counts[root].get(0, 0) + 1
    for node in order:
        for succ in adjacency.get(node, []):
            for length, count in counts[node].items():
                if cap is not None and length + 1 > cap:
                    continue
                counts[succ][length + 1] = counts[succ].get(length + 1, 0) + count
    return counts


def _enumerate_simple_paths(
    adjacency: dict, roots: list[NodeId], target: NodeId, max_len: int
) -> dict[int, int]:
    """Count simple root->target paths by length, capped at max_len hops."""
    counts: dict[int, int] = {}
    budget = _PATH_ENUMERATION_BUDGET

    def walk(node: NodeId, length: int, on_path: set) -> None:
        nonlocal budget
        if budget <= 0:
            return
        budget -= 1
        if node == target:
            counts[length] = counts.get(length, 0) + 1
        if length == max_len:
            return
        for succ in adjacency.get(node, []):
            if succ not in on_path:
                on_path.add(succ)
                walk(succ, length + 1, on_path)
                on_path.discard(succ)

    for root in dict.fromkeys(roots):
        walk(root, 0, {root})
    return counts


def impact_score_exact(
    store: GraphStore,
    roots: Iterable[NodeId],
    project: NodeId,
    severity: float,
    alpha: float,
    policy: Optional[PolicyConfig] = None,
    d_max: Optional[int] = None,
) -> float:
    score, _ = _impact_score_exact(store, list(roots), project, severity, alpha, policy, d_max)
    return score


def _impact_score_exact(
    store: GraphStore,
    roots: list[NodeId],
    project: NodeId,
    severity: float,
    alpha: float,
    policy: Optional[PolicyConfig],
    d_max: Optional[int],
) -> tuple[float, bool]:
    policy = policy or PolicyConfig()
    cap = d_max if d_max is not None else policy.d_max
    adjacency = _reachable_subgraph(store, roots)
    crit_weight = policy.criticality_weight(store.node(project).criticality)

    order = _is_acyclic(adjacency)
    if order is not None:
        counts = _path_length_counts(adjacency, roots, order, cap=None)
        per_length = counts.get(project, {})
        truncated = False
    else:
        per_length = _enumerate_simple_paths(adjacency, roots, project, max_len=cap)
        truncated = True

    total = sum(count * alpha**length for length, count in per_length.items())
    return severity * crit_weight * total, truncated


def contributing_paths(
    store: GraphStore, roots: list[NodeId], target: NodeId, max_len: int, limit: int = 5
) -> list[list[NodeId]]:
    """Up to `limit` shortest simple paths from any root to the target."""
    found: list[list[NodeId]] = []
    queue = deque([root] for root in dict.fromkeys(roots))
    expansions = 0
    while queue and len(found) < limit and expansions < _PATH_ENUMERATION_BUDGET:
        path = queue.popleft()
        expansions += 1
        node = path[-1]
        if node == target:
            found.append(path)
            continue
        if len(path) - 1 >= max_len:
            continue
        for succ in store.downstream_neighbors(node):
            if succ not in path:
                queue.append(path + [succ])
    return found


def analyze(
    event: CanonicalEvent,
    store: GraphStore,
    policy: Optional[PolicyConfig] = None,
    theta: Optional[float] = None,
) -> ImpactReport:
    """Breadth-first discovery plus exact all-paths scoring; see module docstring."""
    policy = policy or PolicyConfig()
    threshold = policy.theta if theta is None else theta
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    roots = identify_root_nodes(store, event)

    depth: dict[NodeId, int] = {r: 0 for r in roots}
    reached_projects: dict[NodeId, int] = {r: 0 for r in roots if r.kind == NodeKind.PROJECT}
    truncated = False
    queue = deque(roots)
    while queue:
        node = queue.popleft()
        for succ in store.downstream_neighbors(node):
            if succ in depth:
                continue
            d = depth[node] + 1
            if d > policy.d_max:
                truncated = True
                continue
            depth[succ] = d
            if succ.kind == NodeKind.PROJECT:
                reached_projects[succ] = d
                weight = policy.criticality_weight(store.node(succ).criticality)
                bfs_score = event.severity * (policy.alpha**d) * weight
                if bfs_score > threshold:
                    queue.append(succ)
            else:
                queue.append(succ)

    # one DP pass covers every target when the reachable subgraph is acyclic
    adjacency = _reachable_subgraph(store, roots)
    order = _is_acyclic(adjacency)
    all_counts = None
    if order is not None:
        all_counts = _path_length_counts(adjacency, roots, order, cap=None)

    source_pkgs = event_source_packages(store, event)
    items = []
    for project, project_depth in reached_projects.items():
        if all_counts is not None:
            per_length = all_counts.get(project, {})
        else:
            per_length = _enumerate_simple_paths(adjacency, roots, project, max_len=policy.d_max)
            truncated = True
        weight = policy.criticality_weight(store.node(project).criticality)
        exact = event.severity * weight * sum(
            count * policy.alpha**length for length, count in per_length.items()
        )
        if exact <= threshold:
            continue
        adequacy = test_adequacy(store, project)
        cost = store.compute_remediation_cost(project, source_pkgs)
        w1, w2, w3 = policy.priority_weights
        items.append(
            ImpactItem(
                project=project,
                impact_score=exact,
                depth=project_depth,
                test_adequacy=adequacy,
                remediation_cost=cost,
                priority=w1 * exact + w2 * cost + w3 * (1.0 - adequacy),
                evidence_paths=contributing_paths(store, roots, project, policy.d_max),
            )
        )
    items.sort(key=lambda it: (-it.priority, it.project.key))
    return ImpactReport(
        event_id=event.event_id,
        items=items,
        root_nodes=roots,
        config_version=policy.version,
        truncated=truncated,
    )


def transitive_closure(
    store: GraphStore, project: NodeId, d_max: int, materialize_at: Optional[float] = None
) -> list[AnnotatedDependency]:
    """Dependency closure with CVE annotation, breadth-first over DEPENDS_ON.

    Each package appears once at its minimum hop count; expansion stops at
    d_max (checked when enqueuing). Packages at depth >= 2 are cached as
    transitive dependency edges when materialize_at is given.
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    if not store.has_node(project):
        raise UnknownNode(str(project))

    result: dict[NodeId, int] = {}
    queue = deque([(project, 0)])
    while queue:
        node, d = queue.popleft()
        for edge in store.out_edges(node, EdgeKind.DEPENDS_ON):
            pkg = edge.dst
            if pkg in result or pkg == project:
                continue
            if d + 1 > d_max:
                continue
            result[pkg] = d + 1
            queue.append((pkg, d + 1))

    annotated = []
    for pkg, d in result.items():
        cves = frozenset(e.src for e in store.in_edges(pkg, EdgeKind.AFFECTS))
        annotated.append(AnnotatedDependency(package=pkg, depth=d, cves=cves))
    annotated.sort(key=lambda a: (a.depth, a.package.key))

    if materialize_at is not None and project.kind == NodeKind.PROJECT:
        with store.writer():
            for dep in annotated:
                if dep.depth >= 2:
                    store.upsert_edge(
                        Edge(
                            kind=EdgeKind.TRANS_DEPENDS,
                            src=project,
                            dst=dep.package,
                            depth_class="transitive",
                            last_touched=materialize_at,
                        )
                    )
    return annotated
