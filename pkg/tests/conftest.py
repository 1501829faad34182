import random

import pytest
from hypothesis import HealthCheck, settings

from depcal.graph import (
    ApiNode,
    CveNode,
    Edge,
    EdgeKind,
    GraphStore,
    NodeId,
    NodeKind,
    PackageNode,
    ProjectNode,
    TestNode,
)

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


def project(key, **kw):
    return ProjectNode(repo_id=key, **kw)


def package(key, **kw):
    return PackageNode(pkg_id=key, **kw)


def cve(key, **kw):
    return CveNode(cve_id=key, **kw)


def api(signature, **kw):
    return ApiNode(signature=signature, **kw)


def tnode(key, **kw):
    return TestNode(test_id=key, **kw)


def edge(kind, src, dst, **kw):
    return Edge(kind=EdgeKind(kind), src=NodeId.parse(src), dst=NodeId.parse(dst), **kw)


def build_store(nodes, edges):
    store = GraphStore()
    with store.writer():
        for node in nodes:
            store.upsert_node(node)
        for e in edges:
            store.upsert_edge(e)
    return store


@pytest.fixture
def g3_store():
    """Hand-checkable two-project graph used across the suite."""
    return build_store(
        [
            project("p1", criticality="high", coverage=0.8),
            project("p2", criticality="critical"),
            package("k1", version="2.1.0"),
            cve("c1", cvss=8.0),
            api("p1lib.handle", usage_frequency=12),
            tnode("t1", pass_rate=0.8),
            tnode("t2", pass_rate=0.5),
        ],
        [
            edge("depends_on", "project:p1", "package:k1"),
            edge("affects", "cve:c1", "package:k1"),
            edge("exposes", "project:p1", "api:p1lib.handle"),
            edge("consumes", "project:p2", "api:p1lib.handle"),
            edge("tests", "test:t1", "project:p1", test_coverage=0.9),
            edge("tests", "test:t2", "project:p1", test_coverage=1.0),
        ],
    )


def random_dag(rng: random.Random, max_nodes=12, max_edges=20):
    """Layered DAG over project/package nodes with one CVE root feeding in."""
    n = rng.randint(2, max_nodes)
    nodes = []
    kinds = []
    for i in range(n):
        if i == 0 or rng.random() < 0.4:
            nodes.append(package(f"k{i}"))
            kinds.append("package")
        else:
            crit = rng.choice(["low", "medium", "high", "critical"])
            nodes.append(project(f"p{i}", criticality=crit))
            kinds.append("project")
    edges_ = []
    seen = set()
    for _ in range(rng.randint(1, max_edges)):
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        lo, hi = min(i, j), max(i, j)
        # edges only point from later to earlier index, so the graph is acyclic
        if kinds[hi] == "project" and kinds[lo] == "package":
            key = ("depends_on", hi, lo)
            if key not in seen:
                seen.add(key)
                edges_.append(edge("depends_on", f"project:p{hi}", f"package:k{lo}"))
        elif kinds[hi] == "package" and kinds[lo] == "package" and hi != lo:
            key = ("depends_on", hi, lo)
            if key not in seen:
                seen.add(key)
                edges_.append(edge("depends_on", f"package:k{hi}", f"package:k{lo}"))
    store = build_store(nodes, edges_)
    with store.writer():
        store.upsert_node(cve("cx", cvss=rng.choice([3.0, 6.5, 8.0, 9.9])))
        store.upsert_edge(edge("affects", "cve:cx", "package:k0"))
    return store


def brute_force_score(store, roots, severity, policy, target=None):
    """Oracle: enumerate every simple path from the roots by DFS.

    Sums severity * alpha^hops * criticality weight at each project visit
    (or only at ``target`` when given), one term per distinct simple path.
    """
    total = 0.0
    for root in sorted(roots):
        stack = [(root, (root,))]
        while stack:
            node, path = stack.pop()
            counts = node == target if target is not None else node.kind == NodeKind.PROJECT
            if counts:
                hops = len(path) - 1
                weight = policy.criticality_weight(store.node(node).criticality)
                total += severity * (policy.alpha ** hops) * weight
            for nxt in store.downstream_neighbors(node):
                if nxt not in path:
                    stack.append((nxt, path + (nxt,)))
    return total
