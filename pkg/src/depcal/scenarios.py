"""Replayable end-to-end fixtures plus a synthetic ecosystem generator.

A fixture is a plain dict, usually loaded from JSON:

  name             report label
  clock_start      simulation start in seconds (default 0)
  policy           PolicyConfig field overrides
  graph            {"nodes": [...], "edges": [...]} bootstrap
  profiles         {project_key: validation profile dict}
  default_profile  validation profile dict
  reviewer         scripted reviewer dict (verdict/latency/per_project/...)
  learning         {"templates": [{"key": [event_type, unit_kind],
                                   "uses": n, "successes": m}, ...]}
  events           [{"at": seconds, "record": {...raw feed record...}}]
  assertions       checks evaluated after the replay

Node dicts carry a "kind" discriminator and the node's fields; "key" is
accepted for the id field of any kind. Edge dicts carry "kind", "src", "dst"
as "kind:key" strings plus optional edge attributes. Event timestamps must be
non-decreasing; every edge endpoint must resolve to a bootstrapped node.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import Engine, ScriptedReviewer
from .graph import (
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
from .learning import TransformTemplate
from .policy import PolicyConfig
from .util import canonical_json, content_hash
from .validation import ValidationProfile

FIXTURE_DIR = Path(__file__).parent / "fixtures"


class FixtureAssertionFailed(AssertionError):
    """A replayed fixture did not produce the outcome it pins down."""


class InfeasibleParams(ValueError):
    """Ecosystem generator parameters that cannot yield a valid graph."""


class EmptyLog(ValueError):
    """Metrics requested over an empty case log."""


class MalformedFixture(ValueError):
    pass


# ---------------------------------------------------------------------------
# graph bootstrap


_NODE_ID_FIELD = {
    "project": "repo_id",
    "package": "pkg_id",
    "cve": "cve_id",
    "api": "signature",
    "test": "test_id",
}

_NODE_CLASSES = {
    "project": ProjectNode,
    "package": PackageNode,
    "cve": CveNode,
    "api": ApiNode,
    "test": TestNode,
}

_EDGE_FIELDS = (
    "depth_class",
    "dep_strength",
    "coupling",
    "exploitability",
    "test_coverage",
    "propagation_risk",
    "last_touched",
)


def _node_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind not in _NODE_CLASSES:
        raise MalformedFixture(f"unknown node kind {kind!r}")
    fields = dict(spec)
    fields.pop("kind")
    id_field = _NODE_ID_FIELD[kind]
    if "key" in fields:
        fields[id_field] = fields.pop("key")
    if id_field not in fields:
        raise MalformedFixture(f"{kind} node missing {id_field!r}")
    try:
        return _NODE_CLASSES[kind](**fields)
    except TypeError as exc:
        raise MalformedFixture(f"bad {kind} node fields: {exc}") from exc


def _edge_from_dict(spec: dict) -> Edge:
    try:
        kind = EdgeKind(str(spec["kind"]).lower())
    except (KeyError, ValueError) as exc:
        raise MalformedFixture(f"bad edge kind in {spec!r}") from exc
    if "src" not in spec or "dst" not in spec:
        raise MalformedFixture(f"edge missing endpoints: {spec!r}")
    attrs = {k: spec[k] for k in _EDGE_FIELDS if k in spec}
    return Edge(kind=kind, src=NodeId.parse(spec["src"]), dst=NodeId.parse(spec["dst"]), **attrs)


def build_graph(store: GraphStore, spec: dict, now: float = 0.0) -> GraphStore:
    """Load a bootstrap dict into the store. Nodes first, then edges."""
    with store.writer():
        for node_spec in spec.get("nodes", []):
            store.upsert_node(_node_from_dict(node_spec), now=now)
        for edge_spec in spec.get("edges", []):
            store.upsert_edge(_edge_from_dict(edge_spec))
    return store


# ---------------------------------------------------------------------------
# metrics over a case log


def compute_metrics(cases: list) -> dict:
    """Disposition counts, action histogram, MTR, automation and rollback rates.

    MTR averages disposition_time - observed_at over merged cases only;
    automation counts unreviewed merges; rollback frequency counts cases
    with at least one reverted unit. Raises EmptyLog on an empty input.
    """
    finalized = [c for c in cases if c.disposition is not None]
    if not finalized:
        raise EmptyLog("no finalized cases to aggregate")

    dispositions: dict[str, int] = {}
    histogram: dict[str, int] = {}
    for c in finalized:
        dispositions[c.disposition.value] = dispositions.get(c.disposition.value, 0) + 1
        histogram[c.action_type] = histogram.get(c.action_type, 0) + 1

    merged = [c for c in finalized if c.disposition.value in ("merged_auto", "merged_after_review")]
    mtr_by_event: dict[str, float] = {}
    for event_id in sorted({c.event_id for c in merged}):
        spans = [c.disposition_time - c.observed_at for c in merged if c.event_id == event_id]
        mtr_by_event[event_id] = sum(spans) / len(spans)
    mtr = sum(c.disposition_time - c.observed_at for c in merged) / len(merged) if merged else None

    rollbacks = sum(1 for c in finalized if c.rollback and c.rollback.get("reverted_units"))
    return {
        "cases_total": len(finalized),
        "dispositions": dispositions,
        "gate_type_histogram": histogram,
        "mtr_seconds": mtr,
        "mtr_by_event": mtr_by_event,
        "automation_rate": dispositions.get("merged_auto", 0) / len(finalized),
        "rollback_frequency": rollbacks / len(finalized),
    }


@dataclass
class ScenarioReport:
    name: str
    metrics: dict
    cases: list = field(default_factory=list)  # per-case summary rows
    policy_versions: list = field(default_factory=list)
    pending_reviews: int = 0
    clock_end: float = 0.0
    assertions_checked: int = 0

    def validate(self) -> None:
        # the histogram partitions the finalized cases
        total = sum(self.metrics["gate_type_histogram"].values())
        if total != self.metrics["cases_total"]:
            raise FixtureAssertionFailed(
                f"gate histogram covers {total} cases, log has {self.metrics['cases_total']}"
            )
        if sum(self.metrics["dispositions"].values()) != self.metrics["cases_total"]:
            raise FixtureAssertionFailed("disposition counts do not partition the case log")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "metrics": self.metrics,
            "cases": self.cases,
            "policy_versions": self.policy_versions,
            "pending_reviews": self.pending_reviews,
            "clock_end": self.clock_end,
            "assertions_checked": self.assertions_checked,
        }

    def to_canonical_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")

    def to_table(self) -> str:
        lines = [f"scenario: {self.name}"]
        m = self.metrics
        lines.append(f"  cases: {m['cases_total']}   pending reviews: {self.pending_reviews}")
        for label, counter in (("actions", m["gate_type_histogram"]), ("dispositions", m["dispositions"])):
            row = "  ".join(f"{k}={v}" for k, v in sorted(counter.items()))
            lines.append(f"  {label}: {row}")
        mtr = m["mtr_seconds"]
        lines.append(f"  mtr: {mtr:.1f}s" if mtr is not None else "  mtr: n/a")
        lines.append(
            f"  automation: {m['automation_rate']:.3f}   rollbacks: {m['rollback_frequency']:.3f}"
        )
        lines.append(f"  policy versions: {self.policy_versions}   clock end: {self.clock_end:.0f}s")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# fixture loading and validation


def load_fixture(source) -> dict:
    """Accepts a dict, a path, or a builtin fixture name like "scenario1"."""
    if isinstance(source, dict):
        fixture = source
    else:
        path = Path(source)
        if not path.suffix:
            path = FIXTURE_DIR / f"{path.name}.json"
        if not path.exists():
            raise MalformedFixture(f"no fixture at {path}")
        fixture = json.loads(path.read_text(encoding="utf-8"))
    validate_fixture(fixture)
    return fixture


def builtin_fixture_names() -> list:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.json"))


def validate_fixture(fixture: dict) -> None:
    if not isinstance(fixture, dict) or "graph" not in fixture or "events" not in fixture:
        raise MalformedFixture("fixture needs at least 'graph' and 'events'")
    known = {
        f"{n['kind']}:{n.get('key', n.get(_NODE_ID_FIELD.get(n.get('kind'), '')))}"
        for n in fixture["graph"].get("nodes", [])
        if isinstance(n, dict) and n.get("kind") in _NODE_ID_FIELD
    }
    for edge in fixture["graph"].get("edges", []):
        for endpoint in ("src", "dst"):
            ref = edge.get(endpoint)
            if ref not in known:
                raise MalformedFixture(f"edge endpoint {ref!r} not among bootstrap nodes")
    last = -math.inf
    for entry in fixture["events"]:
        if "record" not in entry:
            raise MalformedFixture(f"event entry missing 'record': {entry!r}")
        at = float(entry.get("at", 0.0))
        if at < last:
            raise MalformedFixture("event timestamps must be non-decreasing")
        last = at
    for key in fixture.get("profiles", {}):
        if f"project:{key}" not in known:
            raise MalformedFixture(f"validation profile for unknown project {key!r}")


def _policy_from_fixture(fixture: dict) -> PolicyConfig:
    overrides = fixture.get("policy")
    if not overrides:
        return PolicyConfig()
    base = PolicyConfig().to_dict()
    base.update(overrides)
    return PolicyConfig.from_dict(base)


def _seed_learning(engine: Engine, spec: dict) -> None:
    for tpl_spec in spec.get("templates", []):
        key = tuple(tpl_spec["key"])
        tpl = TransformTemplate(
            template_id=content_hash(list(key), prefix="tpl-"),
            key=key,
            uses=int(tpl_spec["uses"]),
            successes=int(tpl_spec["successes"]),
        )
        tpl.recompute()
        engine.learning.templates[key] = tpl


def run_scenario(source, interactive: bool = False) -> tuple:
    """Replay a fixture and return (engine, report).

    With interactive=True no scripted reviewer is installed, so review cases
    park in the queue; callers decide them through the engine afterwards.
    """
    fixture = load_fixture(source)
    clock_start = float(fixture.get("clock_start", 0.0))
    reviewer = None
    if not interactive:
        spec = fixture.get("reviewer", {})
        reviewer = ScriptedReviewer(
            verdict=spec.get("verdict", "accept"),
            latency=float(spec.get("latency", 600.0)),
            reviewer=spec.get("reviewer", "scripted"),
            per_case=spec.get("per_case", {}),
            per_project=spec.get("per_project", {}),
        )

    engine = Engine(
        policy=_policy_from_fixture(fixture), clock_start=clock_start, reviewer=reviewer
    )
    build_graph(engine.store, fixture["graph"], now=clock_start)
    if "default_profile" in fixture:
        engine.default_profile = ValidationProfile.from_dict(fixture["default_profile"])
    for key, profile in fixture.get("profiles", {}).items():
        engine.profiles[key] = ValidationProfile.from_dict(profile)
    _seed_learning(engine, fixture.get("learning", {}))

    for entry in fixture["events"]:
        engine.submit_event(entry["record"], observed_at=float(entry.get("at", 0.0)))

    report = build_report(fixture.get("name", "scenario"), engine)
    if not interactive:
        # pinned outcomes assume the scripted reviewer has already decided
        report.assertions_checked = check_assertions(fixture, engine)
    return engine, report


def build_report(name: str, engine: Engine) -> ScenarioReport:
    finalized = [c for c in engine.cases.all() if c.disposition is not None]
    metrics = (
        compute_metrics(finalized)
        if finalized
        else {
            "cases_total": 0,
            "dispositions": {},
            "gate_type_histogram": {},
            "mtr_seconds": None,
            "mtr_by_event": {},
            "automation_rate": None,
            "rollback_frequency": None,
        }
    )
    rows = [
        {
            "case_id": c.case_id,
            "event_id": c.event_id,
            "project": c.project,
            "action_type": c.action_type,
            "disposition": c.disposition.value if c.disposition else None,
            "disposition_time": c.disposition_time,
            "escalated": c.escalated,
        }
        for c in engine.cases.all()
    ]
    report = ScenarioReport(
        name=name,
        metrics=metrics,
        cases=rows,
        policy_versions=list(engine.policy_versions),
        pending_reviews=sum(1 for t in engine.review_tasks.values() if t.status == "pending"),
        clock_end=engine.clock,
    )
    if finalized:
        report.validate()
    return report


# ---------------------------------------------------------------------------
# fixture assertions


def check_assertions(fixture: dict, engine: Engine) -> int:
    checked = 0
    for spec in fixture.get("assertions", []):
        _run_assertion(spec, engine)
        checked += 1
    return checked


def _match_cases(spec: dict, engine: Engine) -> list:
    cases = engine.cases.all()
    if "project" in spec:
        cases = [c for c in cases if c.project == spec["project"]]
    if "event_index" in spec:
        event_ids = [e.event_id for e in engine.events.values()]
        wanted = event_ids[spec["event_index"]]
        cases = [c for c in cases if c.event_id == wanted]
    if "where_action_type" in spec:
        cases = [c for c in cases if c.action_type == spec["where_action_type"]]
    return cases


def _fail(spec: dict, detail: str) -> None:
    raise FixtureAssertionFailed(f"{spec.get('check')}: {detail} ({spec})")


def _run_assertion(spec: dict, engine: Engine) -> None:
    check = spec.get("check")
    if check == "case_count":
        got = len(_match_cases(spec, engine))
        if got != spec["equals"]:
            _fail(spec, f"expected {spec['equals']} cases, saw {got}")
    elif check in ("action_type", "disposition"):
        cases = _match_cases(spec, engine)
        if not cases:
            _fail(spec, "matched no case")
        allowed = spec.get("one_of", [spec.get("equals")])
        for c in cases:
            value = c.action_type if check == "action_type" else (
                c.disposition.value if c.disposition else None
            )
            if value not in allowed:
                _fail(spec, f"case {c.case_id} has {value!r}, wanted one of {allowed}")
    elif check == "histogram":
        finalized = [c for c in engine.cases.all() if c.disposition is not None]
        got = sum(1 for c in finalized if c.action_type == spec["action_type"])
        if got != spec["equals"]:
            _fail(spec, f"{spec['action_type']} count {got} != {spec['equals']}")
    elif check == "impact_scores":
        event_ids = [e.event_id for e in engine.events.values()]
        report = engine.reports.get(event_ids[spec.get("event_index", 0)])
        if report is None:
            _fail(spec, "no report for event")
        scores = {str(i.project): i.impact_score for i in report.items}
        tol = float(spec.get("tol", 1e-9))
        for project, expected in spec["expect"].items():
            got = scores.get(project)
            if got is None or abs(got - expected) > tol:
                _fail(spec, f"{project} score {got} != {expected} +/- {tol}")
    elif check == "priority_order":
        event_ids = [e.event_id for e in engine.events.values()]
        report = engine.reports.get(event_ids[spec.get("event_index", 0)])
        got = [str(i.project) for i in report.items]
        if got != spec["equals"]:
            _fail(spec, f"ranking {got} != {spec['equals']}")
    elif check == "tau":
        cases = _match_cases(spec, engine)
        if not cases:
            _fail(spec, "matched no case")
        tol = float(spec.get("tol", 1e-9))
        for c in cases:
            got = c.impact_item["test_adequacy"]
            if abs(got - spec["equals"]) > tol:
                _fail(spec, f"tau {got} != {spec['equals']} +/- {tol}")
    elif check == "closure_count":
        from .impact import transitive_closure

        project = NodeId.parse(spec["project"])
        closure = transitive_closure(engine.store, project, engine.policy.d_max)
        if len(closure) != spec["equals"]:
            got = sorted(str(a.package) for a in closure)
            _fail(spec, f"dependency closure {got} size != {spec['equals']}")
    elif check == "pending_reviews":
        got = sum(1 for t in engine.review_tasks.values() if t.status == "pending")
        if got != spec["equals"]:
            _fail(spec, f"{got} pending != {spec['equals']}")
    else:
        raise MalformedFixture(f"unknown assertion check {check!r}")


# ---------------------------------------------------------------------------
# canonical micro fixture


def micro_fixture_g3() -> dict:
    """Two-project graph whose scores are fully checkable by hand.

    One CVE (cvss 8.0) hits package k1. Project p1 depends on k1 directly
    (severity 0.8, depth 1, criticality high) and p2 consumes an API p1
    exposes (depth 2, criticality critical):

      s(p1) = 0.8 * 0.5^1 * 0.75 = 0.30
      s(p2) = 0.8 * 0.5^2 * 1.00 = 0.20
      tau(p1) = 1 - (1 - 0.8*0.9)(1 - 0.5*1.0) = 0.86

    p2 carries no tests, so despite the lower score it outranks p1 on
    priority and the ranked report lists it first.
    """
    return {
        "name": "micro-g3",
        "clock_start": 0.0,
        "graph": {
            "nodes": [
                {"kind": "project", "key": "p1", "criticality": "high", "coverage": 0.8},
                {"kind": "project", "key": "p2", "criticality": "critical"},
                {"kind": "package", "key": "k1", "version": "2.1.0"},
                {"kind": "api", "key": "p1lib.handle", "usage_frequency": 12},
                {"kind": "test", "key": "t1", "pass_rate": 0.8},
                {"kind": "test", "key": "t2", "pass_rate": 0.5},
            ],
            "edges": [
                {"kind": "depends_on", "src": "project:p1", "dst": "package:k1"},
                {"kind": "exposes", "src": "project:p1", "dst": "api:p1lib.handle"},
                {"kind": "consumes", "src": "project:p2", "dst": "api:p1lib.handle"},
                {"kind": "tests", "src": "test:t1", "dst": "project:p1", "test_coverage": 0.9},
                {"kind": "tests", "src": "test:t2", "dst": "project:p1", "test_coverage": 1.0},
            ],
        },
        "events": [
            {
                "at": 0.0,
                "record": {
                    "source": "cve_feed",
                    "id": "CVE-2025-0101",
                    "cvss": 8.0,
                    "affects": ["k1"],
                    "summary": "deserialization flaw in k1",
                },
            }
        ],
        "assertions": [
            {
                "check": "impact_scores",
                "event_index": 0,
                "tol": 1e-9,
                "expect": {"project:p1": 0.3, "project:p2": 0.2},
            },
            {"check": "priority_order", "event_index": 0, "equals": ["project:p2", "project:p1"]},
            {"check": "tau", "project": "project:p1", "equals": 0.86, "tol": 1e-9},
            {"check": "case_count", "equals": 2},
        ],
    }


# ---------------------------------------------------------------------------
# synthetic ecosystem generator


_DEFAULT_PARAMS = {
    "projects": 20,
    "packages": 30,
    "depends_per_project": 3,
    "apis_per_package": 2,
    "consume_rate": 0.4,
    "tests_per_project": 2,
    "criticality_mix": {"low": 0.2, "medium": 0.5, "high": 0.2, "critical": 0.1},
    "security_critical_rate": 0.1,
    "coverage_range": (0.4, 0.95),
    "languages": ("python", "typescript", "go"),
}


def generate_ecosystem(params: Optional[dict] = None, seed: int = 0) -> tuple:
    """Deterministic synthetic graph; returns (store, stats).

    Node counts match the parameters exactly and every project gets at
    least one dependency edge. Identical (params, seed) pairs produce
    byte-identical snapshots.
    """
    cfg = dict(_DEFAULT_PARAMS)
    cfg.update(params or {})
    n_projects = int(cfg["projects"])
    n_packages = int(cfg["packages"])
    if n_projects < 0 or n_packages < 0:
        raise InfeasibleParams("node counts must be >= 0")
    if n_projects > 0 and n_packages == 0:
        raise InfeasibleParams("projects need at least one package to depend on")
    mix = cfg["criticality_mix"]
    if not mix or any(w < 0 for w in mix.values()) or sum(mix.values()) <= 0:
        raise InfeasibleParams("criticality_mix must hold non-negative weights, some positive")

    rng = random.Random(seed)
    store = GraphStore()
    levels = sorted(mix)
    weights = [mix[level] for level in levels]
    lo, hi = cfg["coverage_range"]

    with store.writer():
        packages = []
        for i in range(n_packages):
            pkg = PackageNode(
                pkg_id=f"pkg{i:03d}",
                version=f"1.{i % 10}.0",
                ecosystem="pip",
                released_at=0.0,
            )
            packages.append(store.upsert_node(pkg))

        apis_by_package: dict[str, list] = {}
        for i in range(n_packages):
            owner = f"pkg{i:03d}"
            apis_by_package[owner] = []
            for j in range(int(cfg["apis_per_package"])):
                api = ApiNode(
                    signature=f"{owner}.fn{j}",
                    usage_frequency=rng.randrange(0, 40),
                )
                apis_by_package[owner].append(store.upsert_node(api))

        projects = []
        for i in range(n_projects):
            node = ProjectNode(
                repo_id=f"svc{i:03d}",
                language=rng.choice(list(cfg["languages"])),
                criticality=rng.choices(levels, weights=weights, k=1)[0],
                coverage=round(rng.uniform(lo, hi), 3),
                security_critical=rng.random() < cfg["security_critical_rate"],
            )
            projects.append(store.upsert_node(node))

        degree: dict[str, int] = {}
        for idx, project in enumerate(projects):
            fan = max(1, int(cfg["depends_per_project"]))
            count = 1 + rng.randrange(fan)
            chosen = rng.sample(range(n_packages), min(count, n_packages))
            # a maintainer project exposes its first dependency's surface
            for k, pkg_idx in enumerate(sorted(chosen)):
                pkg = packages[pkg_idx]
                store.upsert_edge(
                    Edge(
                        kind=EdgeKind.DEPENDS_ON,
                        src=project,
                        dst=pkg,
                        dep_strength=round(rng.uniform(0.3, 1.0), 3),
                    )
                )
                degree[pkg.key] = degree.get(pkg.key, 0) + 1
                if k == 0 and idx < n_packages:
                    for api in apis_by_package[pkg.key]:
                        store.upsert_edge(Edge(kind=EdgeKind.EXPOSES, src=project, dst=api))
                for api in apis_by_package[pkg.key]:
                    if rng.random() < cfg["consume_rate"]:
                        store.upsert_edge(Edge(kind=EdgeKind.CONSUMES, src=project, dst=api))

            for t in range(int(cfg["tests_per_project"])):
                test = TestNode(
                    test_id=f"t-{project.key}-{t}", pass_rate=round(rng.uniform(0.6, 1.0), 3)
                )
                tid = store.upsert_node(test)
                store.upsert_edge(
                    Edge(
                        kind=EdgeKind.TESTS,
                        src=tid,
                        dst=project,
                        test_coverage=round(rng.uniform(0.3, 0.95), 3),
                    )
                )

    histogram: dict[int, int] = {}
    for count in degree.values():
        histogram[count] = histogram.get(count, 0) + 1
    stats = {
        "projects": n_projects,
        "packages": n_packages,
        "apis": sum(len(v) for v in apis_by_package.values()) if n_packages else 0,
        "dependency_edges": sum(degree.values()),
        "package_in_degree_histogram": dict(sorted(histogram.items())),
        "seed": seed,
    }
    return store, stats


# ---------------------------------------------------------------------------
# closed-loop adaptation harness


def closed_loop_harness(
    seed: int = 11,
    cases: int = 600,
    spacing: float = 3600.0,
    flaky_pass: float = 0.775,
    stable_pass: float = 0.995,
) -> dict:
    """Long-horizon replay that exercises threshold adaptation end to end.

    Four projects file manifest-only package updates round-robin. One is
    flaky: its build gate fails often enough that the aggregate first-pass
    failure rate sits near 6%. Policy adaptation then has to react: the
    low-risk threshold walks down to its floor and stays there, and the
    flaky project collects rollbacks until a per-project override forces
    its cases through review, after which the trailing-window failure rate
    drops under the 2% bar.

    Returns the engine plus per-adaptation-window stats:
      windows: [{"cycle", "t1_cases", "t1_failures", "t1_failure_rate",
                 "theta_r_low", "forced_projects"}]
    """
    engine = Engine(
        policy=PolicyConfig(), clock_start=0.0, reviewer=ScriptedReviewer(latency=300.0)
    )
    names = [f"svc-{c}" for c in "abcd"]
    with engine.store.writer():
        for name in names:
            engine.store.upsert_node(
                ProjectNode(repo_id=name, criticality="high", coverage=0.7)
            )
            engine.store.upsert_node(PackageNode(pkg_id=f"lib-{name}", version="1.0.0"))
            engine.store.upsert_edge(
                Edge(
                    kind=EdgeKind.DEPENDS_ON,
                    src=NodeId(NodeKind.PROJECT, name),
                    dst=NodeId(NodeKind.PACKAGE, f"lib-{name}"),
                )
            )
    for i, name in enumerate(names):
        passes = flaky_pass if i == 0 else stable_pass
        engine.profiles[name] = ValidationProfile(
            mode="seeded_stochastic",
            level_pass_probs=(passes, 1.0, 1.0),
            seed=seed * 1000 + i,
        )

    boundaries: list[dict] = []
    last_marker = 0
    for k in range(cases):
        name = names[k % len(names)]
        record = {
            "source": "registry_feed",
            "pkg": f"lib-{name}",
            "old": f"1.0.{k // len(names)}",
            "new": f"1.0.{k // len(names) + 1}",
            "note": f"routine bump {k}",
        }
        engine.submit_event(record, observed_at=(k + 1) * spacing)
        marker = engine.learning.adapt_marker
        if marker != last_marker:
            window = engine.learning.records[last_marker:marker]
            t1 = [r for r in window if r.action_type == "Type1"]
            failures = [r for r in t1 if r.failed]
            boundaries.append(
                {
                    "cycle": len(boundaries) + 1,
                    "t1_cases": len(t1),
                    "t1_failures": len(failures),
                    "t1_failure_rate": len(failures) / len(t1) if t1 else 0.0,
                    "theta_r_low": engine.policy.theta_r_low,
                    "forced_projects": sorted(
                        p
                        for p, o in engine.policy.project_overrides.items()
                        if o.get("force_type3")
                    ),
                }
            )
            last_marker = marker

    return {"engine": engine, "windows": boundaries, "projects": names}
