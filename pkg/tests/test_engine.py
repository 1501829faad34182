"""End-to-end orchestration: ingest, case driving, review queue, persistence."""

import pytest

from depcal.cases import AlreadyDecided, Disposition, UnknownCase
from depcal.engine import Engine, ModifyFailsVerification, ScriptedReviewer
from depcal.graph import (
    ApiNode,
    Edge,
    EdgeKind,
    NodeId,
    PackageNode,
    ProjectNode,
    TestNode as TNode,
)
from depcal.learning import TransformTemplate
from depcal.validation import ValidationProfile

PATCH_BUMP = {"source": "registry_feed", "pkg": "k1", "old": "1.2.3", "new": "1.2.4"}
SECURITY_CVE = {
    "source": "cve_feed",
    "id": "CVE-2025-0042",
    "cvss": 9.1,
    "affects": ["k1"],
    "security_critical": True,
    "fix_backward_compatible": False,
}
BREAKING_BUMP = {
    "source": "registry_feed",
    "pkg": "k1",
    "old": "1.2.3",
    "new": "2.0.0",
    "deprecated_apis": [{"signature": "k1.old", "replacement": "k1.new"}],
}


def seed_basic(engine, criticality="high", extra_project=None):
    with engine.store.writer():
        engine.store.upsert_node(PackageNode(pkg_id="k1", version="1.2.3"))
        engine.store.upsert_node(
            ProjectNode(repo_id="pa", criticality=criticality, coverage=0.8)
        )
        engine.store.upsert_edge(
            Edge(
                kind=EdgeKind.DEPENDS_ON,
                src=NodeId.parse("project:pa"),
                dst=NodeId.parse("package:k1"),
            )
        )
        engine.store.upsert_node(TNode(test_id="t1", pass_rate=1.0))
        engine.store.upsert_edge(
            Edge(
                kind=EdgeKind.TESTS,
                src=NodeId.parse("test:t1"),
                dst=NodeId.parse("project:pa"),
                test_coverage=0.95,
            )
        )
        if extra_project:
            engine.store.upsert_node(ProjectNode(repo_id=extra_project, criticality="critical"))
            engine.store.upsert_edge(
                Edge(
                    kind=EdgeKind.DEPENDS_ON,
                    src=NodeId.parse(f"project:{extra_project}"),
                    dst=NodeId.parse("package:k1"),
                )
            )
    return engine


def seed_rewrite_world(engine, security_critical=False, reexports=False):
    """pa consumes k1.old, so a breaking bump needs a callsite rewrite."""
    with engine.store.writer():
        engine.store.upsert_node(PackageNode(pkg_id="k1", version="1.2.3"))
        engine.store.upsert_node(
            ProjectNode(
                repo_id="pa",
                criticality="medium",
                coverage=0.8,
                security_critical=security_critical,
            )
        )
        engine.store.upsert_node(ApiNode(signature="k1.old"))
        engine.store.upsert_edge(
            Edge(
                kind=EdgeKind.DEPENDS_ON,
                src=NodeId.parse("project:pa"),
                dst=NodeId.parse("package:k1"),
            )
        )
        engine.store.upsert_edge(
            Edge(
                kind=EdgeKind.CONSUMES,
                src=NodeId.parse("project:pa"),
                dst=NodeId.parse("api:k1.old"),
            )
        )
        if reexports:
            engine.store.upsert_edge(
                Edge(
                    kind=EdgeKind.EXPOSES,
                    src=NodeId.parse("project:pa"),
                    dst=NodeId.parse("api:k1.old"),
                )
            )
        engine.store.upsert_node(TNode(test_id="t1", pass_rate=1.0))
        engine.store.upsert_edge(
            Edge(
                kind=EdgeKind.TESTS,
                src=NodeId.parse("test:t1"),
                dst=NodeId.parse("project:pa"),
                test_coverage=0.95,
            )
        )
    return engine


def trust_rewrites(engine):
    """Learned template history good enough to unlock hands-off rewrites."""
    tpl = TransformTemplate(
        template_id="tpl-seeded",
        key=("package_update", "callsite_rewrite"),
        uses=40,
        successes=38,
    )
    tpl.recompute()
    engine.learning.templates[tpl.key] = tpl


def only_case(engine):
    cases = engine.cases.all()
    assert len(cases) == 1
    return cases[0]


# --- happy paths ---


def test_type1_bump_merges_automatically():
    engine = seed_basic(Engine())
    result = engine.submit_event(PATCH_BUMP, observed_at=100.0)
    assert result["created"] is True
    assert result["archived_advisory"] is False

    report = engine.reports[result["event_id"]]
    assert [str(i.project) for i in report.items] == ["project:pa"]

    case = only_case(engine)
    assert case.action_type == "Type1"
    assert case.disposition is Disposition.MERGED_AUTO
    assert case.patch is not None and case.patch.verified
    # three validation levels bound the wall-clock cost
    assert 661.0 <= case.disposition_time - case.observed_at <= 7810.0
    assert engine.review_tasks == {}

    categories = [s.category for s in engine.learning.signals]
    assert categories == ["automated_outcome", "business_outcome"]


def test_duplicate_record_is_idempotent():
    engine = seed_basic(Engine())
    first = engine.submit_event(PATCH_BUMP, observed_at=100.0)
    snapshot = engine.store.snapshot()
    again = engine.submit_event(PATCH_BUMP, observed_at=250.0)
    assert again["created"] is False
    assert again["event_id"] == first["event_id"]
    assert len(engine.events) == 1
    assert len(engine.cases.all()) == 1
    assert engine.store.snapshot() == snapshot


def test_unanchored_event_archives_as_advisory():
    engine = seed_basic(Engine())
    result = engine.submit_event({"source": "cve_feed", "id": "CVE-2025-1", "cvss": 5.0})
    assert result["created"] is True
    assert result["archived_advisory"] is True
    assert result["event_id"] in engine.advisories
    assert result["event_id"] not in engine.reports
    assert engine.cases.all() == []


def test_every_report_item_becomes_exactly_one_case():
    engine = seed_basic(Engine(reviewer=ScriptedReviewer()), extra_project="pb")
    engine.submit_event(PATCH_BUMP, observed_at=0.0)
    engine.submit_event(SECURITY_CVE, observed_at=1000.0)
    expected = {
        (eid, str(item.project))
        for eid, report in engine.reports.items()
        for item in report.items
    }
    got = {(c.event_id, c.project) for c in engine.cases.all()}
    assert got == expected
    assert all(c.disposition is not None for c in engine.cases.all())


# --- review queue ---


def test_security_cve_parks_in_priority_order():
    engine = seed_basic(Engine(), extra_project="pb")
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    cases = engine.cases.all()
    assert {c.action_type for c in cases} == {"Type3"}
    assert all(c.disposition is None for c in cases)

    queue = engine.review_queue()
    # the untested critical consumer outranks the covered one
    assert [t.project for t in queue] == ["project:pb", "project:pa"]
    assert all(t.status == "pending" for t in queue)
    assert all(t.draft_patch is not None for t in queue)

    assert engine.review_queue(project="project:pa")[0].project == "project:pa"
    eid = cases[0].event_id
    assert len(engine.review_queue(event_id=eid)) == 2
    assert engine.review_queue(event_id="ev-nope") == []


def test_accept_decision_merges_after_review():
    engine = seed_basic(Engine())
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    case = only_case(engine)
    task = engine.submit_review_decision(
        case.case_id, verdict="accept", reviewer="sam", decided_at=650.0
    )
    assert task.status == "decided"
    assert task.decision["approval_latency"] == pytest.approx(600.0)
    assert case.disposition is Disposition.MERGED_AFTER_REVIEW
    assert case.disposition_time >= 650.0 + 661.0  # review then full validation
    human = [s for s in engine.learning.signals if s.category == "human_feedback"]
    assert len(human) == 1
    assert human[0].human_decision == "accept"
    assert engine.review_queue() == []
    assert engine.review_queue(include_decided=True)[0].case_id == case.case_id


def test_reject_decision_closes_without_validation():
    engine = seed_basic(Engine())
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    case = only_case(engine)
    engine.submit_review_decision(case.case_id, verdict="reject", reviewer="sam", decided_at=700.0)
    assert case.disposition is Disposition.REJECTED_BY_HUMAN
    assert case.disposition_time == 700.0
    assert case.validation_outcome is None


def test_decision_error_paths_leave_task_pending():
    engine = seed_basic(Engine())
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    case = only_case(engine)
    with pytest.raises(UnknownCase):
        engine.submit_review_decision("case-ghost", verdict="accept", reviewer="sam")
    with pytest.raises(ValueError, match="verdict"):
        engine.submit_review_decision(case.case_id, verdict="punt", reviewer="sam")
    assert engine.review_tasks[case.case_id].status == "pending"
    engine.submit_review_decision(case.case_id, verdict="accept", reviewer="sam")
    with pytest.raises(AlreadyDecided):
        engine.submit_review_decision(case.case_id, verdict="accept", reviewer="sam")


def test_scripted_reviewer_decides_inline():
    reviewer = ScriptedReviewer(verdict="accept", latency=300.0, reviewer="bot")
    engine = seed_basic(Engine(reviewer=reviewer))
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    case = only_case(engine)
    assert case.disposition is Disposition.MERGED_AFTER_REVIEW
    assert engine.review_tasks[case.case_id].decision["approval_latency"] == pytest.approx(300.0)
    assert engine.review_queue() == []


def test_scripted_reviewer_per_project_override():
    reviewer = ScriptedReviewer(per_project={"project:pa": {"verdict": "reject"}})
    engine = seed_basic(Engine(reviewer=reviewer))
    engine.submit_event(SECURITY_CVE, observed_at=50.0)
    assert only_case(engine).disposition is Disposition.REJECTED_BY_HUMAN


# --- hands-off rewrites and escalation ---


def test_trusted_rewrite_goes_hands_off():
    engine = seed_rewrite_world(Engine())
    trust_rewrites(engine)
    engine.submit_event(BREAKING_BUMP, observed_at=0.0)
    case = only_case(engine)
    assert case.action_type == "Type2"
    assert case.disposition is Disposition.MERGED_AUTO
    assert case.escalated is False
    kinds = sorted(u.kind.value for u in case.patch.units)
    assert kinds == ["callsite_rewrite", "manifest_bump", "test_update"]


def test_fresh_history_keeps_rewrites_supervised():
    # without learned templates confidence cannot clear the hands-off bar
    engine = seed_rewrite_world(Engine())
    engine.submit_event(BREAKING_BUMP, observed_at=0.0)
    case = only_case(engine)
    assert case.action_type in ("Type3", "Type4")
    assert case.disposition is None  # parked for review


def test_failed_validation_escalates_to_review():
    engine = seed_rewrite_world(Engine())
    trust_rewrites(engine)
    engine.profiles["pa"] = ValidationProfile(
        mode="fixture_declared", declared_failures=[{"level": 2}]
    )
    engine.submit_event(BREAKING_BUMP, observed_at=0.0)
    case = only_case(engine)
    assert case.action_type == "Type2"
    assert case.escalated is True
    assert case.disposition is None
    assert case.validation_outcome is not None
    assert case.rollback["mode"] == "immediate_full"

    engine.submit_review_decision(
        case.case_id, verdict="accept", reviewer="sam", decided_at=5000.0
    )
    assert case.disposition is Disposition.ROLLED_BACK_FULL
    auto = [s for s in engine.learning.signals if s.category == "automated_outcome"]
    assert auto[0].success is False
    assert auto[0].rollback_kind == "immediate_full"


def test_partial_failure_escalates_with_partial_rollback():
    probe = seed_rewrite_world(Engine())
    trust_rewrites(probe)
    probe.submit_event(BREAKING_BUMP, observed_at=0.0)
    rewrite_unit = next(
        u for u in only_case(probe).patch.units if u.kind.value == "callsite_rewrite"
    )

    engine = seed_rewrite_world(Engine())
    trust_rewrites(engine)
    engine.profiles["pa"] = ValidationProfile(
        mode="fixture_declared",
        declared_failures=[{"level": 2, "failed_units": [rewrite_unit.unit_id]}],
    )
    engine.submit_event(BREAKING_BUMP, observed_at=0.0)
    case = only_case(engine)
    assert case.escalated is True
    assert case.rollback["mode"] == "threshold_partial"
    engine.submit_review_decision(
        case.case_id, verdict="accept", reviewer="sam", decided_at=9000.0
    )
    assert case.disposition is Disposition.ROLLED_BACK_PARTIAL
    # the dependent test refresh is dragged out with the failed rewrite
    reverted = set(case.rollback["reverted_units"])
    assert rewrite_unit.unit_id in reverted
    assert any(uid.split(":")[-1].startswith("t") for uid in reverted - {rewrite_unit.unit_id})


# --- modification flow ---


def modify_world():
    engine = seed_rewrite_world(Engine(), security_critical=True, reexports=True)
    engine.submit_event(BREAKING_BUMP, observed_at=0.0)
    case = only_case(engine)
    assert case.action_type == "Type3"
    assert case.patch.verified is False  # draft rewrites away a re-exported call
    return engine, case


def test_modify_can_drop_the_offending_rewrite():
    engine, case = modify_world()
    rewrite = next(u for u in case.patch.units if u.kind.value == "callsite_rewrite")
    original_patch = case.patch.patch_id
    engine.submit_review_decision(
        case.case_id,
        verdict="modify",
        reviewer="sam",
        modified_units=[{"unit_id": rewrite.unit_id, "drop": True}],
        decided_at=900.0,
    )
    assert case.disposition is Disposition.MERGED_AFTER_REVIEW
    assert case.patch.patch_id != original_patch
    assert [u.kind.value for u in case.patch.units] == ["manifest_bump"]
    assert case.patch.verified is True
    human = [s for s in engine.learning.signals if s.category == "human_feedback"]
    assert human[0].override is True


def test_modify_can_retarget_a_unit():
    engine, case = modify_world()
    rewrite = next(u for u in case.patch.units if u.kind.value == "callsite_rewrite")
    with pytest.raises(ModifyFailsVerification):
        # retargeting alone keeps the surface-breaking rewrite in place
        engine.submit_review_decision(
            case.case_id,
            verdict="modify",
            reviewer="sam",
            modified_units=[{"unit_id": rewrite.unit_id, "target": "src/pa/compat.py"}],
        )
    assert engine.review_tasks[case.case_id].status == "pending"


def test_modify_rejects_bad_deltas():
    engine, case = modify_world()
    manifest = next(u for u in case.patch.units if u.kind.value == "manifest_bump")
    with pytest.raises(ModifyFailsVerification):
        engine.submit_review_decision(
            case.case_id, verdict="modify", reviewer="sam", modified_units=None
        )
    with pytest.raises(ModifyFailsVerification):
        engine.submit_review_decision(
            case.case_id,
            verdict="modify",
            reviewer="sam",
            modified_units=[{"unit_id": "u-ghost", "drop": True}],
        )
    with pytest.raises(ModifyFailsVerification):
        # dropping the base drags every dependent unit with it
        engine.submit_review_decision(
            case.case_id,
            verdict="modify",
            reviewer="sam",
            modified_units=[{"unit_id": manifest.unit_id, "drop": True}],
        )
    assert engine.review_tasks[case.case_id].status == "pending"


# --- metrics and persistence ---


def test_metrics_aggregates_the_case_log():
    engine = seed_basic(Engine(reviewer=ScriptedReviewer(latency=600.0)))
    engine.submit_event(PATCH_BUMP, observed_at=0.0)
    engine.submit_event(SECURITY_CVE, observed_at=10000.0)
    m = engine.metrics()
    assert m["cases_total"] == 2
    assert m["dispositions"] == {"merged_auto": 1, "merged_after_review": 1}
    assert m["gate_type_histogram"] == {"Type1": 1, "Type3": 1}
    assert m["automation_rate"] == pytest.approx(0.5)
    assert m["rollback_frequency"] == 0.0
    assert m["pending_reviews"] == 0
    assert set(m["mtr_by_event"]) == set(engine.reports)
    assert m["mtr_seconds"] > 0
    assert m["policy_versions"] == [1]


def test_metrics_on_empty_engine():
    m = Engine().metrics()
    assert m["cases_total"] == 0
    assert m["mtr_seconds"] is None
    assert m["automation_rate"] is None


def test_save_load_round_trip(tmp_path):
    engine = seed_basic(Engine(reviewer=ScriptedReviewer()), extra_project="pb")
    engine.submit_event(PATCH_BUMP, observed_at=0.0)
    engine.submit_event(SECURITY_CVE, observed_at=10000.0)
    engine.submit_event({"source": "cve_feed", "id": "CVE-2025-9", "cvss": 3.0})
    root = engine.save(str(tmp_path / "state"))
    assert (root / "graph.json").exists() and (root / "state.json").exists()

    loaded = Engine.load(str(root))
    assert loaded.store.snapshot() == engine.store.snapshot()
    assert loaded.metrics() == engine.metrics()
    assert loaded.cases.to_dict() == engine.cases.to_dict()
    assert loaded.learning.to_dict() == engine.learning.to_dict()
    assert set(loaded.reports) == set(engine.reports)
    for eid, report in engine.reports.items():
        assert loaded.reports[eid].to_dict() == report.to_dict()
    assert loaded.advisories == engine.advisories

    # the revived engine keeps processing from where it stopped
    result = loaded.submit_event(
        {"source": "registry_feed", "pkg": "k1", "old": "1.2.4", "new": "1.2.5"},
        observed_at=20000.0,
    )
    assert result["created"] is True
    assert loaded.metrics()["cases_total"] == engine.metrics()["cases_total"] + 2
