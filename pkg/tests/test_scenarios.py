"""Fixture replay, the ecosystem generator, and the adaptation harness."""

import json
from pathlib import Path

import pytest

from depcal.graph import EdgeKind, NodeKind
from depcal.scenarios import (
    EmptyLog,
    FIXTURE_DIR,
    FixtureAssertionFailed,
    InfeasibleParams,
    MalformedFixture,
    ScenarioReport,
    build_graph,
    builtin_fixture_names,
    closed_loop_harness,
    compute_metrics,
    generate_ecosystem,
    load_fixture,
    micro_fixture_g3,
    run_scenario,
)
from depcal.graph import GraphStore


# --- fixture loading ---


def test_builtin_fixture_inventory():
    assert builtin_fixture_names() == ["g3", "scenario1", "scenario2", "scenario3"]


def test_bundled_micro_fixture_matches_the_programmatic_one():
    on_disk = json.loads((FIXTURE_DIR / "g3.json").read_text(encoding="utf-8"))
    assert on_disk == micro_fixture_g3()


def test_load_fixture_accepts_dict_name_and_path():
    assert load_fixture(micro_fixture_g3())["name"] == "micro-g3"
    assert load_fixture("g3")["name"] == "micro-g3"
    assert load_fixture(FIXTURE_DIR / "g3.json")["name"] == "micro-g3"
    with pytest.raises(MalformedFixture, match="no fixture"):
        load_fixture("scenario99")


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda f: f.pop("graph"), "graph"),
        (lambda f: f.pop("events"), "events"),
        (
            lambda f: f["graph"]["edges"].append(
                {"kind": "depends_on", "src": "project:p1", "dst": "package:ghost"}
            ),
            "not among bootstrap nodes",
        ),
        (
            lambda f: f["events"].insert(
                0, {"at": 99.0, "record": {"source": "cve_feed", "id": "X", "cvss": 1.0}}
            ),
            "non-decreasing",
        ),
        (lambda f: f["events"].append({"at": 5.0}), "missing 'record'"),
        (
            lambda f: f.setdefault("profiles", {}).setdefault("ghost", {}),
            "unknown project",
        ),
    ],
)
def test_malformed_fixtures_are_rejected(mutate, message):
    fixture = micro_fixture_g3()
    mutate(fixture)
    with pytest.raises(MalformedFixture, match=message):
        load_fixture(fixture)


@pytest.mark.parametrize(
    "spec,message",
    [
        ({"nodes": [{"kind": "warehouse", "key": "w1"}]}, "unknown node kind"),
        ({"nodes": [{"kind": "project"}]}, "missing 'repo_id'"),
        ({"nodes": [{"kind": "project", "key": "p", "budget": 9}]}, "bad project node fields"),
        (
            {
                "nodes": [{"kind": "project", "key": "p"}],
                "edges": [{"kind": "sponsors", "src": "project:p", "dst": "project:p"}],
            },
            "bad edge kind",
        ),
        (
            {
                "nodes": [{"kind": "project", "key": "p"}],
                "edges": [{"kind": "depends_on", "src": "project:p"}],
            },
            "missing endpoints",
        ),
    ],
)
def test_graph_bootstrap_rejects_bad_specs(spec, message):
    with pytest.raises(MalformedFixture, match=message):
        build_graph(GraphStore(), spec)


def test_unknown_assertion_check_is_rejected():
    fixture = micro_fixture_g3()
    fixture["assertions"].append({"check": "vibes", "equals": 1})
    with pytest.raises(MalformedFixture, match="unknown assertion check"):
        run_scenario(fixture)


def test_wrong_pinned_score_fails_the_replay():
    fixture = micro_fixture_g3()
    fixture["assertions"][0]["expect"]["project:p1"] = 0.31
    with pytest.raises(FixtureAssertionFailed, match="impact_scores"):
        run_scenario(fixture)


# --- bundled replays ---


@pytest.mark.parametrize(
    "name,cases,checked",
    [("g3", 2, 4), ("scenario1", 4, 12), ("scenario2", 3, 11), ("scenario3", 3, 6)],
)
def test_bundled_fixture_replays_green(name, cases, checked):
    engine, report = run_scenario(name)
    assert report.metrics["cases_total"] == cases
    assert report.assertions_checked == checked
    assert report.pending_reviews == 0
    report.validate()


def test_release_scenario_mixes_all_automation_grades():
    _, report = run_scenario("scenario1")
    assert report.metrics["gate_type_histogram"] == {"Type1": 2, "Type2": 1, "Type3": 1}
    assert report.metrics["dispositions"] == {"merged_auto": 3, "merged_after_review": 1}


def test_base_image_scenario_is_fully_supervised():
    _, report = run_scenario("scenario2")
    assert report.metrics["gate_type_histogram"] == {"Type3": 3}
    assert report.metrics["dispositions"] == {"merged_after_review": 3}
    assert report.metrics["automation_rate"] == 0.0


def test_interactive_mode_parks_review_cases():
    engine, report = run_scenario("scenario2", interactive=True)
    assert report.pending_reviews == 3
    assert report.metrics["cases_total"] == 0
    assert all(c.disposition is None for c in engine.cases.all())


def test_replay_report_is_deterministic():
    _, first = run_scenario("scenario1")
    _, second = run_scenario("scenario1")
    assert first.to_canonical_bytes() == second.to_canonical_bytes()


def test_report_table_rendering():
    _, report = run_scenario("scenario1")
    table = report.to_table()
    assert "logger-release" in table
    assert "cases: 4" in table
    assert "mtr:" in table


# --- metrics over a case log ---


def test_metrics_match_the_replay_report():
    engine, report = run_scenario("scenario1")
    finalized = [c for c in engine.cases.all() if c.disposition is not None]
    assert compute_metrics(finalized) == report.metrics


def test_metrics_on_empty_log_raise():
    with pytest.raises(EmptyLog):
        compute_metrics([])


def test_report_invariant_catches_mismatched_histogram():
    report = ScenarioReport(
        name="broken",
        metrics={
            "cases_total": 2,
            "dispositions": {"merged_auto": 2},
            "gate_type_histogram": {"Type1": 1},
        },
    )
    with pytest.raises(FixtureAssertionFailed, match="gate histogram"):
        report.validate()


# --- ecosystem generator ---


def test_generator_hits_requested_counts():
    store, stats = generate_ecosystem({"projects": 50, "packages": 120}, seed=7)
    assert stats["projects"] == 50 and stats["packages"] == 120
    assert stats["apis"] == 240  # two per package
    assert len(list(store.nodes(NodeKind.PROJECT))) == 50
    assert len(list(store.nodes(NodeKind.PACKAGE))) == 120
    for project in store.nodes(NodeKind.PROJECT):
        assert len(store.out_edges(project, EdgeKind.DEPENDS_ON)) >= 1
    assert sum(stats["package_in_degree_histogram"].values()) <= 120


def test_generator_is_deterministic_per_seed():
    a_store, a_stats = generate_ecosystem({"projects": 12, "packages": 20}, seed=3)
    b_store, b_stats = generate_ecosystem({"projects": 12, "packages": 20}, seed=3)
    assert a_store.snapshot() == b_store.snapshot()
    assert a_stats == b_stats
    c_store, _ = generate_ecosystem({"projects": 12, "packages": 20}, seed=4)
    assert c_store.snapshot() != a_store.snapshot()


def test_generator_handles_empty_world():
    store, stats = generate_ecosystem({"projects": 0, "packages": 0})
    assert stats["projects"] == 0 and stats["dependency_edges"] == 0
    assert list(store.nodes(NodeKind.PROJECT)) == []


@pytest.mark.parametrize(
    "params",
    [
        {"projects": 5, "packages": 0},
        {"projects": -1, "packages": 10},
        {"projects": 2, "packages": 2, "criticality_mix": {}},
        {"projects": 2, "packages": 2, "criticality_mix": {"low": -1.0, "high": 2.0}},
        {"projects": 2, "packages": 2, "criticality_mix": {"low": 0.0}},
    ],
)
def test_generator_rejects_infeasible_params(params):
    with pytest.raises(InfeasibleParams):
        generate_ecosystem(params)


# --- adaptation harness ---


def test_harness_converges_after_first_window():
    out = closed_loop_harness(cases=160)
    windows = out["windows"]
    assert len(windows) == 2
    first, second = windows
    assert first["t1_failure_rate"] > 0.02
    assert first["theta_r_low"] == pytest.approx(0.25)
    assert first["forced_projects"] == ["project:svc-a"]
    assert second["t1_failure_rate"] <= 0.02
    engine = out["engine"]
    assert engine.policy.override_for("project:svc-a") == {"force_type3": True}
    # the flaky project's later cases all run supervised
    flaky = [c for c in engine.cases.all() if c.project == "project:svc-a"]
    assert any(c.action_type == "Type3" for c in flaky)
