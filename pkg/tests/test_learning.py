"""Feedback loop tests: signals, the four models, policy adaptation."""

import math

import pytest

from depcal.cases import UnknownCase
from depcal.learning import (
    FORTNIGHT,
    FeedbackSignal,
    InsufficientData,
    LearningLoop,
    MONTH,
    StrategyStats,
    TransformTemplate,
    WEEK,
)
from depcal.policy import PolicyConfig


def rec(i=0, **kw):
    from depcal.learning import CaseRecord

    base = dict(
        case_id=f"case-{i}",
        event_type="package_update",
        project="project:pa",
        project_class="medium",
        strategy="direct_commit",
        action_type="Type1",
        severity=0.5,
        urgency="scheduled",
        risk_components=(0.5, 0.5, 0.5, 0.5, 0.5, 0.5),
        confidence_components=(0.5, 0.5, 0.5, 0.5),
        tau_p=0.8,
        units=[],
        reverted_units=[],
        disposition="merged_auto",
        observed_at=float(i),
        disposition_time=float(i) + 100.0,
        policy_version=1,
    )
    base.update(kw)
    return CaseRecord(**base)


def signal(case_id="case-0", category="automated_outcome", **kw):
    base = dict(
        category=category,
        case_id=case_id,
        event_type="package_update",
        project="project:pa",
        strategy="direct_commit",
        success=True,
        at=0.0,
    )
    if category == "human_feedback":
        base["human_decision"] = "accept"
    base.update(kw)
    return FeedbackSignal(**base)


# --- signals ---


def test_signal_category_validation():
    with pytest.raises(ValueError, match="category"):
        signal(category="gossip").validate()
    signal().validate()


def test_signal_human_fields_contract():
    with pytest.raises(ValueError, match="human"):
        signal(human_decision="accept").validate()
    with pytest.raises(ValueError, match="human"):
        FeedbackSignal(
            category="human_feedback",
            case_id="c",
            event_type="package_update",
            project="project:pa",
            strategy="draft_for_review",
            success=True,
            at=0.0,
        ).validate()
    signal(category="human_feedback").validate()


def test_signal_round_trip():
    s = signal(category="human_feedback", approval_latency=120.0, override=False)
    assert FeedbackSignal.from_dict(s.to_dict()) == s


def test_record_rejects_unknown_case():
    loop = LearningLoop(known_cases=lambda cid: cid == "case-known")
    loop.record(signal(case_id="case-known"))
    with pytest.raises(UnknownCase):
        loop.record(signal(case_id="case-ghost"))
    assert len(loop.signals) == 1


# --- strategy stats (Model 1 arithmetic) ---


def test_strategy_effectiveness_formula():
    stats = StrategyStats(
        key=("package_update", "medium", "direct_commit"),
        successes=9,
        failures=1,
        rollbacks=1,
        human_interventions=2,
    )
    stats.recompute()
    want = 10 / 12 - 0.2 * (1 / 10) - 0.1 * (2 / 10)
    assert stats.effectiveness == pytest.approx(want, abs=1e-12)


def test_strategy_effectiveness_prior_and_clamp():
    empty = StrategyStats(key=("a", "b", "c"))
    empty.recompute()
    assert empty.effectiveness == 0.5  # Laplace prior with no evidence
    awful = StrategyStats(key=("a", "b", "c"), successes=0, failures=5, rollbacks=5, human_interventions=5)
    awful.recompute()
    assert 0.0 <= awful.effectiveness <= 1.0


def test_stats_round_trip():
    stats = StrategyStats(key=("x", "y", "z"), successes=3, failures=1)
    stats.recompute()
    assert StrategyStats.from_dict(stats.to_dict()) == stats


def test_model1_runs_on_case_count_cadence():
    loop = LearningLoop()
    for i in range(49):
        loop.on_case_finalized(
            rec(i, action_type="Type3", disposition="merged_after_review", human_verdict="accept"),
            [],
            now=float(i),
        )
    key = ("package_update", "medium", "direct_commit")
    assert loop.strategy_stats[key].successes == 49
    assert loop.strategy_stats[key].effectiveness == 0.5  # not yet recomputed
    loop.on_case_finalized(
        rec(49, action_type="Type3", disposition="merged_after_review", human_verdict="accept"),
        [],
        now=49.0,
    )
    assert loop.strategy_stats[key].effectiveness == pytest.approx(51 / 52 - 0.1)
    assert any(run["model"] == "strategy" for run in loop.model_runs)


def test_model1_runs_on_weekly_cadence():
    loop = LearningLoop()
    loop.on_case_finalized(rec(0), [], now=0.0)
    loop.advance_clock(WEEK)
    key = ("package_update", "medium", "direct_commit")
    assert loop.strategy_stats[key].effectiveness == pytest.approx(2 / 3)
    # two missed boundaries fire twice
    loop.advance_clock(3 * WEEK)
    strategy_runs = [run for run in loop.model_runs if run["model"] == "strategy"]
    assert len(strategy_runs) == 3


# --- templates (Model 4 arithmetic) ---


def test_template_deprecation_boundary():
    tpl = TransformTemplate(template_id="tpl-x", key=("package_update", "callsite_rewrite"))
    tpl.uses, tpl.successes = 9, 0
    tpl.recompute()
    assert tpl.deprecated is False  # under the use floor
    tpl.uses, tpl.successes = 10, 5
    tpl.recompute()
    assert tpl.success_rate == 0.5
    assert tpl.deprecated is True
    tpl.uses, tpl.successes = 10, 6
    tpl.recompute()
    assert tpl.deprecated is False  # rate exactly 0.6 is not below it


def test_template_match_scales_with_uses():
    loop = LearningLoop()
    assert loop.template_match("package_update", "callsite_rewrite") == 0.5
    loop.templates[("package_update", "callsite_rewrite")] = TransformTemplate(
        template_id="tpl-a", key=("package_update", "callsite_rewrite"), uses=10, successes=9
    )
    assert loop.template_match("package_update", "callsite_rewrite") == pytest.approx(0.75)
    loop.templates[("package_update", "callsite_rewrite")].uses = 40
    assert loop.template_match("package_update", "callsite_rewrite") == 1.0


def test_template_success_rate_fallbacks():
    loop = LearningLoop()
    assert loop.template_success_rate("package_update", "callsite_rewrite") == 0.3
    tpl = TransformTemplate(
        template_id="tpl-a", key=("package_update", "callsite_rewrite"), uses=20, successes=19
    )
    tpl.recompute()
    loop.templates[tpl.key] = tpl
    assert loop.template_success_rate("package_update", "callsite_rewrite") == pytest.approx(0.95)
    tpl.uses, tpl.successes = 20, 4
    tpl.recompute()
    assert tpl.deprecated is True
    assert loop.template_success_rate("package_update", "callsite_rewrite") == 0.3


def test_mine_templates_needs_twenty_unit_cases():
    loop = LearningLoop()
    for i in range(19):
        loop.records.append(rec(i, units=[("u0", "manifest_bump")]))
    assert loop.mine_templates(now=MONTH) == {}
    assert loop.model_runs[-1].get("skipped") is True


def test_mine_templates_counts_from_scratch():
    loop = LearningLoop()
    for i in range(25):
        reverted = ["u0"] if i < 5 else []
        loop.records.append(rec(i, units=[("u0", "manifest_bump")], reverted_units=reverted))
    mined = loop.mine_templates(now=MONTH)
    tpl = mined[("package_update", "manifest_bump")]
    assert tpl.uses == 25
    assert tpl.successes == 20
    assert tpl.success_rate == pytest.approx(0.8)
    assert tpl.template_id.startswith("tpl-")
    assert tpl.deprecated is False
    # a later run recounts the full history rather than accumulating
    again = loop.mine_templates(now=2 * MONTH)
    assert again[("package_update", "manifest_bump")].uses == 25


def test_mine_templates_rejected_cases_count_against():
    loop = LearningLoop()
    for i in range(20):
        disposition = "rejected_by_human" if i < 10 else "merged_after_review"
        loop.records.append(
            rec(i, units=[("u0", "callsite_rewrite")], disposition=disposition, action_type="Type3")
        )
    mined = loop.mine_templates(now=MONTH)
    tpl = mined[("package_update", "callsite_rewrite")]
    assert tpl.uses == 20
    assert tpl.successes == 10
    assert tpl.deprecated is True


def test_mine_templates_on_monthly_cadence():
    loop = LearningLoop()
    for i in range(25):
        loop.records.append(rec(i, units=[("u0", "manifest_bump")]))
    loop.advance_clock(MONTH)
    assert ("package_update", "manifest_bump") in loop.templates


# --- rollback-rate prior ---


def test_project_rollback_rate_prior_and_updates():
    loop = LearningLoop()
    assert loop.project_rollback_rate("project:pa") == 0.5  # (0+1)/(0+2)
    loop.records.append(rec(0, disposition="rolled_back_full"))
    loop.records.append(rec(1))
    assert loop.project_rollback_rate("project:pa") == pytest.approx(2 / 4)
    loop.records.append(rec(2))
    loop.records.append(rec(3))
    assert loop.project_rollback_rate("project:pa") == pytest.approx(2 / 6)
    assert loop.project_rollback_rate("project:other") == 0.5


def test_edge_outcome_counters():
    loop = LearningLoop()
    assert loop.edge_counts(("project:pa", "package:k1")) == (0, 0)
    loop.note_edge_outcome(("project:pa", "package:k1"), failed=True)
    loop.note_edge_outcome(("project:pa", "package:k1"), failed=False)
    assert loop.edge_counts(("project:pa", "package:k1")) == (1, 2)


# --- Model 2: score recalibration ---


def test_recalibration_needs_thirty_fresh_cases():
    loop = LearningLoop()
    for i in range(29):
        loop.records.append(rec(i))
    with pytest.raises(InsufficientData):
        loop.recalibrate_scores(now=WEEK)


def risk_comps(flag):
    return (1.0 if flag else 0.0, 0.2, 0.2, 0.2, 0.2, 0.2)


def test_recalibration_moves_weight_toward_predictive_component():
    loop = LearningLoop()
    for i in range(40):
        failed = i % 2 == 0
        loop.records.append(
            rec(
                i,
                risk_components=risk_comps(failed),
                confidence_components=(0.3, 0.3, 0.3, 0.3),
                disposition="rolled_back_full" if failed else "merged_auto",
            )
        )
    old_w0 = loop.policy.risk_weights[0]
    result = loop.recalibrate_scores(now=WEEK)
    assert result["risk"]["deployed"] is True
    assert loop.policy.risk_weights[0] > old_w0
    assert sum(loop.policy.risk_weights) == pytest.approx(1.0, abs=1e-9)
    assert loop.policy.version > 1
    assert loop.update_history[-1] is result
    # marker advanced: an immediate re-run lacks fresh cases
    with pytest.raises(InsufficientData):
        loop.recalibrate_scores(now=WEEK)


def test_recalibration_holdout_guard_blocks_worse_weights():
    loop = LearningLoop()
    for i in range(40):
        failed = i % 2 == 0
        # the last eight cases reverse the correlation the training rows show
        comp0_high = failed if i < 32 else not failed
        loop.records.append(
            rec(
                i,
                risk_components=risk_comps(comp0_high),
                confidence_components=(0.3, 0.3, 0.3, 0.3),
                disposition="rolled_back_full" if failed else "merged_auto",
            )
        )
    before = loop.policy.risk_weights
    result = loop.recalibrate_scores(now=WEEK)
    assert result["risk"]["deployed"] is False
    assert result["risk"]["brier_new"] > result["risk"]["brier_old"]
    assert loop.policy.risk_weights == before


def test_recalibration_fires_weekly_via_clock():
    loop = LearningLoop()
    for i in range(35):
        loop.records.append(rec(i, risk_components=risk_comps(i % 2 == 0)))
    loop.advance_clock(WEEK)
    assert any(run["model"] == "scores" for run in loop.model_runs)


# --- Model 3: adequacy analysis ---


def test_adequacy_skips_without_new_rollbacks():
    loop = LearningLoop()
    loop.records.append(rec(0))
    assert loop.analyze_test_adequacy(now=FORTNIGHT) == []
    assert loop.model_runs[-1].get("skipped") is True


def test_adequacy_ranks_and_recommends_top_decile():
    loop = LearningLoop()
    for i in range(4):
        loop.records.append(
            rec(
                i,
                project="project:flaky",
                tau_p=0.2,
                disposition="rolled_back_full" if i < 2 else "merged_auto",
            )
        )
    for p in range(11):
        loop.records.append(rec(100 + p, project=f"project:ok{p}", tau_p=0.9))
    fresh = loop.analyze_test_adequacy(now=FORTNIGHT)
    assert len(fresh) == 1  # ceil(12/10) = 2 slots, but only one positive score
    top = fresh[0]
    assert top["project"] == "project:flaky"
    assert top["rollback_rate"] == pytest.approx(0.5)
    assert top["score"] == pytest.approx(0.5 * (1 - 0.2))
    assert loop.recommendations == fresh


def test_adequacy_nudges_priority_weight_toward_coverage():
    loop = LearningLoop()
    # low-tau records roll back at 0.5, high-tau at 0
    for i in range(10):
        loop.records.append(
            rec(
                i,
                project="project:low",
                tau_p=0.2,
                disposition="rolled_back_full" if i % 2 == 0 else "merged_auto",
            )
        )
    for i in range(10, 20):
        loop.records.append(rec(i, project="project:high", tau_p=0.9))
    w1, w2, w3 = loop.policy.priority_weights
    loop.analyze_test_adequacy(now=FORTNIGHT)
    n1, n2, n3 = loop.policy.priority_weights
    assert n3 == pytest.approx(w3 + 0.02)
    assert sum((n1, n2, n3)) == pytest.approx(1.0, abs=1e-9)
    assert n1 / n2 == pytest.approx(w1 / w2)  # renormalization keeps the ratio


def test_adequacy_weight_nudge_caps_at_half():
    loop = LearningLoop(policy=PolicyConfig().evolve("cap test", priority_weights=(0.3, 0.2, 0.5)))
    for i in range(10):
        loop.records.append(
            rec(i, project="project:low", tau_p=0.2, disposition="rolled_back_full")
        )
    version = loop.policy.version
    loop.analyze_test_adequacy(now=FORTNIGHT)
    assert loop.policy.priority_weights[2] == 0.5
    assert loop.policy.version == version  # capped nudge is a no-op, not an audit entry


# --- threshold adaptation ---


def window_of(loop, records):
    for r in records:
        loop.records.append(r)


def t1_window(failures=0, start=0):
    # distinct projects so the window never trips the per-project overrides
    rows = []
    for i in range(50):
        failed = i < failures
        rows.append(
            rec(
                start + i,
                project=f"project:w{start + i}",
                disposition="rolled_back_full" if failed else "merged_auto",
            )
        )
    return rows


def test_high_type1_failure_rate_tightens_theta():
    loop = LearningLoop()
    window_of(loop, t1_window(failures=3))
    loop.adapt_policies(now=1000.0)
    assert loop.policy.theta_r_low == pytest.approx(0.25)
    assert loop.policy.version == 2
    assert loop.adapt_marker == 50


def test_failure_rate_at_two_percent_exactly_does_not_tighten():
    loop = LearningLoop()
    window_of(loop, t1_window(failures=1))  # 1/50 = 0.02, not strictly greater
    loop.adapt_policies(now=1000.0)
    assert loop.policy.theta_r_low == 0.3


def test_theta_floor_is_respected_with_audit():
    policy = PolicyConfig().evolve("start low", theta_r_low=0.1)
    loop = LearningLoop(policy=policy)
    window_of(loop, t1_window(failures=5))
    before = loop.policy.version
    loop.adapt_policies(now=1000.0)
    assert loop.policy.theta_r_low == 0.1  # floor holds
    assert loop.policy.version == before + 1  # the decision is still audited
    assert loop.policy.audit[-1].field == "theta_r_low"


def test_slow_but_trusted_queue_relaxes_theta():
    policy = PolicyConfig().evolve("start tightened", theta_r_low=0.2)
    loop = LearningLoop(policy=policy)
    rows = t1_window(failures=0)
    for i in range(20):
        rows.append(
            rec(
                200 + i,
                project=f"project:r{i}",
                action_type="Type3",
                disposition="merged_after_review",
                review_latency=6 * 3600.0,
                human_verdict="accept",
            )
        )
    window_of(loop, rows)
    loop.adapt_policies(now=1000.0)
    assert loop.policy.theta_r_low == pytest.approx(0.25)


def test_relax_stops_at_published_ceiling():
    loop = LearningLoop()  # theta_r_low already at the 0.3 ceiling
    rows = t1_window(failures=0)
    for i in range(20):
        rows.append(
            rec(
                200 + i,
                project=f"project:r{i}",
                action_type="Type3",
                disposition="merged_after_review",
                review_latency=6 * 3600.0,
                human_verdict="accept",
            )
        )
    window_of(loop, rows)
    version = loop.policy.version
    loop.adapt_policies(now=1000.0)
    assert loop.policy.theta_r_low == 0.3
    assert loop.policy.version == version


def test_adapt_requires_full_window():
    loop = LearningLoop()
    window_of(loop, t1_window()[:49])
    with pytest.raises(InsufficientData):
        loop.adapt_policies(now=1000.0)


def test_adapt_fires_automatically_during_finalization():
    loop = LearningLoop()
    for i, row in enumerate(t1_window(failures=3)):
        loop.on_case_finalized(row, [], now=float(i))
    assert loop.policy.theta_r_low == pytest.approx(0.25)
    assert loop.adapt_marker == 50


# --- project override adaptation ---


def test_repeat_rollbacks_force_type3_override():
    loop = LearningLoop()
    rows = t1_window(failures=0)
    for i in range(3):
        rows.append(rec(300 + i, project="project:flaky", disposition="rolled_back_full"))
    window_of(loop, rows)
    loop.adapt_policies(now=1000.0)
    assert loop.policy.override_for("project:flaky") == {"force_type3": True}


def test_long_clean_streak_relaxes_tau_override():
    loop = LearningLoop()
    rows = []
    for i in range(50):
        project = "project:steady" if i < 25 else "project:pa"
        rows.append(rec(i, project=project))
    window_of(loop, rows)
    loop.adapt_policies(now=1000.0)
    assert loop.policy.override_for("project:steady") == {"relaxed_tau": pytest.approx(0.7)}
    assert loop.policy.override_for("project:pa") == {"relaxed_tau": pytest.approx(0.7)}


def test_rollbacks_outrank_clean_streak():
    loop = LearningLoop()
    rows = t1_window(failures=0)
    for i in range(25):
        failed = i < 3
        rows.append(
            rec(
                300 + i,
                project="project:mixed",
                disposition="rolled_back_full" if failed else "merged_auto",
            )
        )
    window_of(loop, rows)
    loop.adapt_policies(now=1000.0)
    assert loop.policy.override_for("project:mixed") == {"force_type3": True}


def test_existing_override_is_not_rewritten():
    loop = LearningLoop()
    rows = t1_window(failures=0)
    for i in range(3):
        rows.append(
            rec(300 + i, project="project:flaky", action_type="Type3", disposition="rolled_back_full")
        )
    window_of(loop, rows)
    loop.adapt_policies(now=1000.0)
    version = loop.policy.version
    rows2 = t1_window(failures=0, start=500)
    for i in range(3):
        rows2.append(
            rec(600 + i, project="project:flaky", action_type="Type3", disposition="rolled_back_full")
        )
    window_of(loop, rows2)
    loop.adapt_policies(now=2000.0)
    assert loop.policy.override_for("project:flaky") == {"force_type3": True}
    assert loop.policy.version == version  # same override, no new audit entries


# --- urgency band adaptation ---


def band_rows(urgency, n, start, mtr, failed=False, action_type="Type1"):
    disposition = "rolled_back_full" if failed else (
        "merged_after_review" if action_type == "Type3" else "merged_auto"
    )
    return [
        rec(
            start + i,
            urgency=urgency,
            action_type=action_type,
            disposition=disposition,
            observed_at=float(start + i),
            disposition_time=float(start + i) + mtr,
        )
        for i in range(n)
    ]


def test_bands_shift_toward_immediate():
    loop = LearningLoop()
    window_of(loop, band_rows("immediate", 25, 0, mtr=100.0))
    window_of(loop, band_rows("scheduled", 25, 25, mtr=10000.0))
    loop.adapt_policies(now=1000.0)
    band = loop.policy.urgency_bands["package_update"]
    assert band == {"low": 0.3, "high": pytest.approx(0.65)}


def test_bands_shift_toward_advisory():
    loop = LearningLoop()
    window_of(loop, band_rows("advisory", 50, 0, mtr=100.0))
    window_of(loop, band_rows("immediate", 10, 50, mtr=20000.0, failed=True, action_type="Type3"))
    loop.adapt_policies(now=1000.0)
    band = loop.policy.urgency_bands["package_update"]
    assert band == {"low": pytest.approx(0.35), "high": 0.7}


def test_bands_widen_toward_scheduled():
    loop = LearningLoop()
    window_of(loop, band_rows("scheduled", 50, 0, mtr=100.0))
    window_of(loop, band_rows("immediate", 10, 50, mtr=20000.0, failed=True, action_type="Type3"))
    loop.adapt_policies(now=1000.0)
    band = loop.policy.urgency_bands["package_update"]
    assert band == {"low": pytest.approx(0.25), "high": pytest.approx(0.75)}


def test_single_band_event_type_left_alone():
    loop = LearningLoop()
    window_of(loop, band_rows("scheduled", 50, 0, mtr=100.0))
    loop.adapt_policies(now=1000.0)
    assert loop.policy.urgency_bands["package_update"] == {"low": 0.3, "high": 0.7}


# --- persistence ---


def test_loop_round_trip():
    loop = LearningLoop(clock_start=1000.0)
    for i, row in enumerate(t1_window(failures=3)):
        loop.on_case_finalized(row, [signal(case_id=row.case_id, at=float(i))], now=float(i))
    for i in range(25):
        loop.records.append(rec(500 + i, units=[("u0", "manifest_bump")]))
    loop.mine_templates(now=MONTH)
    loop.note_edge_outcome(("project:pa", "package:k1"), failed=True)
    data = loop.to_dict()
    again = LearningLoop.from_dict(data)
    assert again.to_dict() == data
    assert again.policy.theta_r_low == loop.policy.theta_r_low
    assert again.adapt_marker == loop.adapt_marker
    assert again.template_match("package_update", "manifest_bump") == loop.template_match(
        "package_update", "manifest_bump"
    )
