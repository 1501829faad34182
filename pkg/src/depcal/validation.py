"""Progressive three-level validation, rollback decisions, dispositions.

Validation is simulated: a profile either declares level outcomes (exact
scenario replays) or derives them from a seeded RNG (volume runs for the
learning loop). Levels run cheapest-first and stop at the first failure.
Rollback is differentiated by failure kind: build failures revert
everything immediately, test regressions revert the failed units' closure
when few enough units failed, performance regressions revert only when the
measured delta is worse than the policy budget.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .cases import (
    CalibrationCase,
    CaseStatus,
    Disposition,
    MERGED_DISPOSITIONS,
    ReviewDecision,
)
from .gating import ActionType
from .learning import FeedbackSignal
from .patching import Patch, partial_apply_sets
from .policy import PolicyConfig
from .util import clamp01, stable_seed

LEVEL_DURATION_BANDS = {1: (1.0, 10.0), 2: (60.0, 600.0), 3: (600.0, 7200.0)}
_DEFAULT_FAILURE_KIND = {1: "build_failure", 2: "test_regression", 3: "test_regression"}


class MissingReview(Exception):
    """A disposition that requires a human decision was attempted without one."""


class UnverifiedPatch(Exception):
    pass


@dataclass
class ValidationProfile:
    mode: str = "seeded_stochastic"
    # fixture_declared: explicit failures [{level, failure_kind, failed_units}]
    declared_failures: list = field(default_factory=list)
    # seeded_stochastic: base pass probability per level plus per-unit-kind deltas
    level_pass_probs: tuple = (0.98, 0.95, 0.92)
    unit_kind_modifiers: dict = field(default_factory=dict)
    performance_delta: float = 0.0
    seed: int = 0

    MODES = ("fixture_declared", "seeded_stochastic")

    def validate(self) -> None:
        if self.mode not in self.MODES:
            raise ValueError(f"unknown profile mode {self.mode!r}")
        for p in self.level_pass_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"pass probability {p} outside [0, 1]")
        for entry in self.declared_failures:
            if entry["level"] not in (1, 2, 3):
                raise ValueError(f"declared failure at unknown level {entry['level']}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "declared_failures": list(self.declared_failures),
            "level_pass_probs": list(self.level_pass_probs),
            "unit_kind_modifiers": dict(self.unit_kind_modifiers),
            "performance_delta": self.performance_delta,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationProfile":
        return cls(
            mode=data.get("mode", "seeded_stochastic"),
            declared_failures=list(data.get("declared_failures", [])),
            level_pass_probs=tuple(data.get("level_pass_probs", (0.98, 0.95, 0.92))),
            unit_kind_modifiers=dict(data.get("unit_kind_modifiers", {})),
            performance_delta=data.get("performance_delta", 0.0),
            seed=data.get("seed", 0),
        )


@dataclass
class LevelResult:
    level: int
    passed: bool
    failed_units: list
    failure_kind: str
    duration_simulated: float

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "passed": self.passed,
            "failed_units": sorted(self.failed_units),
            "failure_kind": self.failure_kind,
            "duration_simulated": self.duration_simulated,
        }


@dataclass
class ValidationOutcome:
    results: list
    stopped_at_level: Optional[int]
    performance_delta: float

    @property
    def passed(self) -> bool:
        return self.stopped_at_level is None

    @property
    def total_duration(self) -> float:
        return sum(r.duration_simulated for r in self.results)

    @property
    def failure_kind(self) -> str:
        if self.stopped_at_level is None:
            return "none"
        return self.results[-1].failure_kind

    @property
    def failed_units(self) -> set:
        if self.stopped_at_level is None:
            return set()
        return set(self.results[-1].failed_units)

    def to_dict(self) -> dict:
        return {
            "results": [r.to_dict() for r in self.results],
            "stopped_at_level": self.stopped_at_level,
            "performance_delta": self.performance_delta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationOutcome":
        return cls(
            results=[
                LevelResult(
                    level=r["level"],
                    passed=r["passed"],
                    failed_units=list(r["failed_units"]),
                    failure_kind=r["failure_kind"],
                    duration_simulated=r["duration_simulated"],
                )
                for r in data["results"]
            ],
            stopped_at_level=data["stopped_at_level"],
            performance_delta=data["performance_delta"],
        )


@dataclass
class RollbackDecision:
    mode: str
    reverted_units: set
    rationale: str

    MODES = ("none", "immediate_full", "threshold_partial", "policy_perf")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "reverted_units": sorted(self.reverted_units),
            "rationale": self.rationale,
        }


def run(patch: Patch, profile: ValidationProfile, force: bool = False) -> ValidationOutcome:
    """Execute levels 1..3 in order, stopping at the first failure."""
    if not patch.verified and not force:
        raise UnverifiedPatch(patch.patch_id)
    profile.validate()
    rng = random.Random(stable_seed(profile.seed, patch.patch_id))
    declared = {entry["level"]: entry for entry in profile.declared_failures}

    results = []
    stopped = None
    for level in (1, 2, 3):
        lo, hi = LEVEL_DURATION_BANDS[level]
        duration = round(rng.uniform(lo, hi), 3)
        passed, failed_units, kind = _level_outcome(patch, profile, declared, level, rng)
        results.append(
            LevelResult(
                level=level,
                passed=passed,
                failed_units=sorted(failed_units),
                failure_kind=kind,
                duration_simulated=duration,
            )
        )
        if not passed:
            stopped = level
            break
    return ValidationOutcome(
        results=results, stopped_at_level=stopped, performance_delta=profile.performance_delta
    )


def _level_outcome(patch, profile, declared, level, rng):
    if profile.mode == "fixture_declared":
        entry = declared.get(level)
        if entry is None:
            return True, [], "none"
        return (
            False,
            list(entry.get("failed_units", [u.unit_id for u in patch.units])),
            entry.get("failure_kind", _DEFAULT_FAILURE_KIND[level]),
        )

    base = profile.level_pass_probs[level - 1]
    kinds_present = {u.kind.value for u in patch.units}
    prob = clamp01(
        base + sum(profile.unit_kind_modifiers.get(k, 0.0) for k in sorted(kinds_present))
    )
    roll = rng.random()
    if roll >= prob:
        if level == 1:
            return False, [u.unit_id for u in patch.units], "build_failure"
        candidates = sorted(u.unit_id for u in patch.units)
        picked = [uid for uid in candidates if rng.random() < 0.35]
        if not picked:
            picked = [candidates[rng.randrange(len(candidates))]]
        return False, picked, "test_regression"
    if level == 3 and profile.performance_delta < 0.0:
        return False, [], "perf_degradation"
    return True, [], "none"


def decide_rollback(
    outcome: ValidationOutcome, patch: Patch, policy: Optional[PolicyConfig] = None
) -> RollbackDecision:
    policy = policy or PolicyConfig()
    all_units = {u.unit_id for u in patch.units}

    if outcome.passed:
        return RollbackDecision(mode="none", reverted_units=set(), rationale="all levels passed")

    kind = outcome.failure_kind
    if kind == "build_failure":
        return RollbackDecision(
            mode="immediate_full",
            reverted_units=set(all_units),
            rationale=f"build failure at level {outcome.stopped_at_level}",
        )
    if kind == "test_regression":
        failed = outcome.failed_units
        fraction = len(failed) / len(all_units) if all_units else 0.0
        if fraction <= policy.partial_threshold:
            reverted = partial_apply_sets(patch, failed)["reverted"]
            return RollbackDecision(
                mode="threshold_partial",
                reverted_units=set(reverted),
                rationale=(
                    f"{len(failed)}/{len(all_units)} units regressed"
                    f" (fraction {fraction:.3f} within {policy.partial_threshold})"
                ),
            )
        return RollbackDecision(
            mode="immediate_full",
            reverted_units=set(all_units),
            rationale=(
                f"{len(failed)}/{len(all_units)} units regressed"
                f" (fraction {fraction:.3f} exceeds {policy.partial_threshold})"
            ),
        )
    # perf_degradation: policy decides against the budget
    if outcome.performance_delta < policy.perf_budget:
        return RollbackDecision(
            mode="policy_perf",
            reverted_units=set(all_units),
            rationale=(
                f"performance delta {outcome.performance_delta:+.3f} worse than"
                f" budget {policy.perf_budget:+.3f}"
            ),
        )
    return RollbackDecision(
        mode="none",
        reverted_units=set(),
        rationale=(
            f"performance delta {outcome.performance_delta:+.3f} within"
            f" budget {policy.perf_budget:+.3f}"
        ),
    )


def needs_escalation(action: ActionType, rollback: RollbackDecision) -> bool:
    """Type2 failures go to a human before the case closes."""
    return action is ActionType.TYPE2 and rollback.mode != "none"


def finalize_case(
    case: CalibrationCase,
    outcome: Optional[ValidationOutcome],
    rollback: Optional[RollbackDecision],
    review: Optional[ReviewDecision],
    now: float,
) -> tuple:
    """Assign the terminal disposition and emit feedback signals."""
    action = case.gate_trace.action_type

    if action is ActionType.TYPE4:
        disposition = Disposition.ADVISORY_CLOSED
    elif review is not None and review.verdict == "reject":
        disposition = Disposition.REJECTED_BY_HUMAN
    else:
        if action is ActionType.TYPE3 and review is None:
            raise MissingReview(f"{case.case_id}: Type3 requires a review decision")
        if rollback is not None and needs_escalation(action, rollback) and review is None:
            raise MissingReview(f"{case.case_id}: escalated Type2 requires a review decision")
        if rollback is None or rollback.mode == "none":
            disposition = (
                Disposition.MERGED_AFTER_REVIEW if review is not None else Disposition.MERGED_AUTO
            )
        elif case.patch and rollback.reverted_units >= {u.unit_id for u in case.patch.units}:
            disposition = Disposition.ROLLED_BACK_FULL
        else:
            disposition = Disposition.ROLLED_BACK_PARTIAL

    case.validation_outcome = outcome.to_dict() if outcome else None
    case.rollback = rollback.to_dict() if rollback else None
    case.review = review
    case.disposition = disposition
    case.disposition_time = now
    case.status = CaseStatus.FINALIZED

    strategy = case.plan.strategy.value
    signals = [
        FeedbackSignal(
            category="automated_outcome",
            case_id=case.case_id,
            event_type=case.event_type,
            project=case.project,
            strategy=strategy,
            success=disposition in MERGED_DISPOSITIONS or disposition is Disposition.ADVISORY_CLOSED,
            at=now,
            rollback_kind=rollback.mode if rollback and rollback.reverted_units else None,
        )
    ]
    if review is not None:
        signals.append(
            FeedbackSignal(
                category="human_feedback",
                case_id=case.case_id,
                event_type=case.event_type,
                project=case.project,
                strategy=strategy,
                success=review.verdict != "reject",
                at=now,
                approval_latency=max(0.0, review.decided_at - case.created_at),
                human_decision=review.verdict,
                override=review.verdict == "modify",
            )
        )
    if disposition in MERGED_DISPOSITIONS:
        signals.append(
            FeedbackSignal(
                category="business_outcome",
                case_id=case.case_id,
                event_type=case.event_type,
                project=case.project,
                strategy=strategy,
                success=True,
                at=now,
                mtr_contrib=max(0.0, now - case.observed_at),
            )
        )
    for signal in signals:
        signal.validate()
    return disposition, signals
