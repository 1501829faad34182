"""Feedback-driven learning: signal log, four models, policy adaptation.

The loop owns the live PolicyConfig. Case outcomes arrive as feedback
signals plus a flat training record per case; four models consume them at
different cadences on the simulated clock:

  Model 1  strategy effectiveness       every 50 cases or weekly
  Model 2  score-weight recalibration   weekly, holdout-guarded
  Model 3  test-adequacy analysis       bi-weekly
  Model 4  transform-template mining    monthly

adapt_policies runs every 50 Type1/Type2 cases and moves gate thresholds,
per-project overrides, and urgency band edges, always within declared
bounds and always with an audit entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .cases import UnknownCase
from .policy import PolicyConfig
from .util import clamp01, content_hash

WEEK = 7 * 86400.0
FORTNIGHT = 14 * 86400.0
MONTH = 30 * 86400.0

# tau split for Model 3's under-tested vs well-tested buckets
LOW_TAU = 0.5


class InsufficientData(Exception):
    pass


@dataclass
class FeedbackSignal:
    category: str
    case_id: str
    event_type: str
    project: str
    strategy: str
    success: bool
    at: float
    rollback_kind: Optional[str] = None
    approval_latency: Optional[float] = None
    human_decision: Optional[str] = None
    override: Optional[bool] = None
    mtr_contrib: Optional[float] = None
    satisfaction: Optional[float] = None

    CATEGORIES = ("automated_outcome", "human_feedback", "business_outcome")

    def validate(self) -> None:
        if self.category not in self.CATEGORIES:
            raise ValueError(f"unknown signal category {self.category!r}")
        human_fields = self.human_decision is not None
        if (self.category == "human_feedback") != human_fields:
            raise ValueError("human decision fields present iff category is human_feedback")

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "case_id": self.case_id,
            "event_type": self.event_type,
            "project": self.project,
            "strategy": self.strategy,
            "success": self.success,
            "at": self.at,
            "rollback_kind": self.rollback_kind,
            "approval_latency": self.approval_latency,
            "human_decision": self.human_decision,
            "override": self.override,
            "mtr_contrib": self.mtr_contrib,
            "satisfaction": self.satisfaction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackSignal":
        return cls(**data)


@dataclass
class StrategyStats:
    key: tuple
    successes: int = 0
    failures: int = 0
    rollbacks: int = 0
    human_interventions: int = 0
    effectiveness: float = 0.5

    def recompute(self) -> None:
        cases = self.successes + self.failures
        rollback_rate = self.rollbacks / cases if cases else 0.0
        intervention_rate = self.human_interventions / cases if cases else 0.0
        base = (self.successes + 1) / (self.successes + self.failures + 2)
        self.effectiveness = clamp01(base - 0.2 * rollback_rate - 0.1 * intervention_rate)

    def to_dict(self) -> dict:
        return {
            "key": list(self.key),
            "successes": self.successes,
            "failures": self.failures,
            "rollbacks": self.rollbacks,
            "human_interventions": self.human_interventions,
            "effectiveness": self.effectiveness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StrategyStats":
        return cls(
            key=tuple(data["key"]),
            successes=data["successes"],
            failures=data["failures"],
            rollbacks=data["rollbacks"],
            human_interventions=data["human_interventions"],
            effectiveness=data["effectiveness"],
        )


@dataclass
class TransformTemplate:
    template_id: str
    key: tuple
    uses: int = 0
    successes: int = 0
    success_rate: float = 0.0
    deprecated: bool = False

    def recompute(self) -> None:
        self.success_rate = self.successes / self.uses if self.uses else 0.0
        self.deprecated = self.uses >= 10 and self.success_rate < 0.6

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "key": list(self.key),
            "uses": self.uses,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "deprecated": self.deprecated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransformTemplate":
        return cls(
            template_id=data["template_id"],
            key=tuple(data["key"]),
            uses=data["uses"],
            successes=data["successes"],
            success_rate=data["success_rate"],
            deprecated=data["deprecated"],
        )


@dataclass
class CaseRecord:
    """Flat per-case training row consumed by the models."""

    case_id: str
    event_type: str
    project: str
    project_class: str
    strategy: str
    action_type: str
    severity: float
    urgency: str
    risk_components: tuple
    confidence_components: tuple
    tau_p: float
    units: list
    reverted_units: list
    disposition: str
    observed_at: float
    disposition_time: float
    policy_version: int
    review_latency: Optional[float] = None
    human_verdict: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.disposition in ("rolled_back_partial", "rolled_back_full", "rejected_by_human")

    @property
    def rolled_back(self) -> bool:
        return self.disposition in ("rolled_back_partial", "rolled_back_full")

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "event_type": self.event_type,
            "project": self.project,
            "project_class": self.project_class,
            "strategy": self.strategy,
            "action_type": self.action_type,
            "severity": self.severity,
            "urgency": self.urgency,
            "risk_components": list(self.risk_components),
            "confidence_components": list(self.confidence_components),
            "tau_p": self.tau_p,
            "units": [list(u) for u in self.units],
            "reverted_units": list(self.reverted_units),
            "disposition": self.disposition,
            "observed_at": self.observed_at,
            "disposition_time": self.disposition_time,
            "policy_version": self.policy_version,
            "review_latency": self.review_latency,
            "human_verdict": self.human_verdict,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CaseRecord":
        data = dict(data)
        data["risk_components"] = tuple(data["risk_components"])
        data["confidence_components"] = tuple(data["confidence_components"])
        data["units"] = [tuple(u) for u in data["units"]]
        return cls(**data)


def _correlation(xs: list, ys: list) -> float:
    n = len(xs)
    if n < 2:
        return 0.0
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        return 0.0
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return cov / math.sqrt(var_x * var_y)


def _brier(weights: Iterable[float], rows: list, targets: list) -> float:
    ws = list(weights)
    total = 0.0
    for comps, target in zip(rows, targets):
        pred = sum(w * c for w, c in zip(ws, comps))
        total += (pred - target) ** 2
    return total / len(rows)


def _median(values: list) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


class LearningLoop:
    """Stateful owner of signals, models, and the evolving policy."""

    def __init__(
        self,
        policy: Optional[PolicyConfig] = None,
        clock_start: float = 0.0,
        known_cases: Optional[Callable[[str], bool]] = None,
    ) -> None:
        self.policy = policy or PolicyConfig()
        self.signals: list[FeedbackSignal] = []
        self.records: list[CaseRecord] = []
        self.strategy_stats: dict[tuple, StrategyStats] = {}
        self.templates: dict[tuple, TransformTemplate] = {}
        self.recommendations: list[dict] = []
        self.update_history: list[dict] = []
        self.model_runs: list[dict] = []
        self.known_cases = known_cases
        self._edge_counts: dict[tuple, list] = {}
        self._clock_start = clock_start
        self._next_week = clock_start + WEEK
        self._next_fortnight = clock_start + FORTNIGHT
        self._next_month = clock_start + MONTH
        self._model1_case_marker = 0
        self._model2_case_marker = 0
        self._model3_rollback_marker = 0
        self._model4_case_marker = 0
        self._adapt_marker = 0
        self._dirty_strategy_keys: set = set()

    # ---- interfaces consumed elsewhere ------------------------------------

    @property
    def adapt_marker(self) -> int:
        """Index into records where the current adaptation window starts."""
        return self._adapt_marker

    def template_match(self, event_type: str, unit_kind: str) -> float:
        """Confidence c1: how strongly this context matches a known pattern."""
        tpl = self.templates.get((event_type, unit_kind))
        if tpl is None:
            return 0.5
        return clamp01(0.5 + 0.5 * min(1.0, tpl.uses / 20.0))

    def template_success_rate(self, event_type: str, unit_kind: str) -> float:
        """Confidence c4: rule maturity."""
        tpl = self.templates.get((event_type, unit_kind))
        if tpl is None or tpl.deprecated:
            return 0.3
        return clamp01(tpl.success_rate)

    def project_rollback_rate(self, project_key: str) -> float:
        cases = sum(1 for r in self.records if r.project == project_key)
        rollbacks = sum(1 for r in self.records if r.project == project_key and r.rolled_back)
        return (rollbacks + 1) / (cases + 2)

    def edge_counts(self, ident: tuple) -> tuple:
        failures, calibrations = self._edge_counts.get(tuple(ident), (0, 0))
        return failures, calibrations

    def note_edge_outcome(self, ident: tuple, failed: bool) -> None:
        entry = self._edge_counts.setdefault(tuple(ident), [0, 0])
        entry[0] += 1 if failed else 0
        entry[1] += 1

    # ---- ingestion --------------------------------------------------------

    def record(self, signal: FeedbackSignal) -> None:
        signal.validate()
        if self.known_cases is not None and not self.known_cases(signal.case_id):
            raise UnknownCase(signal.case_id)
        self.signals.append(signal)

    def on_case_finalized(self, rec: CaseRecord, signals: Iterable[FeedbackSignal], now: float) -> None:
        """Append the training row, update counters, fire case-count cadences."""
        self.records.append(rec)
        for signal in signals:
            self.record(signal)

        key = (rec.event_type, rec.project_class, rec.strategy)
        stats = self.strategy_stats.setdefault(key, StrategyStats(key=key))
        if rec.failed:
            stats.failures += 1
        else:
            stats.successes += 1
        if rec.rolled_back:
            stats.rollbacks += 1
        if rec.human_verdict is not None:
            stats.human_interventions += 1
        self._dirty_strategy_keys.add(key)

        if len(self.records) % 50 == 0:
            self.update_strategy_model(now)
        t1t2 = sum(
            1
            for r in self.records[self._adapt_marker :]
            if r.action_type in ("Type1", "Type2")
        )
        if t1t2 >= self.policy.adapt_case_interval:
            self.adapt_policies(now)

    def advance_clock(self, now: float) -> None:
        """Fire the temporal cadences for every boundary crossed by now."""
        while self._next_week <= now:
            at = self._next_week
            self.update_strategy_model(at)
            try:
                self.recalibrate_scores(at)
            except InsufficientData:
                pass
            self._next_week += WEEK
        while self._next_fortnight <= now:
            self.analyze_test_adequacy(self._next_fortnight)
            self._next_fortnight += FORTNIGHT
        while self._next_month <= now:
            self.mine_templates(self._next_month)
            self._next_month += MONTH

    # ---- Model 1: strategy effectiveness ----------------------------------

    def update_strategy_model(self, now: float) -> dict:
        deltas = {}
        for key in sorted(self._dirty_strategy_keys):
            stats = self.strategy_stats[key]
            before = stats.effectiveness
            stats.recompute()
            deltas[key] = (before, stats.effectiveness)
        self._dirty_strategy_keys.clear()
        self._model1_case_marker = len(self.records)
        self.model_runs.append({"model": "strategy", "at": now, "touched": len(deltas)})
        return deltas

    # ---- Model 2: score recalibration --------------------------------------

    def recalibrate_scores(self, now: float) -> dict:
        fresh = len(self.records) - self._model2_case_marker
        if fresh < 30:
            raise InsufficientData(f"{fresh} cases since last recalibration, need 30")
        self._model2_case_marker = len(self.records)

        rows = self.records
        holdout_n = max(1, math.ceil(len(rows) * 0.2))
        train, holdout = rows[:-holdout_n], rows[-holdout_n:]
        if not train:
            raise InsufficientData("empty training partition")

        result = {"at": now}
        changes = {}

        risk_rows = [r.risk_components for r in train]
        fail_flags = [1.0 if r.failed else 0.0 for r in train]
        new_risk = self._multiplicative_update(self.policy.risk_weights, risk_rows, fail_flags)
        old_brier = _brier(self.policy.risk_weights, [r.risk_components for r in holdout], [1.0 if r.failed else 0.0 for r in holdout])
        new_brier = _brier(new_risk, [r.risk_components for r in holdout], [1.0 if r.failed else 0.0 for r in holdout])
        result["risk"] = {"deployed": new_brier <= old_brier + 1e-12, "brier_old": old_brier, "brier_new": new_brier}
        if result["risk"]["deployed"]:
            changes["risk_weights"] = new_risk

        conf_rows = [r.confidence_components for r in train]
        success_flags = [0.0 if r.failed else 1.0 for r in train]
        new_conf = self._multiplicative_update(self.policy.confidence_weights, conf_rows, success_flags)
        old_cb = _brier(self.policy.confidence_weights, [r.confidence_components for r in holdout], [0.0 if r.failed else 1.0 for r in holdout])
        new_cb = _brier(new_conf, [r.confidence_components for r in holdout], [0.0 if r.failed else 1.0 for r in holdout])
        result["confidence"] = {"deployed": new_cb <= old_cb + 1e-12, "brier_old": old_cb, "brier_new": new_cb}
        if result["confidence"]["deployed"]:
            changes["confidence_weights"] = new_conf

        if changes:
            evidence = (
                f"score recalibration over {len(train)} train / {len(holdout)} holdout cases;"
                f" risk Brier {old_brier:.6f}->{new_brier:.6f},"
                f" confidence Brier {old_cb:.6f}->{new_cb:.6f}"
            )
            self.policy = self.policy.evolve(evidence, **changes)
        self.update_history.append(result)
        self.model_runs.append({"model": "scores", "at": now, "deployed": bool(changes)})
        return result

    @staticmethod
    def _multiplicative_update(weights: tuple, rows: list, targets: list) -> tuple:
        n = len(weights)
        correlations = []
        for i in range(n):
            xs = [row[i] for row in rows]
            correlations.append(_correlation(xs, targets))
        raw = [w * math.exp(0.1 * corr) for w, corr in zip(weights, correlations)]
        total = sum(raw)
        return tuple(w / total for w in raw)

    # ---- Model 3: test adequacy -------------------------------------------

    def analyze_test_adequacy(self, now: float) -> list:
        rollbacks = sum(1 for r in self.records if r.rolled_back)
        if rollbacks <= self._model3_rollback_marker:
            self.model_runs.append({"model": "adequacy", "at": now, "skipped": True})
            return []
        self._model3_rollback_marker = rollbacks

        per_project: dict[str, dict] = {}
        for r in self.records:
            entry = per_project.setdefault(r.project, {"cases": 0, "rollbacks": 0, "tau": r.tau_p})
            entry["cases"] += 1
            entry["rollbacks"] += 1 if r.rolled_back else 0
            entry["tau"] = r.tau_p

        ranked = sorted(
            (
                (e["rollbacks"] / e["cases"] * (1.0 - e["tau"]), project, e)
                for project, e in per_project.items()
            ),
            key=lambda t: (-t[0], t[1]),
        )
        top = max(1, math.ceil(len(ranked) / 10))
        fresh = [
            {
                "project": project,
                "tau_p": e["tau"],
                "rollback_rate": e["rollbacks"] / e["cases"],
                "score": score,
                "at": now,
            }
            for score, project, e in ranked[:top]
            if score > 0
        ]
        self.recommendations.extend(fresh)

        low = [r for r in self.records if r.tau_p < LOW_TAU]
        high = [r for r in self.records if r.tau_p >= LOW_TAU]
        low_rate = sum(1 for r in low if r.rolled_back) / len(low) if low else 0.0
        high_rate = sum(1 for r in high if r.rolled_back) / len(high) if high else 0.0
        if low and low_rate > 2 * high_rate and low_rate > 0:
            w1, w2, w3 = self.policy.priority_weights
            new_w3 = min(0.5, w3 + 0.02)
            if new_w3 != w3:
                scale = (1.0 - new_w3) / (w1 + w2)
                new_weights = (w1 * scale, w2 * scale, new_w3)
                self.policy = self.policy.evolve(
                    f"low-tau rollback rate {low_rate:.4f} exceeds 2x high-tau rate {high_rate:.4f}",
                    priority_weights=new_weights,
                )
        self.model_runs.append({"model": "adequacy", "at": now, "recommended": len(fresh)})
        return fresh

    # ---- Model 4: template mining ------------------------------------------

    def mine_templates(self, now: float) -> dict:
        unit_cases = [r for r in self.records if r.units]
        if len(unit_cases) < 20:
            self.model_runs.append({"model": "templates", "at": now, "skipped": True})
            return {}

        counters: dict[tuple, list] = {}
        for r in unit_cases:
            reverted = set(r.reverted_units)
            for unit_id, kind in r.units:
                key = (r.event_type, kind)
                entry = counters.setdefault(key, [0, 0])
                entry[0] += 1
                applied = unit_id not in reverted and r.disposition != "rejected_by_human"
                entry[1] += 1 if applied else 0

        for key in sorted(counters):
            uses, successes = counters[key]
            tpl = self.templates.get(key)
            if tpl is None:
                tpl = TransformTemplate(
                    template_id=content_hash(list(key), prefix="tpl-"), key=key
                )
                self.templates[key] = tpl
            tpl.uses = uses
            tpl.successes = successes
            tpl.recompute()
        self._model4_case_marker = len(self.records)
        self.model_runs.append({"model": "templates", "at": now, "templates": len(counters)})
        return {k: self.templates[k] for k in sorted(counters)}

    # ---- policy adaptation --------------------------------------------------

    def adapt_policies(self, now: float) -> PolicyConfig:
        window = self.records[self._adapt_marker :]
        t1t2 = [r for r in window if r.action_type in ("Type1", "Type2")]
        if len(t1t2) < self.policy.adapt_case_interval:
            raise InsufficientData(
                f"{len(t1t2)} Type1/Type2 cases in window, need {self.policy.adapt_case_interval}"
            )
        self._adapt_marker = len(self.records)

        self._adapt_thresholds(window, now)
        self._adapt_project_overrides(window, now)
        self._adapt_urgency_bands(window, now)
        self.model_runs.append({"model": "policies", "at": now, "window": len(window)})
        return self.policy

    def _adapt_thresholds(self, window: list, now: float) -> None:
        floor, ceiling = self.policy.threshold_bounds["theta_r_low"]
        t1 = [r for r in window if r.action_type == "Type1"]
        if t1:
            failure_rate = sum(1 for r in t1 if r.failed) / len(t1)
            if failure_rate > 0.02:
                current = self.policy.theta_r_low
                target = max(floor, round(current - 0.05, 10))
                if target < current:
                    evidence = (
                        f"Type1 failure rate {failure_rate:.4f} > 0.02 over {len(t1)} cases;"
                        f" tightening theta_r_low {current}->{target}"
                    )
                else:
                    evidence = (
                        f"Type1 failure rate {failure_rate:.4f} > 0.02 over {len(t1)} cases;"
                        f" theta_r_low already at floor {floor}"
                    )
                self.policy = self.policy.evolve(evidence, theta_r_low=target)
                return

        t3_latencies = [r.review_latency for r in window if r.action_type == "Type3" and r.review_latency is not None]
        t3_verdicts = [r.human_verdict for r in window if r.action_type == "Type3" and r.human_verdict]
        if t3_latencies and t3_verdicts:
            accept_rate = sum(1 for v in t3_verdicts if v == "accept") / len(t3_verdicts)
            if _median(t3_latencies) > self.policy.queue_target and accept_rate > 0.95:
                current = self.policy.theta_r_low
                target = min(ceiling, round(current + 0.05, 10))
                if target != current:
                    self.policy = self.policy.evolve(
                        f"Type3 queue median {_median(t3_latencies):.0f}s over target with"
                        f" accept rate {accept_rate:.4f}; relaxing theta_r_low {current}->{target}",
                        theta_r_low=target,
                    )

    def _adapt_project_overrides(self, window: list, now: float) -> None:
        per_project: dict[str, dict] = {}
        for r in window:
            entry = per_project.setdefault(r.project, {"cases": 0, "rollbacks": 0})
            entry["cases"] += 1
            entry["rollbacks"] += 1 if r.rolled_back else 0

        overrides = {k: dict(v) for k, v in self.policy.project_overrides.items()}
        changed = []
        for project in sorted(per_project):
            entry = per_project[project]
            if entry["rollbacks"] >= 3:
                new = {"force_type3": True}
                if overrides.get(project) != new:
                    overrides[project] = new
                    changed.append(f"{project}: force_type3 ({entry['rollbacks']} rollbacks)")
            elif entry["cases"] >= 20 and entry["rollbacks"] == 0:
                new = {"relaxed_tau": round(self.policy.theta_tau - 0.05, 10)}
                if overrides.get(project) != new:
                    overrides[project] = new
                    changed.append(f"{project}: relaxed_tau ({entry['cases']} clean cases)")
        if changed:
            self.policy = self.policy.evolve(
                "project overrides: " + "; ".join(changed), project_overrides=overrides
            )

    def _adapt_urgency_bands(self, window: list, now: float) -> None:
        bands = {k: dict(v) for k, v in self.policy.urgency_bands.items()}
        changed = []
        for event_type in sorted({r.event_type for r in window}):
            rows = [r for r in window if r.event_type == event_type]
            per_band: dict[str, list] = {}
            for r in rows:
                per_band.setdefault(r.urgency, []).append(r)
            if len(per_band) < 2:
                continue
            mtrs = {
                band: sum(r.disposition_time - r.observed_at for r in rs) / len(rs)
                for band, rs in per_band.items()
            }
            max_mtr = max(mtrs.values()) or 1.0
            costs = {
                band: sum(1 for r in rs if r.failed) / len(rs) + mtrs[band] / max_mtr
                for band, rs in per_band.items()
            }
            best = min(sorted(costs), key=lambda b: costs[b])
            low, high = bands[event_type]["low"], bands[event_type]["high"]
            if best == "immediate":
                high = max(low + 0.05, round(high - 0.05, 10))
            elif best == "advisory":
                low = min(high - 0.05, round(low + 0.05, 10))
            else:
                high = min(0.95, round(high + 0.05, 10))
                low = max(0.05, round(low - 0.05, 10))
            if (low, high) != (bands[event_type]["low"], bands[event_type]["high"]):
                bands[event_type] = {"low": low, "high": high}
                changed.append(f"{event_type}: favor {best}, band now [{low}, {high}]")
        if changed:
            self.policy = self.policy.evolve(
                "urgency band tuning: " + "; ".join(changed), urgency_bands=bands
            )

    # ---- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.to_dict(),
            "signals": [s.to_dict() for s in self.signals],
            "records": [r.to_dict() for r in self.records],
            "strategy_stats": [s.to_dict() for _, s in sorted(self.strategy_stats.items())],
            "templates": [t.to_dict() for _, t in sorted(self.templates.items())],
            "recommendations": list(self.recommendations),
            "update_history": list(self.update_history),
            "model_runs": list(self.model_runs),
            "edge_counts": [[list(k), v] for k, v in sorted(self._edge_counts.items())],
            "clock": {
                "start": self._clock_start,
                "next_week": self._next_week,
                "next_fortnight": self._next_fortnight,
                "next_month": self._next_month,
            },
            "markers": {
                "model1": self._model1_case_marker,
                "model2": self._model2_case_marker,
                "model3": self._model3_rollback_marker,
                "model4": self._model4_case_marker,
                "adapt": self._adapt_marker,
            },
        }

    @classmethod
    def from_dict(cls, data: dict, known_cases: Optional[Callable[[str], bool]] = None) -> "LearningLoop":
        loop = cls(policy=PolicyConfig.from_dict(data["policy"]), known_cases=known_cases)
        loop.signals = [FeedbackSignal.from_dict(s) for s in data.get("signals", [])]
        loop.records = [CaseRecord.from_dict(r) for r in data.get("records", [])]
        loop.strategy_stats = {
            tuple(s["key"]): StrategyStats.from_dict(s) for s in data.get("strategy_stats", [])
        }
        loop.templates = {
            tuple(t["key"]): TransformTemplate.from_dict(t) for t in data.get("templates", [])
        }
        loop.recommendations = list(data.get("recommendations", []))
        loop.update_history = list(data.get("update_history", []))
        loop.model_runs = list(data.get("model_runs", []))
        loop._edge_counts = {tuple(k): list(v) for k, v in data.get("edge_counts", [])}
        clock = data.get("clock", {})
        loop._clock_start = clock.get("start", 0.0)
        loop._next_week = clock.get("next_week", loop._clock_start + WEEK)
        loop._next_fortnight = clock.get("next_fortnight", loop._clock_start + FORTNIGHT)
        loop._next_month = clock.get("next_month", loop._clock_start + MONTH)
        markers = data.get("markers", {})
        loop._model1_case_marker = markers.get("model1", 0)
        loop._model2_case_marker = markers.get("model2", 0)
        loop._model3_rollback_marker = markers.get("model3", 0)
        loop._model4_case_marker = markers.get("model4", 0)
        loop._adapt_marker = markers.get("adapt", 0)
        return loop
