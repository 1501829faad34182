"""Calibration case records: one affected project's journey per event.

A case accumulates the score breakdown, gate trace, plan, patch, validation
outcome, optional human review, and the final disposition. The store is an
in-memory map with JSON persistence; every mutation happens under a lock so
the gateway can serve concurrent requests.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .gating import GateTrace, ScoreBreakdown
from .patching import CalibrationPlan, Patch


class UnknownCase(Exception):
    pass


class AlreadyDecided(Exception):
    pass


class Disposition(str, Enum):
    MERGED_AUTO = "merged_auto"
    MERGED_AFTER_REVIEW = "merged_after_review"
    ROLLED_BACK_PARTIAL = "rolled_back_partial"
    ROLLED_BACK_FULL = "rolled_back_full"
    ADVISORY_CLOSED = "advisory_closed"
    REJECTED_BY_HUMAN = "rejected_by_human"


class CaseStatus(str, Enum):
    OPEN = "open"
    AWAITING_REVIEW = "awaiting_review"
    FINALIZED = "finalized"


MERGED_DISPOSITIONS = frozenset({Disposition.MERGED_AUTO, Disposition.MERGED_AFTER_REVIEW})
ROLLBACK_DISPOSITIONS = frozenset(
    {Disposition.ROLLED_BACK_PARTIAL, Disposition.ROLLED_BACK_FULL}
)


@dataclass
class ReviewDecision:
    verdict: str
    reviewer: str
    decided_at: float
    modified_units: Optional[list] = None

    VERDICTS = ("accept", "reject", "modify")

    def validate(self) -> None:
        if self.verdict not in self.VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "modify" and not self.modified_units:
            raise ValueError("modify decisions carry a non-empty unit delta")

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "decided_at": self.decided_at,
            "modified_units": self.modified_units,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewDecision":
        return cls(
            verdict=data["verdict"],
            reviewer=data["reviewer"],
            decided_at=data["decided_at"],
            modified_units=data.get("modified_units"),
        )


@dataclass
class CalibrationCase:
    case_id: str
    event_id: str
    event_type: str
    project: str
    created_at: float
    observed_at: float
    impact_item: dict
    breakdown: ScoreBreakdown
    gate_trace: GateTrace
    plan: CalibrationPlan
    patch: Optional[Patch] = None
    validation_outcome: Optional[dict] = None
    rollback: Optional[dict] = None
    review: Optional[ReviewDecision] = None
    disposition: Optional[Disposition] = None
    disposition_time: Optional[float] = None
    status: CaseStatus = CaseStatus.OPEN
    escalated: bool = False

    @property
    def action_type(self) -> str:
        return self.gate_trace.action_type.value

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "event_id": self.event_id,
            "event_type": self.event_type,
            "project": self.project,
            "created_at": self.created_at,
            "observed_at": self.observed_at,
            "impact_item": self.impact_item,
            "breakdown": self.breakdown.to_dict(),
            "gate_trace": self.gate_trace.to_dict(),
            "plan": self.plan.to_dict(),
            "patch": self.patch.to_dict() if self.patch else None,
            "validation_outcome": self.validation_outcome,
            "rollback": self.rollback,
            "review": self.review.to_dict() if self.review else None,
            "disposition": self.disposition.value if self.disposition else None,
            "disposition_time": self.disposition_time,
            "status": self.status.value,
            "escalated": self.escalated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationCase":
        return cls(
            case_id=data["case_id"],
            event_id=data["event_id"],
            event_type=data["event_type"],
            project=data["project"],
            created_at=data["created_at"],
            observed_at=data["observed_at"],
            impact_item=data["impact_item"],
            breakdown=ScoreBreakdown.from_dict(data["breakdown"]),
            gate_trace=GateTrace.from_dict(data["gate_trace"]),
            plan=CalibrationPlan.from_dict(data["plan"]),
            patch=Patch.from_dict(data["patch"]) if data.get("patch") else None,
            validation_outcome=data.get("validation_outcome"),
            rollback=data.get("rollback"),
            review=ReviewDecision.from_dict(data["review"]) if data.get("review") else None,
            disposition=Disposition(data["disposition"]) if data.get("disposition") else None,
            disposition_time=data.get("disposition_time"),
            status=CaseStatus(data.get("status", "open")),
            escalated=data.get("escalated", False),
        )


class CaseStore:
    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._cases: dict[str, CalibrationCase] = {}

    def add(self, case: CalibrationCase) -> None:
        with self._lock:
            if case.case_id in self._cases:
                raise ValueError(f"duplicate case id {case.case_id}")
            self._cases[case.case_id] = case

    def get(self, case_id: str) -> CalibrationCase:
        with self._lock:
            try:
                return self._cases[case_id]
            except KeyError:
                raise UnknownCase(case_id) from None

    def has(self, case_id: str) -> bool:
        with self._lock:
            return case_id in self._cases

    def all(self) -> list:
        with self._lock:
            return sorted(self._cases.values(), key=lambda c: (c.created_at, c.case_id))

    def for_event(self, event_id: str) -> list:
        return [c for c in self.all() if c.event_id == event_id]

    def awaiting_review(self) -> list:
        return [c for c in self.all() if c.status is CaseStatus.AWAITING_REVIEW]

    def finalized(self) -> list:
        return [c for c in self.all() if c.status is CaseStatus.FINALIZED]

    def to_dict(self) -> dict:
        return {"cases": [c.to_dict() for c in self.all()]}

    @classmethod
    def from_dict(cls, data: dict) -> "CaseStore":
        store = cls()
        for entry in data.get("cases", []):
            store.add(CalibrationCase.from_dict(entry))
        return store
