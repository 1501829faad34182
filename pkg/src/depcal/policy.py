"""Versioned policy configuration: every tunable weight and threshold.

A PolicyConfig is treated as immutable once published. The learning loop is
the only writer: it builds a successor via ``evolve`` which bumps the version
and appends one audit entry per changed field. Everything else reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

DEFAULT_CRITICALITY_WEIGHTS = {"critical": 1.0, "high": 0.75, "medium": 0.5, "low": 0.25}

# thresholds the learning loop may move, with their [floor, ceiling] bounds
DEFAULT_THRESHOLD_BOUNDS = {
    "theta_r_low": (0.1, 0.3),
    "theta_r_mod": (0.4, 0.8),
    "theta_c_high": (0.5, 0.9),
    "theta_tau": (0.5, 0.9),
}


@dataclass(frozen=True)
class AuditEntry:
    version: int
    field: str
    old: Any
    new: Any
    evidence: str

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "field": self.field,
            "old": self.old,
            "new": self.new,
            "evidence": self.evidence,
        }


@dataclass(frozen=True)
class PolicyConfig:
    version: int = 1
    # impact traversal
    alpha: float = 0.5
    theta: float = 0.05
    d_max: int = 10
    criticality_weights: dict = field(default_factory=lambda: dict(DEFAULT_CRITICALITY_WEIGHTS))
    priority_weights: tuple = (0.5, 0.2, 0.3)  # (impact, remediation cost, coverage gap)
    # scoring
    risk_weights: tuple = (1 / 6,) * 6
    confidence_weights: tuple = (0.25,) * 4
    # gates
    theta_r_low: float = 0.3
    theta_r_mod: float = 0.6
    theta_c_high: float = 0.7
    theta_tau: float = 0.75
    blast_limit: int = 10
    threshold_bounds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLD_BOUNDS))
    # ingest urgency bands per event type: severity >= high -> immediate,
    # >= low -> scheduled, else advisory
    urgency_bands: dict = field(
        default_factory=lambda: {
            "package_update": {"low": 0.3, "high": 0.7},
            "cve_disclosure": {"low": 0.3, "high": 0.7},
            "api_deprecation": {"low": 0.3, "high": 0.7},
            "config_change": {"low": 0.3, "high": 0.7},
        }
    )
    # rollback policy
    partial_threshold: float = 0.5
    perf_budget: float = -0.10
    # retention
    retention_max_age: float = 180 * 86400.0
    # adaptation knobs
    queue_target: float = 4 * 3600.0
    adapt_case_interval: int = 50
    rollback_window_cases: int = 1000
    # per-project overrides: key -> {"relaxed_tau": bool, "force_type3": bool}
    project_overrides: dict = field(default_factory=dict)
    audit: tuple = ()

    def criticality_weight(self, criticality: str) -> float:
        return self.criticality_weights[criticality]

    def override_for(self, project_key: str) -> dict:
        return self.project_overrides.get(project_key, {})

    def validate(self) -> None:
        for name, vec in (("risk_weights", self.risk_weights), ("confidence_weights", self.confidence_weights)):
            if any(w < 0 for w in vec):
                raise ValueError(f"{name} has a negative entry")
            if abs(sum(vec) - 1.0) > 1e-9:
                raise ValueError(f"{name} does not sum to 1")
        if abs(sum(self.priority_weights) - 1.0) > 1e-9:
            raise ValueError("priority_weights do not sum to 1")
        for name, (lo, hi) in self.threshold_bounds.items():
            value = getattr(self, name)
            if not (lo - 1e-12 <= value <= hi + 1e-12):
                raise ValueError(f"{name}={value} outside [{lo}, {hi}]")

    def evolve(self, evidence: str, **changes: Any) -> "PolicyConfig":
        """Return version+1 with one audit entry per changed field."""
        new_version = self.version + 1
        entries = list(self.audit)
        for name, new_value in sorted(changes.items()):
            entries.append(AuditEntry(new_version, name, _plain(getattr(self, name)), _plain(new_value), evidence))
        successor = replace(self, version=new_version, audit=tuple(entries), **changes)
        successor.validate()
        return successor

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "alpha": self.alpha,
            "theta": self.theta,
            "d_max": self.d_max,
            "criticality_weights": dict(self.criticality_weights),
            "priority_weights": list(self.priority_weights),
            "risk_weights": list(self.risk_weights),
            "confidence_weights": list(self.confidence_weights),
            "theta_r_low": self.theta_r_low,
            "theta_r_mod": self.theta_r_mod,
            "theta_c_high": self.theta_c_high,
            "theta_tau": self.theta_tau,
            "blast_limit": self.blast_limit,
            "threshold_bounds": {k: list(v) for k, v in self.threshold_bounds.items()},
            "urgency_bands": {k: dict(v) for k, v in self.urgency_bands.items()},
            "partial_threshold": self.partial_threshold,
            "perf_budget": self.perf_budget,
            "retention_max_age": self.retention_max_age,
            "queue_target": self.queue_target,
            "adapt_case_interval": self.adapt_case_interval,
            "rollback_window_cases": self.rollback_window_cases,
            "project_overrides": {k: dict(v) for k, v in sorted(self.project_overrides.items())},
            "audit": [entry.to_dict() for entry in self.audit],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        audit = tuple(
            AuditEntry(e["version"], e["field"], e["old"], e["new"], e["evidence"])
            for e in data.get("audit", [])
        )
        kwargs = dict(data)
        kwargs.pop("audit", None)
        for tup_field in ("priority_weights", "risk_weights", "confidence_weights"):
            if tup_field in kwargs:
                kwargs[tup_field] = tuple(kwargs[tup_field])
        if "threshold_bounds" in kwargs:
            kwargs["threshold_bounds"] = {k: tuple(v) for k, v in kwargs["threshold_bounds"].items()}
        config = cls(audit=audit, **kwargs)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "PolicyConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value
