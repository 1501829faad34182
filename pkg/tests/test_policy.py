import pytest

from depcal.policy import DEFAULT_THRESHOLD_BOUNDS, PolicyConfig


def test_defaults_pass_validation():
    policy = PolicyConfig()
    policy.validate()
    assert policy.version == 1
    assert policy.alpha == 0.5
    assert policy.theta == 0.05
    assert policy.d_max == 10
    assert policy.blast_limit == 10
    assert (policy.theta_r_low, policy.theta_r_mod) == (0.3, 0.6)
    assert (policy.theta_c_high, policy.theta_tau) == (0.7, 0.75)


def test_weight_vectors_are_simplexes():
    policy = PolicyConfig()
    assert abs(sum(policy.risk_weights) - 1.0) < 1e-9
    assert abs(sum(policy.confidence_weights) - 1.0) < 1e-9
    assert abs(sum(policy.priority_weights) - 1.0) < 1e-9


@pytest.mark.parametrize(
    "crit,weight", [("critical", 1.0), ("high", 0.75), ("medium", 0.5), ("low", 0.25)]
)
def test_criticality_weight(crit, weight):
    assert PolicyConfig().criticality_weight(crit) == weight


def test_evolve_bumps_version_and_appends_audit():
    p1 = PolicyConfig()
    p2 = p1.evolve("window failure rate high", theta_r_low=0.25)
    assert p2.version == 2
    assert p1.version == 1  # predecessor untouched
    assert p2.theta_r_low == 0.25
    entry = p2.audit[-1]
    assert (entry.version, entry.field) == (2, "theta_r_low")
    assert (entry.old, entry.new) == (0.3, 0.25)
    assert "failure rate" in entry.evidence


def test_evolve_accumulates_audit_chain():
    policy = PolicyConfig()
    for step in range(3):
        policy = policy.evolve(f"step {step}", theta_r_low=0.3 - 0.05 * (step + 1))
    versions = [e.version for e in policy.audit]
    assert versions == [2, 3, 4]
    assert policy.version == 4


def test_evolve_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        PolicyConfig().evolve("bad", theta_r_low=0.05)
    with pytest.raises(ValueError):
        PolicyConfig().evolve("bad", risk_weights=(0.5, 0.5, 0.0, 0.0, 0.0, 0.5))


def test_evolve_allows_no_op_change_with_audit():
    # recording a floor-hit keeps the value but still versions the decision
    p1 = PolicyConfig(theta_r_low=0.1)
    p2 = p1.evolve("already at floor", theta_r_low=0.1)
    assert p2.version == 2
    assert p2.theta_r_low == 0.1
    assert p2.audit[-1].old == p2.audit[-1].new == 0.1


def test_override_for_unknown_project_is_empty():
    assert PolicyConfig().override_for("project:nope") == {}


def test_override_for_known_project():
    policy = PolicyConfig(project_overrides={"project:p": {"force_type3": True}})
    assert policy.override_for("project:p") == {"force_type3": True}


def test_threshold_bounds_defaults():
    assert DEFAULT_THRESHOLD_BOUNDS["theta_r_low"] == (0.1, 0.3)
    policy = PolicyConfig()
    for name, (lo, hi) in policy.threshold_bounds.items():
        assert lo <= getattr(policy, name) <= hi


def test_round_trip_preserves_everything():
    p1 = PolicyConfig().evolve("tune", theta_tau=0.7)
    p2 = PolicyConfig.from_dict(p1.to_dict())
    assert p2.to_dict() == p1.to_dict()
    assert p2.version == 2
    assert p2.audit == p1.audit


def test_from_file(tmp_path):
    import json

    path = tmp_path / "policy.json"
    path.write_text(json.dumps(PolicyConfig(theta_tau=0.8).to_dict()))
    assert PolicyConfig.from_file(str(path)).theta_tau == 0.8


def test_urgency_bands_cover_all_event_types():
    bands = PolicyConfig().urgency_bands
    assert set(bands) == {"package_update", "cve_disclosure", "api_deprecation", "config_change"}
    for band in bands.values():
        assert 0.0 <= band["low"] <= band["high"] <= 1.0
