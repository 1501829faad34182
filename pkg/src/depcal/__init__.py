"""Event-driven dependency maintenance: graph, gates, patches, validation, learning."""

from .cases import CalibrationCase, CaseStatus, CaseStore, Disposition, ReviewDecision
from .engine import Engine, ModifyFailsVerification, ReviewTask, ScriptedReviewer
from .events import (
    CanonicalEvent,
    EventType,
    IngestError,
    MalformedRecord,
    UnrecognizedSource,
    Urgency,
    apply_event,
    classify_event,
    normalize_event,
)
from .gating import (
    ActionType,
    CalibrationContext,
    GateTrace,
    ScoreBreakdown,
    build_context,
    classify,
    confidence_score,
    risk_score,
    score_breakdown,
)
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
from .impact import (
    ImpactItem,
    ImpactReport,
    NoRootFound,
    analyze,
    impact_score_exact,
    test_adequacy,
    transitive_closure,
)
from .learning import FeedbackSignal, InsufficientData, LearningLoop, TransformTemplate
from .patching import (
    AtomicUnit,
    CalibrationPlan,
    CyclicUnitDependency,
    Patch,
    PlanInfeasible,
    Strategy,
    UnitKind,
    generate,
    partial_apply_sets,
    plan,
    verify_semantic_preservation,
)
from .policy import PolicyConfig
from .scenarios import (
    EmptyLog,
    FixtureAssertionFailed,
    InfeasibleParams,
    ScenarioReport,
    compute_metrics,
    generate_ecosystem,
    micro_fixture_g3,
    run_scenario,
)
from .validation import (
    MissingReview,
    RollbackDecision,
    UnverifiedPatch,
    ValidationOutcome,
    ValidationProfile,
    decide_rollback,
    finalize_case,
)

__version__ = "0.1.0"
