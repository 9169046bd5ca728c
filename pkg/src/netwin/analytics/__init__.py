"""Staged analytics over twin KPIs fused with environmental series.

Four chained stages, each consuming its predecessors' reports:
descriptive (what happened), diagnostic (why), predictive (what will
happen), prescriptive (what to do, including interface selection). A
deterministic statistical backend is the reference implementation; a
remote language-model backend driven by per-stage prompt templates is
interchangeable behind the same report schemas.
"""

from netwin.analytics.context import (
    AnalyticsContext,
    AnalyticsParams,
    CandidateLink,
    DeviceScope,
    EmptyScope,
    MessageProfile,
    context_from_controller,
)
from netwin.analytics.forecast import InsufficientData, IrregularCadence, PredictiveReport, predict
from netwin.analytics.prescribe import NoCandidates, PrescriptiveReport, prescribe
from netwin.analytics.pipeline import (
    BackendError,
    DeterministicBackend,
    MockBackend,
    RemoteBackend,
    ReportBundle,
    StagePreconditionError,
    STAGES,
    run_pipeline,
)
from netwin.analytics.prompts import TemplateError, render_prompt
from netwin.analytics.stats import DescriptiveReport, DiagnosticReport, describe, diagnose

__all__ = [
    "AnalyticsContext",
    "AnalyticsParams",
    "BackendError",
    "CandidateLink",
    "DescriptiveReport",
    "DeterministicBackend",
    "DeviceScope",
    "DiagnosticReport",
    "EmptyScope",
    "InsufficientData",
    "IrregularCadence",
    "MessageProfile",
    "MockBackend",
    "NoCandidates",
    "PredictiveReport",
    "PrescriptiveReport",
    "RemoteBackend",
    "ReportBundle",
    "STAGES",
    "StagePreconditionError",
    "TemplateError",
    "context_from_controller",
    "describe",
    "diagnose",
    "predict",
    "prescribe",
    "render_prompt",
    "run_pipeline",
]
