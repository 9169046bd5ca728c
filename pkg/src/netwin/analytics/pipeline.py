"""Pipeline runner and the three analytics backends.

Stages run in canonical order, each fed every prior report. The requested
stage set must be a prefix of the canonical order. With the deterministic
backend the report bundle is a pure function of the context; timings are
carried separately so purity comparisons exclude them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

from netwin.analytics.context import AnalyticsContext
from netwin.analytics.forecast import PredictiveReport, predict
from netwin.analytics.prescribe import PrescriptiveReport, prescribe
from netwin.analytics.prompts import render_prompt
from netwin.analytics.stats import DescriptiveReport, DiagnosticReport, describe, diagnose
from netwin.signals import canonical_json

STAGES = ("descriptive", "diagnostic", "predictive", "prescriptive")


class StagePreconditionError(ValueError):
    """Requested stages do not form a prefix of the canonical order."""


class BackendError(RuntimeError):
    """A backend failed to produce a schema-valid report."""


REPORT_PARSERS = {
    "descriptive": DescriptiveReport.from_doc,
    "diagnostic": DiagnosticReport.from_doc,
    "predictive": PredictiveReport.from_doc,
    "prescriptive": PrescriptiveReport.from_doc,
}


class AnalyticsBackend(Protocol):
    def analyze(self, stage: str, context: AnalyticsContext, priors: Mapping[str, Any]) -> Any: ...


@dataclass(frozen=True)
class ReportBundle:
    reports: Mapping[str, Any]
    timings_ms: Mapping[str, float] = field(default_factory=dict)

    def reports_doc(self) -> dict[str, Any]:
        """The pure portion: stage reports only, canonically serializable."""
        return {stage: report.to_doc() for stage, report in self.reports.items()}

    def to_doc(self) -> dict[str, Any]:
        return {"reports": self.reports_doc(), "timings_ms": dict(self.timings_ms)}

    def canonical_reports(self) -> str:
        return canonical_json(self.reports_doc())


def normalize_stages(stages: Iterable[str]) -> tuple[str, ...]:
    requested = list(stages)
    for stage in requested:
        if stage not in STAGES:
            raise StagePreconditionError(f"unknown stage {stage!r}")
    ordered = tuple(s for s in STAGES if s in requested)
    if len(ordered) != len(requested):
        raise StagePreconditionError("stages listed more than once")
    prefix = STAGES[: len(ordered)]
    if ordered != prefix:
        missing = [s for s in prefix if s not in ordered]
        raise StagePreconditionError(
            f"stages must form a prefix of {list(STAGES)}; missing {missing}"
        )
    return ordered


def run_pipeline(
    context: AnalyticsContext,
    stages: Iterable[str],
    backend: AnalyticsBackend | None = None,
) -> ReportBundle:
    """Execute the requested stage prefix, feeding each stage all prior
    reports. Stage errors propagate with a ``stage`` attribute attached."""
    ordered = normalize_stages(stages)
    backend = backend or DeterministicBackend()
    reports: dict[str, Any] = {}
    timings: dict[str, float] = {}
    for stage in ordered:
        started = time.perf_counter()
        try:
            report = backend.analyze(stage, context, reports)
        except Exception as exc:
            exc.stage = stage  # type: ignore[attr-defined]
            raise
        reports[stage] = report
        timings[stage] = (time.perf_counter() - started) * 1000.0
    return ReportBundle(reports=reports, timings_ms=timings)


class DeterministicBackend:
    """Reference backend: the statistical stage implementations."""

    def analyze(self, stage: str, context: AnalyticsContext, priors: Mapping[str, Any]) -> Any:
        if stage == "descriptive":
            return describe(context)
        if stage == "diagnostic":
            return diagnose(context, priors["descriptive"])
        if stage == "predictive":
            return predict(context, priors["descriptive"], priors["diagnostic"])
        if stage == "prescriptive":
            return prescribe(context, priors["predictive"], context.profile)
        raise StagePreconditionError(f"unknown stage {stage!r}")


class MockBackend:
    """Canned per-stage replies for offline tests of the LM integration."""

    def __init__(self, replies: Mapping[str, Mapping[str, Any]]) -> None:
        self.replies = dict(replies)
        self.rendered_prompts: list[tuple[str, str]] = []

    def analyze(self, stage: str, context: AnalyticsContext, priors: Mapping[str, Any]) -> Any:
        self.rendered_prompts.append((stage, render_prompt(stage, context, priors)))
        doc = self.replies.get(stage)
        if doc is None:
            raise BackendError(f"no canned reply for stage {stage!r}")
        return _parse_report(stage, doc)


class RemoteBackend:
    """Posts the rendered stage prompt to an HTTP endpoint and parses the
    structured reply. Parse failures surface as BackendError; the caller
    decides whether to fall back, never this class."""

    def __init__(
        self,
        url: str,
        templates_dir: str | Path | None = None,
        timeout_s: float = 30.0,
        client: Any | None = None,
    ) -> None:
        self.url = url
        self.templates_dir = templates_dir
        self.timeout_s = timeout_s
        self._client = client

    def _post(self, payload: dict[str, Any]) -> Any:
        import httpx

        client = self._client
        if client is not None:
            response = client.post(self.url, json=payload, timeout=self.timeout_s)
        else:
            response = httpx.post(self.url, json=payload, timeout=self.timeout_s)
        response.raise_for_status()
        return response.json()

    def analyze(self, stage: str, context: AnalyticsContext, priors: Mapping[str, Any]) -> Any:
        prompt = render_prompt(stage, context, priors, self.templates_dir)
        try:
            doc = self._post({"stage": stage, "prompt": prompt})
        except Exception as exc:
            raise BackendError(f"remote analytics endpoint failed: {exc}") from exc
        return _parse_report(stage, doc)


def _parse_report(stage: str, doc: Mapping[str, Any]) -> Any:
    parser = REPORT_PARSERS.get(stage)
    if parser is None:
        raise BackendError(f"unknown stage {stage!r}")
    try:
        return parser(doc)
    except Exception as exc:
        raise BackendError(f"stage {stage!r} reply does not match the report schema: {exc}") from exc
