"""Per-stage prompt templates for the language-model backend.

Templates are plain text files with ``{name}`` placeholders filled with
canonical-JSON serializations. A placeholder is only available once its
source stage has run: ``{anomalies}`` needs the diagnostic report,
``{forecasts}`` the predictive one; ``{window}``, ``{series_summary}``
and ``{message_profile}`` come straight from the context.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from netwin.analytics.context import AnalyticsContext, series_summary
from netwin.signals import canonical_json


class TemplateError(ValueError):
    def __init__(self, placeholder: str, reason: str) -> None:
        self.placeholder = placeholder
        super().__init__(f"{{{placeholder}}}: {reason}")


# placeholder -> stage whose report it is derived from (None = context)
PLACEHOLDER_SOURCES: dict[str, str | None] = {
    "window": None,
    "series_summary": None,
    "message_profile": None,
    "anomalies": "diagnostic",
    "forecasts": "predictive",
}

_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


def load_template(stage: str, templates_dir: str | Path | None = None) -> str:
    if templates_dir is not None:
        path = Path(templates_dir) / f"{stage}.tmpl"
        if not path.exists():
            raise TemplateError(stage, f"no template file at {path}")
        return path.read_text("utf-8")
    resource = resources.files("netwin.analytics").joinpath(f"templates/{stage}.tmpl")
    try:
        return resource.read_text("utf-8")
    except FileNotFoundError:
        raise TemplateError(stage, "no bundled template for this stage") from None


def render_prompt(
    stage: str,
    context: AnalyticsContext,
    priors: Mapping[str, Any],
    templates_dir: str | Path | None = None,
) -> str:
    """Fill the stage template deterministically; unresolved or premature
    placeholders are errors."""
    template = load_template(stage, templates_dir)
    values: dict[str, str] = {}
    for name in set(_PLACEHOLDER_RE.findall(template)):
        source = PLACEHOLDER_SOURCES.get(name, "__unknown__")
        if source == "__unknown__":
            raise TemplateError(name, "unknown placeholder")
        if source is not None and source not in priors:
            raise TemplateError(name, f"requires the {source} stage to have run before {stage}")
        if name == "window":
            values[name] = canonical_json({"from_ms": context.window[0], "to_ms": context.window[1]})
        elif name == "series_summary":
            values[name] = canonical_json(series_summary(context))
        elif name == "message_profile":
            values[name] = canonical_json(None if context.profile is None else context.profile.to_doc())
        elif name == "anomalies":
            values[name] = canonical_json(priors["diagnostic"].to_doc()["anomalies"])
        elif name == "forecasts":
            values[name] = canonical_json(priors["predictive"].to_doc()["per_series"])
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)
