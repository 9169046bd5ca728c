// Analytics panel: renders the four stage reports and wires the Apply
// button on the prescriptive recommendation. Row-building is pure so the
// panel can be tested against a recorded bundle.

import { AnalyticsBundleDoc, RecommendationDoc } from "./types.js";

export interface DescriptiveRow {
    series: string;
    count: number;
    mean: string;
    min: string;
    max: string;
    std: string;
    slope: string;
    period: string;
}

export function descriptiveRows(bundle: AnalyticsBundleDoc): DescriptiveRow[] {
    const report = bundle.reports.descriptive;
    if (!report) return [];
    return Object.entries(report.per_series)
        .sort(([a], [b]) => (a < b ? -1 : 1))
        .map(([series, stats]) => ({
            series,
            count: stats.count,
            mean: stats.mean.toFixed(2),
            min: stats.min.toFixed(2),
            max: stats.max.toFixed(2),
            std: stats.std.toFixed(2),
            slope: stats.slope_per_s.toFixed(4),
            period: stats.seasonality_period === null ? "-" : String(stats.seasonality_period),
        }));
}

export interface AnomalyRow {
    series: string;
    timestampMs: number;
    value: string;
    z: string;
}

export function anomalyRows(bundle: AnalyticsBundleDoc): AnomalyRow[] {
    const report = bundle.reports.diagnostic;
    if (!report) return [];
    const rows: AnomalyRow[] = [];
    for (const [series, anomalies] of Object.entries(report.anomalies)) {
        for (const [t, value, z] of anomalies) {
            rows.push({ series, timestampMs: t, value: value.toFixed(2), z: z.toFixed(2) });
        }
    }
    rows.sort((a, b) => a.timestampMs - b.timestampMs || (a.series < b.series ? -1 : 1));
    return rows;
}

export interface ForecastRow {
    series: string;
    method: string;
    next: string;
    mae: string;
}

export function forecastRows(bundle: AnalyticsBundleDoc): ForecastRow[] {
    const report = bundle.reports.predictive;
    if (!report) return [];
    return Object.entries(report.per_series)
        .sort(([a], [b]) => (a < b ? -1 : 1))
        .map(([series, forecast]) => ({
            series,
            method: forecast.method,
            next: forecast.forecasts.length ? forecast.forecasts[0][1].toFixed(2) : "-",
            mae: forecast.in_sample_mae.toFixed(3),
        }));
}

export function recommendations(bundle: AnalyticsBundleDoc): RecommendationDoc[] {
    return bundle.reports.prescriptive?.per_device ?? [];
}

// The Apply payload is exactly the proposed action from the report; the
// console adds nothing.
export function applyPayload(
    recommendation: RecommendationDoc,
): { deviceId: string; verb: string; arguments: Record<string, unknown> } | null {
    const action = recommendation.proposed_action;
    if (!action) return null;
    return { deviceId: action.device_id, verb: action.verb, arguments: action.arguments };
}

// ---------------------------------------------------------------------------
// DOM rendering

function table(headers: string[], rows: string[][]): HTMLTableElement {
    const el = document.createElement("table");
    const head = el.createTHead().insertRow();
    for (const h of headers) {
        const th = document.createElement("th");
        th.textContent = h;
        head.appendChild(th);
    }
    const body = el.createTBody();
    for (const row of rows) {
        const tr = body.insertRow();
        for (const cell of row) tr.insertCell().textContent = cell;
    }
    return el;
}

export function renderBundle(
    container: HTMLElement,
    bundle: AnalyticsBundleDoc,
    onApply: (payload: { deviceId: string; verb: string; arguments: Record<string, unknown> }) => void,
): void {
    container.textContent = "";

    const descriptive = descriptiveRows(bundle);
    if (descriptive.length) {
        container.appendChild(sectionTitle("Descriptive"));
        container.appendChild(
            table(
                ["series", "n", "mean", "min", "max", "std", "slope/s", "period"],
                descriptive.slice(0, 30).map((r) => [r.series, String(r.count), r.mean, r.min, r.max, r.std, r.slope, r.period]),
            ),
        );
    }

    const diagnostic = bundle.reports.diagnostic;
    if (diagnostic) {
        container.appendChild(sectionTitle("Diagnostic"));
        const narrative = document.createElement("p");
        narrative.className = "narrative";
        narrative.textContent = diagnostic.narrative;
        container.appendChild(narrative);
        const anomalies = anomalyRows(bundle);
        if (anomalies.length) {
            container.appendChild(
                table(
                    ["series", "t (ms)", "value", "z"],
                    anomalies.slice(0, 20).map((r) => [r.series, String(r.timestampMs), r.value, r.z]),
                ),
            );
        }
    }

    const forecasts = forecastRows(bundle);
    if (forecasts.length) {
        container.appendChild(sectionTitle("Predictive"));
        container.appendChild(
            table(
                ["series", "method", "next", "mae"],
                forecasts.slice(0, 30).map((r) => [r.series, r.method, r.next, r.mae]),
            ),
        );
    }

    for (const recommendation of recommendations(bundle)) {
        container.appendChild(sectionTitle(`Prescriptive: ${recommendation.device_id}`));
        const card = document.createElement("div");
        card.className = "recommendation";
        const headline = document.createElement("p");
        headline.innerHTML = `recommended interface: <strong>${recommendation.recommended_interface}</strong>`;
        card.appendChild(headline);
        card.appendChild(
            table(
                ["kind", "score", "q", "c", "l"],
                recommendation.ranked.map((s) => [
                    s.kind,
                    s.score.toFixed(3),
                    s.q.toFixed(3),
                    s.c.toFixed(3),
                    String(s.l),
                ]),
            ),
        );
        const payload = applyPayload(recommendation);
        const button = document.createElement("button");
        button.textContent = payload ? `Apply: switch to ${recommendation.recommended_interface}` : "Already on recommended interface";
        button.disabled = payload === null;
        if (payload) button.addEventListener("click", () => onApply(payload));
        card.appendChild(button);
        container.appendChild(card);
    }
}

function sectionTitle(text: string): HTMLElement {
    const h = document.createElement("h3");
    h.textContent = text;
    return h;
}
