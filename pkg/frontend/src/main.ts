// Console wiring: fetch the graph, keep it live over the stream, chart the
// selected entity's series, run analytics, apply recommendations.

import { Gateway, GatewayError } from "./api.js";
import { renderBundle } from "./analytics_panel.js";
import { renderChart } from "./chart_view.js";
import { renderGraph } from "./graph_view.js";
import {
    ChartViewModel,
    GraphViewModel,
    appendTick,
    applyChangeSet,
    buildGraphViewModel,
    makeChart,
} from "./model.js";
import { LiveStream } from "./stream.js";
import { GraphDoc, StreamFrame } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const gateway = new Gateway("");
let graphDoc: GraphDoc = { twins: [], relationships: [] };
let model: GraphViewModel = buildGraphViewModel(graphDoc, Date.now());
let selected: string | null = null;
let chart: ChartViewModel | null = null;
let refetchQueued = false;

const svg = document.querySelector<SVGSVGElement>("#graph")!;
const canvas = $<HTMLCanvasElement>("chart");
const banner = $("banner");
const detail = $("detail");
const analyticsOut = $("analytics-output");
const toast = $("toast");

function showToast(text: string, isError = false): void {
    toast.textContent = text;
    toast.className = isError ? "toast error" : "toast ok";
    setTimeout(() => (toast.className = "toast hidden"), 4000);
}

function redrawGraph(): void {
    model = buildGraphViewModel(graphDoc, Date.now());
    renderGraph(svg, model, selected, onSelect);
    $("graph-stats").textContent = `${model.nodes.length} twins, ${model.edges.length} relationships`;
}

async function refetchGraph(): Promise<void> {
    graphDoc = await gateway.graph();
    redrawGraph();
    renderDetail();
}

// Changeset frames carry ids; removals apply locally at once, adds and
// updates refetch the authoritative view (throttled to one per second).
function onFrame(frame: StreamFrame): void {
    if (frame.type === "changeset") {
        const applied = applyChangeSet(model, frame.changeset);
        if (applied.model !== model) {
            model = applied.model;
            graphDoc = {
                twins: graphDoc.twins.filter((t) => model.byId.has(t.twin_id)),
                relationships: graphDoc.relationships.filter((r) =>
                    applied.model.edges.some((e) => e.id === r.rel_id),
                ),
            };
            renderGraph(svg, model, selected, onSelect);
        }
        if (applied.needsRefetch && !refetchQueued) {
            refetchQueued = true;
            setTimeout(() => {
                refetchQueued = false;
                refetchGraph().catch(() => undefined);
            }, 1000);
        }
    } else if (frame.type === "kpi_tick" && chart) {
        if (appendTick(chart, frame)) renderChart(canvas, chart);
    }
}

const stream = new LiveStream(
    () => new WebSocket(gateway.streamUrl()),
    onFrame,
    (state) => {
        banner.textContent =
            state === "live"
                ? ""
                : state === "reconnecting"
                  ? "connection lost, reconnecting; view may be stale"
                  : state === "connecting"
                    ? "connecting..."
                    : "stream closed";
        banner.className = state === "live" ? "banner hidden" : "banner visible";
        document.body.classList.toggle("stale", state !== "live");
    },
    () => {
        // Reconnect recovers full state: refetch + resubscribe.
        refetchGraph().catch(() => undefined);
        subscribeForSelection();
    },
);

function subscribeForSelection(): void {
    const entities: string[] = [];
    if (selected) {
        entities.push(selected);
        for (const edge of model.edges) {
            if (edge.source === selected || edge.target === selected) entities.push(edge.id);
        }
    }
    stream.subscribe(entities);
}

function onSelect(twinId: string): void {
    selected = twinId;
    renderGraph(svg, model, selected, onSelect);
    renderDetail();
    subscribeForSelection();
    const edge = model.edges.find((e) => e.source === twinId || e.target === twinId);
    if (edge) {
        loadChart(edge.id, "rssi_dbm").catch(() => undefined);
    } else {
        const node = model.byId.get(twinId);
        if (node?.role === "sensor") loadChart(twinId, "co2_ppm").catch(() => undefined);
    }
}

function renderDetail(): void {
    detail.textContent = "";
    if (!selected) {
        detail.textContent = "click a node to inspect it";
        return;
    }
    const twin = graphDoc.twins.find((t) => t.twin_id === selected);
    if (!twin) {
        detail.textContent = "selected twin is gone";
        return;
    }
    const title = document.createElement("h3");
    title.textContent = `${twin.external_id} (${twin.model})`;
    detail.appendChild(title);
    const list = document.createElement("dl");
    for (const [key, value] of Object.entries(twin.properties)) {
        const dt = document.createElement("dt");
        dt.textContent = key;
        const dd = document.createElement("dd");
        dd.textContent = Array.isArray(value) ? value.join(", ") : String(value);
        list.appendChild(dt);
        list.appendChild(dd);
    }
    detail.appendChild(list);
    const related = graphDoc.relationships.filter(
        (r) => r.source_twin === selected || r.target_twin === selected,
    );
    const signals = document.createElement("p");
    signals.textContent = `${related.length} signal relationship(s)`;
    detail.appendChild(signals);
    for (const relationship of related.slice(0, 12)) {
        const row = document.createElement("button");
        row.className = "series-link";
        row.textContent = `${relationship.rel_id}: ${relationship.signal_strength_dbm.toFixed(1)} dBm`;
        row.addEventListener("click", () => loadChart(relationship.rel_id, "rssi_dbm"));
        detail.appendChild(row);
    }
}

async function loadChart(entity: string, metric: string): Promise<void> {
    try {
        const raw = await gateway.kpis(entity, metric);
        let smoothed = null;
        try {
            smoothed = await gateway.kpis(entity, `${metric}_smoothed`);
        } catch {
            // series without a smoothed variant
        }
        chart = makeChart(entity, metric, raw, smoothed);
        renderChart(canvas, chart);
    } catch (error) {
        chart = null;
        renderChart(canvas, null);
        if (error instanceof GatewayError && error.code === "unknown_series") {
            showToast(`no series ${entity}/${metric}`, true);
        }
    }
}

async function runAnalytics(): Promise<void> {
    const stages = ["descriptive", "diagnostic", "predictive", "prescriptive"];
    const chosen = stages.slice(0, Number(($("stage-count") as HTMLSelectElement).value));
    const body: Record<string, unknown> = { stages: chosen };
    const deadline = Number(($("deadline") as HTMLInputElement).value);
    if (chosen.includes("prescriptive")) {
        body["profile"] = { payload_bytes: 1024, deadline_ms: deadline || 200 };
    }
    if (selected) {
        const scope = [selected];
        for (const edge of model.edges) {
            if (edge.source === selected) scope.push(edge.target);
        }
        body["scope"] = scope;
    }
    analyticsOut.textContent = "running...";
    try {
        const bundle = await gateway.runAnalytics(body);
        renderBundle(analyticsOut, bundle, (payload) => {
            gateway
                .postAction(payload.deviceId, payload.verb, payload.arguments)
                .then(() => showToast(`action accepted for ${payload.deviceId}`))
                .catch((error: unknown) => {
                    const message = error instanceof GatewayError ? `${error.code}: ${error.message}` : String(error);
                    showToast(message, true);
                });
        });
    } catch (error) {
        const message = error instanceof GatewayError ? `${error.code}: ${error.message}` : String(error);
        analyticsOut.textContent = `analytics failed: ${message}`;
    }
}

function boot(): void {
    $("token").addEventListener("change", (event) => {
        gateway.token = (event.target as HTMLInputElement).value;
    });
    gateway.token = ($("token") as HTMLInputElement).value;
    $("run-analytics").addEventListener("click", () => void runAnalytics());
    $("refresh").addEventListener("click", () => void refetchGraph());
    refetchGraph()
        .then(() => stream.connect([]))
        .catch((error) => {
            banner.textContent = `cannot reach gateway: ${String(error)}`;
            banner.className = "banner visible";
        });
    setInterval(() => {
        // Staleness tint depends on wall time, refresh it periodically.
        renderGraph(svg, (model = buildGraphViewModel(graphDoc, Date.now())), selected, onSelect);
    }, 10_000);
}

boot();
