// View models for the graph and charts. Pure functions over gateway
// documents so they can be contract-tested against a recorded session.

import { ChangeSetDoc, GraphDoc, KpiDoc, RelationshipDoc, TwinDoc } from "./types.js";
import { positionNodes } from "./layout.js";

export type NodeRole = "device" | "source" | "sensor";
export type Health = "fresh" | "aging" | "stale";

export interface GraphNode {
    id: string;
    externalId: string;
    model: string;
    role: NodeRole;
    label: string;
    lastUpdatedMs: number;
    health: Health;
    x: number;
    y: number;
}

export interface GraphEdge {
    id: string;
    source: string;
    target: string;
    strengthDbm: number;
    width: number;
}

export interface GraphViewModel {
    nodes: GraphNode[];
    edges: GraphEdge[];
    byId: Map<string, GraphNode>;
}

const SOURCE_MODELS = new Set(["cell", "wifi-ap", "bt-peer"]);

export function roleOf(twin: TwinDoc): NodeRole {
    if (SOURCE_MODELS.has(twin.model)) return "source";
    const capabilities = twin.properties["capabilities"];
    if (Array.isArray(capabilities) && capabilities.includes("environment")) return "sensor";
    return "device";
}

// Edge width is linear in dBm over [-100, -40], clamped: legibility, not
// radio fidelity.
export function edgeWidth(strengthDbm: number): number {
    const clamped = Math.max(-100, Math.min(-40, strengthDbm));
    const t = (clamped + 100) / 60;
    return 1 + 7 * t;
}

export function healthOf(lastUpdatedMs: number, nowMs: number, ttlMs = 60_000): Health {
    const age = nowMs - lastUpdatedMs;
    if (age < ttlMs / 2) return "fresh";
    if (age < ttlMs) return "aging";
    return "stale";
}

export function buildGraphViewModel(graph: GraphDoc, nowMs: number, ttlMs = 60_000): GraphViewModel {
    const nodes: GraphNode[] = graph.twins.map((twin) => ({
        id: twin.twin_id,
        externalId: twin.external_id,
        model: twin.model,
        role: roleOf(twin),
        label: twin.external_id,
        lastUpdatedMs: twin.last_updated_ms,
        health: healthOf(twin.last_updated_ms, nowMs, ttlMs),
        x: 0,
        y: 0,
    }));
    positionNodes(nodes);
    const byId = new Map(nodes.map((n) => [n.id, n]));
    const edges: GraphEdge[] = graph.relationships
        .filter((r) => byId.has(r.source_twin) && byId.has(r.target_twin))
        .map((r: RelationshipDoc) => ({
            id: r.rel_id,
            source: r.source_twin,
            target: r.target_twin,
            strengthDbm: r.signal_strength_dbm,
            width: edgeWidth(r.signal_strength_dbm),
        }));
    return { nodes, edges, byId };
}

// A changeset only carries ids. Removals apply immediately; additions and
// updates need the authoritative documents, so the caller refetches (the
// view still updates without a page reload).
export function applyChangeSet(
    model: GraphViewModel,
    changeset: ChangeSetDoc,
): { model: GraphViewModel; needsRefetch: boolean } {
    const removedNodes = new Set(changeset.removed_instances);
    const removedEdges = new Set(changeset.removed_relationships);
    let model2 = model;
    if (removedNodes.size > 0 || removedEdges.size > 0) {
        const nodes = model.nodes.filter((n) => !removedNodes.has(n.id));
        const byId = new Map(nodes.map((n) => [n.id, n]));
        const edges = model.edges.filter(
            (e) => !removedEdges.has(e.id) && byId.has(e.source) && byId.has(e.target),
        );
        model2 = { nodes, edges, byId };
    }
    const needsRefetch =
        changeset.added_instances.length > 0 ||
        changeset.updated_instances.length > 0 ||
        changeset.added_relationships.length > 0 ||
        changeset.updated_relationships.length > 0;
    return { model: model2, needsRefetch };
}

// ---------------------------------------------------------------------------
// Charts

export interface ChartViewModel {
    entity: string;
    metric: string;
    unit: string;
    raw: [number, number][];
    smoothed: [number, number][];
    windowMs: number;
}

export function unitFor(metric: string): string {
    if (metric.startsWith("rssi") || metric.startsWith("rsrp")) return "dBm";
    if (metric.startsWith("rsrq")) return "dB";
    if (metric.startsWith("co2")) return "ppm";
    if (metric.startsWith("pm25")) return "µg/m³";
    if (metric.startsWith("motion")) return "events";
    return "";
}

export function makeChart(
    entity: string,
    metric: string,
    raw: KpiDoc,
    smoothed: KpiDoc | null,
    windowMs = 120_000,
): ChartViewModel {
    const chart: ChartViewModel = {
        entity,
        metric,
        unit: unitFor(metric),
        raw: [...raw.samples],
        smoothed: smoothed ? [...smoothed.samples] : [],
        windowMs,
    };
    trimChart(chart);
    return chart;
}

function appendSamples(target: [number, number][], samples: [number, number][]): void {
    for (const [t, v] of samples) {
        const last = target[target.length - 1];
        if (last && t <= last[0]) {
            if (t === last[0]) target[target.length - 1] = [t, v];
            continue;
        }
        target.push([t, v]);
    }
}

export function appendTick(
    chart: ChartViewModel,
    frame: { entity: string; metric: string; samples: [number, number][] },
): boolean {
    if (frame.entity !== chart.entity) return false;
    if (frame.metric === chart.metric) {
        appendSamples(chart.raw, frame.samples);
    } else if (frame.metric === `${chart.metric}_smoothed`) {
        appendSamples(chart.smoothed, frame.samples);
    } else {
        return false;
    }
    trimChart(chart);
    return true;
}

function trimChart(chart: ChartViewModel): void {
    const newest = Math.max(
        chart.raw.length ? chart.raw[chart.raw.length - 1][0] : 0,
        chart.smoothed.length ? chart.smoothed[chart.smoothed.length - 1][0] : 0,
    );
    const cutoff = newest - chart.windowMs;
    chart.raw = chart.raw.filter(([t]) => t >= cutoff);
    chart.smoothed = chart.smoothed.filter(([t]) => t >= cutoff);
}
