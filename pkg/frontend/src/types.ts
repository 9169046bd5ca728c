// Wire shapes of the gateway API. The console never invents data beyond
// these documents and the stream frames derived from them.

export interface TwinDoc {
    twin_id: string;
    model: string;
    external_id: string;
    properties: Record<string, unknown>;
    last_updated_ms: number;
}

export interface RelationshipDoc {
    rel_id: string;
    source_twin: string;
    target_twin: string;
    kind: string;
    signal_strength_dbm: number;
    last_updated_ms: number;
}

export interface GraphDoc {
    twins: TwinDoc[];
    relationships: RelationshipDoc[];
}

export interface KpiDoc {
    entity: string;
    metric: string;
    samples: [number, number][];
}

export interface ChangeSetDoc {
    added_instances: string[];
    updated_instances: string[];
    removed_instances: string[];
    added_relationships: string[];
    updated_relationships: string[];
    removed_relationships: string[];
}

export type StreamFrame =
    | { type: "subscribed"; entities: string[] }
    | { type: "changeset"; changeset: ChangeSetDoc }
    | { type: "kpi_tick"; entity: string; metric: string; samples: [number, number][] };

export interface ScoredCandidateDoc {
    kind: string;
    score: number;
    q: number;
    c: number;
    l: number;
    raw_quality: number;
    predicted_dbm: number | null;
}

export interface RecommendationDoc {
    device_id: string;
    recommended_interface: string;
    ranked: ScoredCandidateDoc[];
    proposed_action: {
        device_id: string;
        verb: string;
        arguments: Record<string, unknown>;
    } | null;
}

export interface SeriesStatsDoc {
    count: number;
    mean: number;
    min: number;
    max: number;
    std: number;
    slope_per_s: number;
    seasonality_period: number | null;
}

export interface AnalyticsBundleDoc {
    reports: {
        descriptive?: { per_series: Record<string, SeriesStatsDoc> };
        diagnostic?: {
            anomalies: Record<string, [number, number, number][]>;
            correlations: { series_a: string; series_b: string; pearson_r: number }[];
            narrative: string;
        };
        predictive?: {
            horizon: number;
            per_series: Record<
                string,
                { method: string; forecasts: [number, number][]; in_sample_mae: number }
            >;
        };
        prescriptive?: { per_device: RecommendationDoc[] };
    };
    timings_ms: Record<string, number>;
}

export interface ApiErrorDoc {
    status: number;
    code: string;
    message: string;
}
