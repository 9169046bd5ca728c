// Thin typed client over the gateway HTTP API.

import { AnalyticsBundleDoc, ApiErrorDoc, GraphDoc, KpiDoc } from "./types.js";

export class GatewayError extends Error {
    constructor(
        readonly status: number,
        readonly code: string,
        message: string,
    ) {
        super(message);
    }
}

async function unwrap<T>(response: Response): Promise<T> {
    if (response.ok) return (await response.json()) as T;
    let doc: ApiErrorDoc | null = null;
    try {
        doc = (await response.json()) as ApiErrorDoc;
    } catch {
        // non-JSON error body
    }
    throw new GatewayError(
        response.status,
        doc?.code ?? "http_error",
        doc?.message ?? `HTTP ${response.status}`,
    );
}

export class Gateway {
    constructor(
        readonly base: string = "",
        public token: string = "",
    ) {}

    async graph(): Promise<GraphDoc> {
        return unwrap<GraphDoc>(await fetch(`${this.base}/twins`));
    }

    async kpis(entity: string, metric: string, fromMs = 0): Promise<KpiDoc> {
        const params = new URLSearchParams({ entity, metric, from_ms: String(fromMs) });
        return unwrap<KpiDoc>(await fetch(`${this.base}/kpis?${params}`));
    }

    async kpiCatalog(entity: string): Promise<{ series: { entity: string; metric: string }[] }> {
        const params = new URLSearchParams({ entity });
        return unwrap(await fetch(`${this.base}/kpis/catalog?${params}`));
    }

    async runAnalytics(body: Record<string, unknown>): Promise<AnalyticsBundleDoc> {
        return unwrap<AnalyticsBundleDoc>(
            await fetch(`${this.base}/analytics/run`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(body),
            }),
        );
    }

    async postAction(
        deviceId: string,
        verb: string,
        arguments_: Record<string, unknown>,
    ): Promise<{ status: string; topic: string }> {
        return unwrap(
            await fetch(`${this.base}/actions`, {
                method: "POST",
                headers: {
                    "Content-Type": "application/json",
                    Authorization: `Bearer ${this.token}`,
                },
                body: JSON.stringify({ device_id: deviceId, verb, arguments: arguments_ }),
            }),
        );
    }

    streamUrl(): string {
        const base = this.base || `${location.protocol}//${location.host}`;
        return base.replace(/^http/, "ws") + "/stream";
    }
}
