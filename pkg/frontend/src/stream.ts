// Live event stream with reconnect. After a drop the client resubscribes
// and asks the owner to refetch full state, so a recovered view equals a
// fresh load.

import { StreamFrame } from "./types.js";

export type StreamState = "connecting" | "live" | "reconnecting" | "closed";

// Shape shared by the browser WebSocket and test fakes; `any` keeps the
// event types compatible in both directions.
export interface WebSocketLike {
    send(data: string): void;
    close(): void;
    // eslint-disable-next-line @typescript-eslint/no-explicit-any
    onopen: ((ev?: any) => void) | null;
    onclose: ((ev?: any) => void) | null;
    onmessage: ((ev: any) => void) | null;
    onerror: ((ev?: any) => void) | null;
}

export function parseFrame(text: string): StreamFrame | null {
    let doc: unknown;
    try {
        doc = JSON.parse(text);
    } catch {
        return null;
    }
    if (typeof doc !== "object" || doc === null) return null;
    const frame = doc as Record<string, unknown>;
    if (frame["type"] === "subscribed" && Array.isArray(frame["entities"])) {
        return { type: "subscribed", entities: frame["entities"] as string[] };
    }
    if (frame["type"] === "changeset" && typeof frame["changeset"] === "object" && frame["changeset"] !== null) {
        const cs = frame["changeset"] as Record<string, unknown>;
        const lists = [
            "added_instances",
            "updated_instances",
            "removed_instances",
            "added_relationships",
            "updated_relationships",
            "removed_relationships",
        ];
        if (!lists.every((k) => Array.isArray(cs[k]))) return null;
        return { type: "changeset", changeset: cs as never };
    }
    if (
        frame["type"] === "kpi_tick" &&
        typeof frame["entity"] === "string" &&
        typeof frame["metric"] === "string" &&
        Array.isArray(frame["samples"])
    ) {
        return {
            type: "kpi_tick",
            entity: frame["entity"],
            metric: frame["metric"],
            samples: frame["samples"] as [number, number][],
        };
    }
    return null;
}

export class LiveStream {
    private ws: WebSocketLike | null = null;
    private entities: string[] = [];
    private state: StreamState = "closed";
    private retryMs = 500;
    private stopped = false;
    private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

    constructor(
        private readonly openSocket: () => WebSocketLike,
        private readonly onFrame: (frame: StreamFrame) => void,
        private readonly onState: (state: StreamState) => void,
        // Called after every reconnect: refetch + resubscribe restores a
        // view equal to a fresh load.
        private readonly onResync: () => void,
        private readonly schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
    ) {}

    connect(entities: string[]): void {
        this.entities = entities;
        this.stopped = false;
        this.open(false);
    }

    subscribe(entities: string[]): void {
        this.entities = entities;
        if (this.ws && this.state === "live") {
            this.ws.send(JSON.stringify({ subscribe: this.entities }));
        }
    }

    private setState(state: StreamState): void {
        this.state = state;
        this.onState(state);
    }

    private open(isReconnect: boolean): void {
        if (this.stopped) return;
        this.setState(isReconnect ? "reconnecting" : "connecting");
        let ws: WebSocketLike;
        try {
            ws = this.openSocket();
        } catch {
            this.scheduleRetry();
            return;
        }
        this.ws = ws;
        ws.onopen = () => {
            this.retryMs = 500;
            ws.send(JSON.stringify({ subscribe: this.entities }));
            this.setState("live");
            if (isReconnect) this.onResync();
        };
        ws.onmessage = (event) => {
            const frame = parseFrame(event.data);
            if (frame !== null) this.onFrame(frame);
        };
        ws.onclose = () => {
            this.ws = null;
            if (!this.stopped) this.scheduleRetry();
        };
        ws.onerror = () => {
            // close follows; nothing to do here
        };
    }

    private scheduleRetry(): void {
        this.setState("reconnecting");
        this.reconnectTimer = this.schedule(() => this.open(true), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 10_000);
    }

    close(): void {
        this.stopped = true;
        if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
        if (this.ws) this.ws.close();
        this.setState("closed");
    }

    get currentState(): StreamState {
        return this.state;
    }
}
