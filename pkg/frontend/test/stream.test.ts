// Stream frame parsing and the reconnect/resubscribe state machine,
// driven through a fake socket.

import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { test } from "node:test";

import { LiveStream, StreamState, WebSocketLike, parseFrame } from "../src/stream.js";
import { StreamFrame } from "../src/types.js";

const session = JSON.parse(
    readFileSync(new URL("../../test/fixtures/session.json", import.meta.url), "utf-8"),
);

class FakeSocket implements WebSocketLike {
    sent: string[] = [];
    closed = false;
    onopen: ((ev?: unknown) => void) | null = null;
    onclose: ((ev?: unknown) => void) | null = null;
    onmessage: ((ev: { data: string }) => void) | null = null;
    onerror: ((ev?: unknown) => void) | null = null;

    send(data: string): void {
        this.sent.push(data);
    }

    close(): void {
        this.closed = true;
        this.onclose?.();
    }

    // test controls
    open(): void {
        this.onopen?.();
    }

    deliver(frame: unknown): void {
        this.onmessage?.({ data: JSON.stringify(frame) });
    }

    drop(): void {
        this.onclose?.();
    }
}

function harness() {
    const sockets: FakeSocket[] = [];
    const frames: StreamFrame[] = [];
    const states: StreamState[] = [];
    const pending: (() => void)[] = [];
    let resyncs = 0;
    const stream = new LiveStream(
        () => {
            const socket = new FakeSocket();
            sockets.push(socket);
            return socket;
        },
        (frame) => frames.push(frame),
        (state) => states.push(state),
        () => {
            resyncs += 1;
        },
        (fn) => {
            pending.push(fn);
            return 0 as unknown as ReturnType<typeof setTimeout>;
        },
    );
    return {
        stream,
        sockets,
        frames,
        states,
        pending,
        resyncs: () => resyncs,
        runPending: () => {
            const jobs = pending.splice(0);
            jobs.forEach((fn) => fn());
        },
    };
}

test("recorded frames all parse into typed frames", () => {
    for (const frame of session.stream_frames) {
        const parsed = parseFrame(JSON.stringify(frame));
        assert.ok(parsed !== null);
        assert.equal(parsed!.type, frame.type);
    }
});

test("garbage frames parse to null without throwing", () => {
    assert.equal(parseFrame("not json"), null);
    assert.equal(parseFrame("42"), null);
    assert.equal(parseFrame('{"type": "mystery"}'), null);
    assert.equal(parseFrame('{"type": "changeset", "changeset": {"added_instances": 5}}'), null);
});

test("subscribe frame is sent on open and frames are dispatched", () => {
    const h = harness();
    h.stream.connect(["r1"]);
    assert.equal(h.stream.currentState, "connecting");
    h.sockets[0].open();
    assert.equal(h.stream.currentState, "live");
    assert.deepEqual(JSON.parse(h.sockets[0].sent[0]), { subscribe: ["r1"] });
    h.sockets[0].deliver({ type: "kpi_tick", entity: "r1", metric: "rssi_dbm", samples: [[1, -70]] });
    assert.equal(h.frames.length, 1);
    assert.equal(h.frames[0].type, "kpi_tick");
});

test("drop triggers reconnect, resubscribe, and a resync callback", () => {
    const h = harness();
    h.stream.connect(["r1", "t1"]);
    h.sockets[0].open();
    h.sockets[0].drop();
    assert.equal(h.stream.currentState, "reconnecting");
    h.runPending();
    assert.equal(h.sockets.length, 2);
    h.sockets[1].open();
    assert.equal(h.stream.currentState, "live");
    assert.deepEqual(JSON.parse(h.sockets[1].sent[0]), { subscribe: ["r1", "t1"] });
    assert.equal(h.resyncs(), 1);
});

test("subscription changes are pushed on the live socket", () => {
    const h = harness();
    h.stream.connect([]);
    h.sockets[0].open();
    h.stream.subscribe(["t9"]);
    assert.deepEqual(JSON.parse(h.sockets[0].sent[1]), { subscribe: ["t9"] });
});

test("close stops the machine and ignores later drops", () => {
    const h = harness();
    h.stream.connect([]);
    h.sockets[0].open();
    h.stream.close();
    assert.equal(h.stream.currentState, "closed");
    h.runPending();
    assert.equal(h.sockets.length, 1);
});

test("malformed frames from the wire are ignored", () => {
    const h = harness();
    h.stream.connect([]);
    h.sockets[0].open();
    h.sockets[0].onmessage?.({ data: "junk{{" });
    assert.equal(h.frames.length, 0);
});
