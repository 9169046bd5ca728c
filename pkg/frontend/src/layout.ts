// Deterministic layout: devices on an inner ring, signal sources on an
// outer ring, environment sensors along the bottom. Stable across reloads
// because nodes are placed in sorted-id order.

interface Positionable {
    id: string;
    role: "device" | "source" | "sensor";
    x: number;
    y: number;
}

export const CANVAS = { width: 900, height: 620 };

export function positionNodes(nodes: Positionable[]): void {
    const cx = CANVAS.width / 2;
    const cy = (CANVAS.height - 80) / 2;
    const devices = nodes.filter((n) => n.role === "device").sort(byId);
    const sources = nodes.filter((n) => n.role === "source").sort(byId);
    const sensors = nodes.filter((n) => n.role === "sensor").sort(byId);

    ring(devices, cx, cy, Math.min(cx, cy) * 0.45);
    ring(sources, cx, cy, Math.min(cx, cy) * 0.92);
    sensors.forEach((node, i) => {
        node.x = 60 + (i * (CANVAS.width - 120)) / Math.max(1, sensors.length - 1 || 1);
        node.y = CANVAS.height - 30;
    });
}

function ring(nodes: Positionable[], cx: number, cy: number, radius: number): void {
    nodes.forEach((node, i) => {
        const angle = (2 * Math.PI * i) / Math.max(1, nodes.length) - Math.PI / 2;
        node.x = cx + radius * Math.cos(angle);
        node.y = cy + radius * Math.sin(angle);
    });
}

function byId(a: { id: string }, b: { id: string }): number {
    return a.id.length - b.id.length || (a.id < b.id ? -1 : a.id > b.id ? 1 : 0);
}
