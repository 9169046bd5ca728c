// Canvas line chart: raw trace thin, smoothed trace bold, unit labeled.

import { ChartViewModel } from "./model.js";

export function renderChart(canvas: HTMLCanvasElement, chart: ChartViewModel | null): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.font = "12px sans-serif";
    ctx.fillStyle = "#9aa7b0";

    if (!chart || (chart.raw.length === 0 && chart.smoothed.length === 0)) {
        ctx.fillText(chart ? "no samples for this series" : "select a node or edge to chart its series", 12, 20);
        return;
    }

    const all = [...chart.raw, ...chart.smoothed];
    const tMin = Math.min(...all.map(([t]) => t));
    const tMax = Math.max(...all.map(([t]) => t));
    const vMin = Math.min(...all.map(([, v]) => v));
    const vMax = Math.max(...all.map(([, v]) => v));
    const pad = 34;
    const spanT = Math.max(1, tMax - tMin);
    const spanV = Math.max(1e-9, vMax - vMin);
    const x = (t: number) => pad + ((t - tMin) / spanT) * (width - pad - 10);
    const y = (v: number) => height - pad - ((v - vMin) / spanV) * (height - pad - 14);

    ctx.strokeStyle = "#2c3a44";
    ctx.beginPath();
    ctx.moveTo(pad, 10);
    ctx.lineTo(pad, height - pad);
    ctx.lineTo(width - 8, height - pad);
    ctx.stroke();

    const trace = (samples: [number, number][], color: string, lineWidth: number) => {
        if (samples.length === 0) return;
        ctx.strokeStyle = color;
        ctx.lineWidth = lineWidth;
        ctx.beginPath();
        samples.forEach(([t, v], i) => {
            if (i === 0) ctx.moveTo(x(t), y(v));
            else ctx.lineTo(x(t), y(v));
        });
        ctx.stroke();
    };
    trace(chart.raw, "#5a7d94", 1);
    trace(chart.smoothed, "#62d0a6", 2);

    ctx.fillStyle = "#c6d4dd";
    ctx.fillText(`${chart.entity} / ${chart.metric} [${chart.unit}]`, pad + 4, 12);
    ctx.fillStyle = "#9aa7b0";
    ctx.fillText(vMax.toFixed(1), 2, 16);
    ctx.fillText(vMin.toFixed(1), 2, height - pad + 4);
    const windowS = ((tMax - tMin) / 1000).toFixed(0);
    ctx.fillText(`window ${windowS}s  (raw thin, smoothed bold)`, pad + 4, height - 8);
}
