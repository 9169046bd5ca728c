// SVG renderer for the twin graph. Full rebuild per update: the graph is
// desk-scale (tens of nodes), simplicity wins over diffing.

import { CANVAS } from "./layout.js";
import { GraphViewModel } from "./model.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderGraph(
    svg: SVGSVGElement,
    model: GraphViewModel,
    selected: string | null,
    onSelect: (twinId: string) => void,
): void {
    svg.setAttribute("viewBox", `0 0 ${CANVAS.width} ${CANVAS.height}`);
    svg.textContent = "";

    for (const edge of model.edges) {
        const a = model.byId.get(edge.source);
        const b = model.byId.get(edge.target);
        if (!a || !b) continue;
        const line = document.createElementNS(SVG_NS, "line");
        line.setAttribute("x1", String(a.x));
        line.setAttribute("y1", String(a.y));
        line.setAttribute("x2", String(b.x));
        line.setAttribute("y2", String(b.y));
        line.setAttribute("stroke-width", edge.width.toFixed(2));
        line.classList.add("edge");
        const title = document.createElementNS(SVG_NS, "title");
        title.textContent = `${edge.id}: ${edge.strengthDbm.toFixed(1)} dBm`;
        line.appendChild(title);
        svg.appendChild(line);
    }

    for (const node of model.nodes) {
        const group = document.createElementNS(SVG_NS, "g");
        group.classList.add("node", `role-${node.role}`, `health-${node.health}`);
        if (node.id === selected) group.classList.add("selected");
        group.addEventListener("click", () => onSelect(node.id));

        const circle = document.createElementNS(SVG_NS, "circle");
        circle.setAttribute("cx", String(node.x));
        circle.setAttribute("cy", String(node.y));
        circle.setAttribute("r", node.role === "device" ? "14" : "10");
        group.appendChild(circle);

        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("x", String(node.x));
        label.setAttribute("y", String(node.y - 16));
        label.textContent = node.label;
        group.appendChild(label);

        svg.appendChild(group);
    }
}
