import { describe, expect, it } from "vitest";

import { layeredLayout } from "../src/graphView.js";
import type { GraphJson } from "../src/types.js";

function node(id: string, extra: Partial<GraphJson["nodes"][0]> = {}) {
  return { id, type: id, state: "blocked", is_input: false, is_visualization: false, ...extra };
}

const heatmapGraph: GraphJson = {
  nodes: [node("csv"), node("min"), node("max"), node("hist"), node("heat", { is_visualization: true })],
  edges: [
    { from: "csv", from_slot: "df", to: "min", to_slot: "df" },
    { from: "csv", from_slot: "df", to: "max", to_slot: "df" },
    { from: "csv", from_slot: "df", to: "hist", to_slot: "df" },
    { from: "min", from_slot: "df", to: "hist", to_slot: "min" },
    { from: "max", from_slot: "df", to: "hist", to_slot: "max" },
    { from: "hist", from_slot: "df", to: "heat", to_slot: "array" },
  ],
};

describe("layeredLayout", () => {
  it("layers every node one past its deepest producer", () => {
    const layout = layeredLayout(heatmapGraph);
    const layer = Object.fromEntries(layout.nodes.map((n) => [n.id, n.layer]));
    expect(layer["csv"]).toBe(0);
    expect(layer["min"]).toBe(1);
    expect(layer["max"]).toBe(1);
    expect(layer["hist"]).toBe(2);
    expect(layer["heat"]).toBe(3);
    expect(layout.layers).toBe(4);
  });

  it("edges always point to a strictly deeper layer", () => {
    const layout = layeredLayout(heatmapGraph);
    const layer = new Map(layout.nodes.map((n) => [n.id, n.layer]));
    for (const edge of layout.edges) {
      expect(layer.get(edge.to)!).toBeGreaterThan(layer.get(edge.from)!);
    }
  });

  it("spreads rows horizontally inside the canvas width", () => {
    const layout = layeredLayout(heatmapGraph, 600);
    for (const n of layout.nodes) {
      expect(n.x).toBeGreaterThan(0);
      expect(n.x).toBeLessThan(600);
    }
    const row1 = layout.nodes.filter((n) => n.layer === 1).map((n) => n.x);
    expect(new Set(row1).size).toBe(row1.length); // no overlap
  });

  it("keeps the visualization flag for styling", () => {
    const layout = layeredLayout(heatmapGraph);
    expect(layout.nodes.find((n) => n.id === "heat")?.isVisualization).toBe(true);
  });
});
