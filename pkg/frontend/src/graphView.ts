import type { GraphJson } from "./types.js";

export interface PlacedNode {
  id: string;
  type: string;
  isInput: boolean;
  isVisualization: boolean;
  layer: number;
  order: number;
  x: number;
  y: number;
}

export interface Layout {
  nodes: PlacedNode[];
  edges: { from: string; to: string }[];
  layers: number;
}

/** Static layered layout of the dependency graph: each node sits one layer
 * past its deepest producer (longest-path layering), sources at layer 0. */
export function layeredLayout(
  graph: GraphJson,
  width = 800,
  rowHeight = 90,
): Layout {
  const producers = new Map<string, string[]>();
  for (const node of graph.nodes) producers.set(node.id, []);
  for (const edge of graph.edges) producers.get(edge.to)?.push(edge.from);

  const layerOf = new Map<string, number>();
  const visiting = new Set<string>();
  const layer = (id: string): number => {
    const known = layerOf.get(id);
    if (known !== undefined) return known;
    if (visiting.has(id)) return 0; // defensive: the server forbids cycles
    visiting.add(id);
    const ins = producers.get(id) ?? [];
    const value = ins.length === 0 ? 0 : 1 + Math.max(...ins.map(layer));
    visiting.delete(id);
    layerOf.set(id, value);
    return value;
  };
  for (const node of graph.nodes) layer(node.id);

  const byLayer = new Map<number, string[]>();
  for (const node of graph.nodes) {
    const l = layerOf.get(node.id) ?? 0;
    if (!byLayer.has(l)) byLayer.set(l, []);
    byLayer.get(l)!.push(node.id);
  }

  const nodes: PlacedNode[] = graph.nodes.map((node) => {
    const l = layerOf.get(node.id) ?? 0;
    const row = byLayer.get(l)!;
    const order = row.indexOf(node.id);
    return {
      id: node.id,
      type: node.type,
      isInput: node.is_input,
      isVisualization: node.is_visualization,
      layer: l,
      order,
      x: ((order + 1) * width) / (row.length + 1),
      y: (l + 0.5) * rowHeight,
    };
  });
  return {
    nodes,
    edges: graph.edges.map((e) => ({ from: e.from, to: e.to })),
    layers: byLayer.size,
  };
}
