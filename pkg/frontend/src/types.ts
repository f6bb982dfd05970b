/** Wire types of the progrun server API. */

export interface PublicationEvent {
  module_id: string;
  run_number: number;
}

export interface TableSlice {
  columns: Record<string, (number | string | null)[]>;
  row_ids: number[];
  total_rows: number;
  offset: number;
}

export interface ModuleSummary {
  id: string;
  type: string;
  state: string;
  is_input: boolean;
  is_visualization: boolean;
  parameters: Record<string, unknown>;
  inputs: Record<string, string | null>;
  outputs: string[];
  last_run: { run_number: number } | null;
}

export interface GraphNode {
  id: string;
  type: string;
  state: string;
  is_input: boolean;
  is_visualization: boolean;
}

export interface GraphEdge {
  from: string;
  from_slot: string;
  to: string;
  to_slot: string;
}

export interface GraphJson {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface SamplePoint {
  id: number;
  x: number;
  y: number;
}

export interface CentroidHandle {
  index: number;
  x: number;
  y: number;
}

export interface AxisBounds {
  lo: number;
  hi: number;
}

/** Viewport in data coordinates: per-axis bounds. */
export type Viewport = Record<string, AxisBounds>;
