// Wire shapes served by the controller HTTP API.

export interface TopologyNode {
  name: string;
  address: string | null;
  remote: string | null;
  status: string;
}

export interface Topology {
  nodes: TopologyNode[];
  edges: { src: string; dst: string }[];
  mode: "paused" | "free-run";
  paused_on: PausedOn | null;
}

export interface PausedOn {
  breakpoint: number;
  text: string;
  node: string;
  step_id: string | null;
  step_kind: string | null;
}

export interface DiffEntry {
  kind: "new" | "mod" | "del";
  dims?: Record<string, unknown>;
}

// Keyed "TypeName:<tagged pkey>" -> entry.
export type DiffWire = Record<string, DiffEntry>;

export interface HistoryEdge {
  src: string;
  dst: string;
  diff: DiffWire;
}

export interface HistoryWire {
  vertices: string[];
  edges: HistoryEdge[];
  head: string;
  refs: Record<string, string>;
}

// Type name -> tagged pkey -> dimension map.
export type StateWire = Record<string, Record<string, Record<string, unknown>>>;

export interface StepWire {
  step_id: string;
  node: string;
  kind: string;
  phases: string[];
  current_phase: number;
  origin: string | null;
  seq: number;
  mid_phase: boolean;
  done: boolean;
  noop: boolean;
  grants: number[];
}

export interface StepsWire {
  executed: StepWire[];
  pending: StepWire[];
}

export interface BreakpointWire {
  id: number;
  text: string;
}

export interface ControllerEvent {
  seq: number;
  type: string;
  [key: string]: unknown;
}
