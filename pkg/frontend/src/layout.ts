// Layered top-down layout for a version-history DAG: ROOT at the top,
// each version one rank below its deepest parent, ties within a rank
// ordered by version id so layouts are reproducible.

import type { HistoryWire } from "./types.js";

export interface LaidOutNode {
  id: string;
  rank: number;
  x: number;
  y: number;
}

export interface LaidOutEdge {
  src: string;
  dst: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Layout {
  nodes: LaidOutNode[];
  edges: LaidOutEdge[];
  width: number;
  height: number;
}

export const RANK_HEIGHT = 90;
export const COLUMN_WIDTH = 150;
export const MARGIN = 60;

export function ranks(history: HistoryWire): Map<string, number> {
  const parents = new Map<string, string[]>();
  for (const v of history.vertices) parents.set(v, []);
  for (const e of history.edges) parents.get(e.dst)?.push(e.src);

  const depth = new Map<string, number>();
  const visiting = new Set<string>();
  const walk = (v: string): number => {
    const known = depth.get(v);
    if (known !== undefined) return known;
    if (visiting.has(v)) return 0; // defensive: histories are acyclic
    visiting.add(v);
    const above = parents.get(v) ?? [];
    const d = above.length === 0 ? 0 : 1 + Math.max(...above.map(walk));
    visiting.delete(v);
    depth.set(v, d);
    return d;
  };
  for (const v of history.vertices) walk(v);
  return depth;
}

export function computeLayout(history: HistoryWire): Layout {
  const depth = ranks(history);
  const byRank = new Map<number, string[]>();
  for (const v of history.vertices) {
    const r = depth.get(v) ?? 0;
    const row = byRank.get(r) ?? [];
    row.push(v);
    byRank.set(r, row);
  }
  const positions = new Map<string, LaidOutNode>();
  let widest = 1;
  for (const [rank, row] of byRank) {
    row.sort();
    widest = Math.max(widest, row.length);
    row.forEach((id, index) => {
      positions.set(id, {
        id,
        rank,
        x: MARGIN + index * COLUMN_WIDTH + (row.length === 1 ? COLUMN_WIDTH / 2 : 0),
        y: MARGIN + rank * RANK_HEIGHT,
      });
    });
  }
  const edges = history.edges.map((e) => {
    const a = positions.get(e.src)!;
    const b = positions.get(e.dst)!;
    return { src: e.src, dst: e.dst, x1: a.x, y1: a.y, x2: b.x, y2: b.y };
  });
  const maxRank = Math.max(0, ...byRank.keys());
  return {
    nodes: [...positions.values()].sort((a, b) => a.rank - b.rank || a.id.localeCompare(b.id)),
    edges,
    width: 2 * MARGIN + widest * COLUMN_WIDTH,
    height: 2 * MARGIN + (maxRank + 0.5) * RANK_HEIGHT,
  };
}
