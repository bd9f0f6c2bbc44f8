// Formatting helpers: tagged primary keys, diff rows, state tables.
// Everything returns plain data or HTML strings so it can be tested
// without a browser.

import type { DiffWire, StateWire } from "./types.js";

export function decodePkey(tagged: string): string {
  const sep = tagged.indexOf(":");
  if (sep < 0) return tagged;
  const tag = tagged.slice(0, sep);
  const raw = tagged.slice(sep + 1);
  switch (tag) {
    case "i":
    case "f":
      return raw;
    case "b":
      return raw;
    case "s":
      return raw;
    default:
      return tagged;
  }
}

export function splitDiffKey(key: string): { type: string; pkey: string } {
  const sep = key.indexOf(":");
  if (sep < 0) return { type: key, pkey: "" };
  return { type: key.slice(0, sep), pkey: decodePkey(key.slice(sep + 1)) };
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function shortId(id: string): string {
  return id === "ROOT" ? "ROOT" : id.slice(0, 4);
}

export interface DiffRow {
  type: string;
  pkey: string;
  kind: "new" | "mod" | "del";
  dims: Record<string, unknown>;
}

export function diffRows(diff: DiffWire): DiffRow[] {
  const rows = Object.entries(diff).map(([key, entry]) => {
    const { type, pkey } = splitDiffKey(key);
    return { type, pkey, kind: entry.kind, dims: entry.dims ?? {} };
  });
  rows.sort((a, b) =>
    a.type === b.type ? a.pkey.localeCompare(b.pkey) : a.type.localeCompare(b.type)
  );
  return rows;
}

const KIND_CLASSES = { new: "row-new", mod: "", del: "row-del" } as const;

// Added entries render green, modifications uncolored, deletions red.
export function renderDiffTable(diff: DiffWire): string {
  const rows = diffRows(diff);
  if (rows.length === 0) {
    return '<p class="empty-diff">no object changes</p>';
  }
  const body = rows
    .map((row) => {
      const dims = Object.entries(row.dims)
        .map(([dim, value]) => `${escapeHtml(dim)}=${escapeHtml(JSON.stringify(value))}`)
        .join(", ");
      const cls = KIND_CLASSES[row.kind];
      return (
        `<tr${cls ? ` class="${cls}"` : ""}>` +
        `<td>${escapeHtml(row.type)}</td>` +
        `<td>${escapeHtml(row.pkey)}</td>` +
        `<td>${row.kind}</td>` +
        `<td>${dims}</td></tr>`
      );
    })
    .join("");
  return (
    '<table class="diff-table">' +
    "<thead><tr><th>type</th><th>key</th><th></th><th>dimensions</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

export interface StateTooltip {
  html: string;
  raw: string; // the exact response body; displayed states must byte-match it
}

// One collapsible table per type, rows ordered by primary key.
export function buildStateTooltip(rawResponse: string): StateTooltip {
  const state = JSON.parse(rawResponse) as StateWire;
  const sections = Object.keys(state)
    .sort()
    .map((typeName) => {
      const bucket = state[typeName];
      const keys = Object.keys(bucket).sort();
      const dimNames = keys.length > 0 ? Object.keys(bucket[keys[0]]) : [];
      const head = dimNames.map((d) => `<th>${escapeHtml(d)}</th>`).join("");
      const rows = keys
        .map((key) => {
          const cells = dimNames
            .map((d) => `<td>${escapeHtml(JSON.stringify(bucket[key][d]))}</td>`)
            .join("");
          return `<tr>${cells}</tr>`;
        })
        .join("");
      return (
        `<details open class="state-type" data-type="${escapeHtml(typeName)}">` +
        `<summary>${escapeHtml(typeName)} (${keys.length})</summary>` +
        `<table class="state-table"><thead><tr>${head}</tr></thead>` +
        `<tbody>${rows}</tbody></table></details>`
      );
    });
  const html = sections.length > 0 ? sections.join("") : '<p class="empty-state">no objects</p>';
  return { html, raw: rawResponse };
}
