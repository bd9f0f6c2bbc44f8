// View rendering. Every function builds an HTML string from controller
// responses; nothing here derives state of its own beyond layout, so what
// the user sees is exactly what the API returned.

import { computeLayout } from "./layout.js";
import { escapeHtml, renderDiffTable, shortId } from "./format.js";
import type {
  BreakpointWire,
  HistoryWire,
  StepWire,
  StepsWire,
  Topology,
} from "./types.js";

export function renderModeBadge(mode: string, pausedOn: Topology["paused_on"]): string {
  const hit = pausedOn
    ? `<span class="hit-banner" data-node="${escapeHtml(pausedOn.node)}">paused: ` +
      `<code>${escapeHtml(pausedOn.text)}</code> matched at ` +
      `<b>${escapeHtml(pausedOn.node)}</b>` +
      (pausedOn.step_kind ? ` during ${escapeHtml(pausedOn.step_kind)}` : "") +
      `</span>`
    : "";
  return `<span class="mode mode-${mode}">${mode}</span>${hit}`;
}

export function renderBreakpointPanel(
  breakpoints: BreakpointWire[],
  parseError: string | null = null
): string {
  const items = breakpoints
    .map(
      (bp) =>
        `<li data-breakpoint="${bp.id}"><code>${escapeHtml(bp.text)}</code>` +
        `<button data-action="remove-breakpoint" data-id="${bp.id}">×</button></li>`
    )
    .join("");
  const error = parseError
    ? `<p class="parse-error">${escapeHtml(parseError)}</p>`
    : "";
  return (
    '<section class="breakpoints">' +
    "<h3>Breakpoints</h3>" +
    '<form data-form="breakpoint">' +
    '<input name="predicate" placeholder="exists(WordCount, count == 6)" size="34">' +
    '<button type="submit">Add</button></form>' +
    error +
    `<ul>${items}</ul></section>`
  );
}

export function renderTopology(topo: Topology, breakpoints: BreakpointWire[]): string {
  const nodes = topo.nodes
    .map(
      (n) =>
        `<div class="topo-node status-${escapeHtml(n.status)}" data-node="${escapeHtml(n.name)}">` +
        `<h4>${escapeHtml(n.name)}</h4>` +
        `<small>${escapeHtml(n.address ?? "client")}</small></div>`
    )
    .join("");
  const edges = topo.edges
    .map(
      (e) =>
        `<li data-edge="${escapeHtml(e.src)}->${escapeHtml(e.dst)}">` +
        `${escapeHtml(e.src)} <span class="arrow">fetch/push ⟶</span> ${escapeHtml(e.dst)}</li>`
    )
    .join("");
  return (
    '<div class="view topology-view">' +
    `<header><h2>Application topology</h2>${renderModeBadge(topo.mode, topo.paused_on)}</header>` +
    `<div class="topo-nodes">${nodes}</div>` +
    `<ul class="topo-edges">${edges}</ul>` +
    renderBreakpointPanel(breakpoints) +
    "</div>"
  );
}

function refAnnotations(history: HistoryWire): Map<string, string[]> {
  const byVersion = new Map<string, string[]>();
  for (const [name, version] of Object.entries(history.refs)) {
    const list = byVersion.get(version) ?? [];
    list.push(name);
    byVersion.set(version, list);
  }
  for (const list of byVersion.values()) list.sort();
  return byVersion;
}

export function renderHistorySvg(history: HistoryWire): string {
  const layout = computeLayout(history);
  const refs = refAnnotations(history);
  const edges = layout.edges
    .map(
      (e) =>
        `<g class="edge" data-edge="${escapeHtml(e.src)}->${escapeHtml(e.dst)}">` +
        `<line x1="${e.x1}" y1="${e.y1 + 16}" x2="${e.x2}" y2="${e.y2 - 16}"></line>` +
        `<circle class="edge-grip" cx="${(e.x1 + e.x2) / 2}" cy="${(e.y1 + e.y2) / 2}" r="7"></circle>` +
        "</g>"
    )
    .join("");
  const nodes = layout.nodes
    .map((n) => {
      const head = n.id === history.head;
      const annotations = refs.get(n.id) ?? [];
      const ring = annotations.length
        ? `<circle class="ref-ring" cx="${n.x}" cy="${n.y}" r="24"></circle>`
        : "";
      const labels = annotations
        .map(
          (name, i) =>
            `<text class="ref-label" x="${n.x + 30}" y="${n.y + 5 + i * 14}">` +
            `${escapeHtml(name)}</text>`
        )
        .join("");
      return (
        `<g class="version${head ? " head" : ""}" data-version="${escapeHtml(n.id)}">` +
        ring +
        `<circle cx="${n.x}" cy="${n.y}" r="16"></circle>` +
        `<text class="version-label" x="${n.x}" y="${n.y + 4}">${escapeHtml(shortId(n.id))}</text>` +
        labels +
        "</g>"
      );
    })
    .join("");
  return (
    `<svg class="history" viewBox="0 0 ${layout.width} ${layout.height}" ` +
    `width="${layout.width}" height="${layout.height}">` +
    edges +
    nodes +
    "</svg>"
  );
}

export function renderEdgeTooltip(history: HistoryWire, src: string, dst: string): string {
  const edge = history.edges.find((e) => e.src === src && e.dst === dst);
  if (!edge) return "<p>unknown edge</p>";
  return (
    `<h4>${escapeHtml(shortId(src))} → ${escapeHtml(shortId(dst))}</h4>` +
    renderDiffTable(edge.diff)
  );
}

function renderStep(step: StepWire, index: number, pendingCount: number): string {
  const phases = step.phases
    .map((phase, i) => {
      const cls =
        i < step.current_phase ? "phase done" : i === step.current_phase ? "phase next" : "phase";
      return `<li class="${cls}">${escapeHtml(phase)}</li>`;
    })
    .join("");
  const origin = step.origin ? ` <small>from ${escapeHtml(step.origin)}</small>` : "";
  const started = step.current_phase > 0 || step.mid_phase;
  const reorder =
    !step.done && !started
      ? `<span class="reorder">` +
        (index > 0
          ? `<button data-action="promote" data-step="${escapeHtml(step.step_id)}" title="promote">▲</button>`
          : "") +
        (index < pendingCount - 1
          ? `<button data-action="demote" data-step="${escapeHtml(step.step_id)}" title="demote">▼</button>`
          : "") +
        `</span>`
      : "";
  const active = !step.done && index === 0 ? " active" : "";
  return (
    `<li class="step${active}" data-step="${escapeHtml(step.step_id)}" data-kind="${escapeHtml(step.kind)}">` +
    `<b>${escapeHtml(step.kind)}</b>${origin}${reorder}` +
    `<ol class="phases">${phases}</ol></li>`
  );
}

export function renderStepsPanel(steps: StepsWire): string {
  const executed = steps.executed
    .map((s) => `<li class="step done" data-step="${escapeHtml(s.step_id)}">${escapeHtml(s.kind)}</li>`)
    .join("");
  const pending = steps.pending.map((s, i) => renderStep(s, i, steps.pending.length)).join("");
  return (
    '<section class="steps">' +
    `<div class="executed"><h3>Previous steps</h3><ul>${executed}</ul></div>` +
    `<div class="pending"><h3>Next steps</h3><ul>${pending}</ul></div>` +
    "</section>"
  );
}

export function renderControls(node: string, mode: string): string {
  const paused = mode === "paused";
  return (
    '<div class="controls">' +
    `<button data-action="step-node" data-node="${escapeHtml(node)}" ${paused ? "" : "disabled"}>Step Node</button>` +
    `<button data-action="step-all" ${paused ? "" : "disabled"}>Step All Nodes</button>` +
    `<button data-action="play" ${paused ? "" : "disabled"}>Play</button>` +
    `<button data-action="pause" ${paused ? "disabled" : ""}>Pause</button>` +
    "</div>"
  );
}

export function renderNodeView(
  name: string,
  topo: Topology,
  history: HistoryWire,
  steps: StepsWire,
  breakpoints: BreakpointWire[]
): string {
  return (
    '<div class="view node-view" data-node-view="' + escapeHtml(name) + '">' +
    `<header><button data-action="back">◂ topology</button>` +
    `<h2>${escapeHtml(name)}</h2>${renderModeBadge(topo.mode, topo.paused_on)}</header>` +
    '<div class="columns">' +
    `<div class="history-pane">${renderHistorySvg(history)}` +
    '<div class="tooltip" hidden></div></div>' +
    renderStepsPanel(steps) +
    "</div>" +
    renderControls(name, topo.mode) +
    renderBreakpointPanel(breakpoints) +
    "</div>"
  );
}
