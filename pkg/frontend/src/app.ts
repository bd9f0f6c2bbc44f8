// Browser bootstrap: one WebSocket subscription, re-fetch on every event,
// all mutations through the documented endpoints. Control buttons are
// disabled while a request is in flight so mutations never overlap.

import { GotchaApi, ApiError } from "./api.js";
import { buildStateTooltip } from "./format.js";
import { renderEdgeTooltip, renderNodeView, renderTopology } from "./render.js";
import type { HistoryWire } from "./types.js";

const api = new GotchaApi("");
const root = document.getElementById("app")!;

let currentNode: string | null = null; // null renders the topology
let currentHistory: HistoryWire | null = null;
let inflight = false;
let parseError: string | null = null;
let refreshQueued = false;

async function refresh(): Promise<void> {
  if (refreshQueued) return;
  refreshQueued = true;
  try {
    const [topo, breakpoints] = await Promise.all([api.topology(), api.breakpoints()]);
    if (currentNode !== null && !topo.nodes.some((n) => n.name === currentNode)) {
      currentNode = null;
    }
    if (currentNode === null) {
      currentHistory = null;
      root.innerHTML = renderTopology(topo, breakpoints);
    } else {
      const [history, steps] = await Promise.all([
        api.history(currentNode),
        api.steps(currentNode),
      ]);
      currentHistory = history;
      root.innerHTML = renderNodeView(currentNode, topo, history, steps, breakpoints);
      if (parseError) {
        const panel = root.querySelector(".breakpoints");
        if (panel) {
          const p = document.createElement("p");
          p.className = "parse-error";
          p.textContent = parseError;
          panel.insertBefore(p, panel.querySelector("ul"));
        }
      }
    }
  } finally {
    refreshQueued = false;
  }
}

async function mutate(action: () => Promise<void>): Promise<void> {
  if (inflight) return;
  inflight = true;
  root.querySelectorAll("button").forEach((b) => (b.disabled = true));
  try {
    await action();
    parseError = null;
  } catch (err) {
    if (err instanceof ApiError) {
      parseError = err.message;
    } else {
      throw err;
    }
  } finally {
    inflight = false;
    await refresh();
  }
}

function tooltipDiv(): HTMLElement | null {
  return root.querySelector(".tooltip");
}

function showTooltip(html: string, raw: string | null, x: number, y: number): void {
  const div = tooltipDiv();
  if (!div) return;
  div.innerHTML = html;
  if (raw !== null) div.setAttribute("data-raw", raw);
  else div.removeAttribute("data-raw");
  div.style.left = `${x + 12}px`;
  div.style.top = `${y + 12}px`;
  div.hidden = false;
}

function hideTooltip(): void {
  const div = tooltipDiv();
  if (div) div.hidden = true;
}

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("[data-action],[data-node]");
  if (!target) return;
  const action = target.getAttribute("data-action");
  if (!action) {
    const node = target.getAttribute("data-node");
    if (node && !currentNode) {
      currentNode = node;
      void refresh();
    }
    return;
  }
  switch (action) {
    case "back":
      currentNode = null;
      void refresh();
      break;
    case "step-node":
      void mutate(() => api.stepNode(target.getAttribute("data-node")!));
      break;
    case "step-all":
      void mutate(() => api.stepAll());
      break;
    case "play":
      void mutate(() => api.play());
      break;
    case "pause":
      void mutate(() => api.pause());
      break;
    case "promote":
    case "demote":
      void mutate(() =>
        api.reorder(currentNode!, target.getAttribute("data-step")!, action)
      );
      break;
    case "remove-breakpoint":
      void mutate(() => api.removeBreakpoint(Number(target.getAttribute("data-id"))));
      break;
    case "rollback":
      void mutate(() => api.rollback(currentNode!, target.getAttribute("data-version")!));
      break;
  }
});

root.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  if (form.getAttribute("data-form") !== "breakpoint") return;
  event.preventDefault();
  const input = form.elements.namedItem("predicate") as HTMLInputElement;
  const text = input.value.trim();
  if (text) void mutate(() => api.addBreakpoint(text));
});

root.addEventListener("mouseover", (event) => {
  const target = event.target as Element;
  const versionGroup = target.closest("g.version");
  if (versionGroup && currentNode && currentHistory) {
    const version = versionGroup.getAttribute("data-version")!;
    void api.stateRaw(currentNode, version).then((raw) => {
      const tooltip = buildStateTooltip(raw);
      const header =
        `<h4>state at ${version === "ROOT" ? "ROOT" : version.slice(0, 4)}</h4>` +
        `<button data-action="rollback" data-version="${version}">roll back here</button>`;
      showTooltip(header + tooltip.html, tooltip.raw,
        (event as MouseEvent).pageX, (event as MouseEvent).pageY);
    });
    return;
  }
  const edgeGroup = target.closest("g.edge");
  if (edgeGroup && currentHistory) {
    const [src, dst] = edgeGroup.getAttribute("data-edge")!.split("->");
    showTooltip(
      renderEdgeTooltip(currentHistory, src, dst),
      null,
      (event as MouseEvent).pageX,
      (event as MouseEvent).pageY
    );
  }
});

root.addEventListener("mouseout", (event) => {
  const target = event.target as Element;
  if (target.closest("g.version") || target.closest("g.edge")) hideTooltip();
});

api.events(() => void refresh());
void refresh();
