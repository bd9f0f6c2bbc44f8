// Client for the controller HTTP API. State responses keep their raw body
// so displayed version states stay byte-identical to what the server sent.

import type {
  BreakpointWire,
  HistoryWire,
  StepsWire,
  Topology,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function check(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      detail = (await resp.json()).detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return resp;
}

export class GotchaApi {
  constructor(private base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await check(await fetch(this.base + path));
    return (await resp.json()) as T;
  }

  private async post(path: string, body: unknown): Promise<void> {
    await check(
      await fetch(this.base + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      })
    );
  }

  topology(): Promise<Topology> {
    return this.getJson("/topology");
  }

  history(node: string): Promise<HistoryWire> {
    return this.getJson(`/nodes/${encodeURIComponent(node)}/history`);
  }

  steps(node: string): Promise<StepsWire> {
    return this.getJson(`/nodes/${encodeURIComponent(node)}/steps`);
  }

  breakpoints(): Promise<BreakpointWire[]> {
    return this.getJson("/breakpoints");
  }

  /** Raw body text: tooltips must display these bytes, not a re-encoding. */
  async stateRaw(node: string, version?: string): Promise<string> {
    const suffix = version ? `?version=${encodeURIComponent(version)}` : "";
    const resp = await check(
      await fetch(`${this.base}/nodes/${encodeURIComponent(node)}/state${suffix}`)
    );
    return await resp.text();
  }

  stepNode(node: string): Promise<void> {
    return this.post("/control", { action: "step_node", node });
  }

  stepAll(): Promise<void> {
    return this.post("/control", { action: "step_all" });
  }

  play(): Promise<void> {
    return this.post("/control", { action: "play" });
  }

  pause(): Promise<void> {
    return this.post("/control", { action: "pause" });
  }

  addBreakpoint(predicate: string): Promise<void> {
    return this.post("/breakpoints", { predicate });
  }

  async removeBreakpoint(id: number): Promise<void> {
    await check(await fetch(`${this.base}/breakpoints/${id}`, { method: "DELETE" }));
  }

  reorder(node: string, stepId: string, direction: "promote" | "demote"): Promise<void> {
    return this.post(`/nodes/${encodeURIComponent(node)}/reorder`, {
      step_id: stepId,
      direction,
    });
  }

  rollback(node: string, version: string): Promise<void> {
    return this.post(`/nodes/${encodeURIComponent(node)}/rollback`, { version });
  }

  events(onEvent: (event: unknown) => void): WebSocket {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${proto}://${location.host}/events`);
    ws.onmessage = (msg) => onEvent(JSON.parse(msg.data));
    return ws;
  }
}
