// Thin fetch client for the control-plane API. Base URL and token are
// configurable; failures reject with the API's own error record so the
// UI can surface codes verbatim.

import type {
  ApiError,
  IdleIntervalView,
  MetricsSummary,
  NodeView,
  PipelineRunView,
  Sample,
  TemplateView,
  WorkspaceView,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly detail: ApiError;
  readonly status: number;

  constructor(status: number, detail: ApiError) {
    super(`${detail.code}: ${detail.message}`);
    this.status = status;
    this.detail = detail;
  }
}

export class Client {
  baseUrl: string;
  token: string | null;

  constructor(baseUrl: string, token: string | null = null) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown, actor?: string): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (actor) headers["X-Actor"] = actor;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const detail: ApiError =
        payload && typeof payload === "object" && "code" in payload
          ? (payload as ApiError)
          : { code: `http_${response.status}`, message: JSON.stringify(payload), field: null };
      throw new ApiRequestError(response.status, detail);
    }
    return payload as T;
  }

  listWorkspaces() {
    return this.request<{ sequence: number; items: WorkspaceView[] }>("GET", "/workspaces");
  }

  getWorkspace(id: string) {
    return this.request<{ workspace: WorkspaceView }>("GET", `/workspaces/${id}`);
  }

  createWorkspace(owner: string, templateName: string) {
    return this.request<{ workspace: WorkspaceView }>("POST", "/workspaces", {
      owner,
      template_name: templateName,
    });
  }

  workspaceAction(id: string, action: "start" | "stop" | "rebuild" | "delete", actor?: string) {
    const method = action === "delete" ? "DELETE" : "POST";
    const path = action === "delete" ? `/workspaces/${id}` : `/workspaces/${id}/${action}`;
    return this.request<{ workspace: WorkspaceView }>(method, path, undefined, actor);
  }

  listNodes() {
    return this.request<{ items: NodeView[] }>("GET", "/nodes");
  }

  listTemplates() {
    return this.request<{ items: TemplateView[] }>("GET", "/templates");
  }

  nodeSamples(nodeId: string, last = 120) {
    return this.request<{ items: Sample[] }>("GET", `/metrics/samples/${nodeId}?last=${last}`);
  }

  idleIntervals(nodeId: string) {
    return this.request<{ items: IdleIntervalView[] }>("GET", `/metrics/idle/${nodeId}`);
  }

  metricsSummary() {
    return this.request<{ summary: MetricsSummary }>("GET", "/metrics/summary");
  }

  listPipelines() {
    return this.request<{ items: PipelineRunView[] }>("GET", "/pipelines");
  }

  advanceClock(seconds: number) {
    return this.request<{ now: number }>("POST", "/clock/advance", { seconds });
  }

  clock() {
    return this.request<{ now: number; mode: string }>("GET", "/clock");
  }
}
