// Dashboard wiring: poll the API, render tables, issue lifecycle actions.
// All numbers on screen come from format.ts view-models, which in turn
// pass API fields through untouched.

import { ApiRequestError, Client } from "./api.js";
import { enabledActions, type WorkspaceAction } from "./actions.js";
import {
  metricsPanel,
  nodeRow,
  pipelineRow,
  sparklinePoints,
  workspaceRow,
} from "./format.js";
import { Backoff } from "./poller.js";
import type { IdleIntervalView, Sample, WorkspaceView } from "./types.js";

const params = new URLSearchParams(window.location.search);
const apiBase =
  params.get("api") ?? localStorage.getItem("wsplane.api") ?? "http://127.0.0.1:8077";
const token = params.get("token") ?? localStorage.getItem("wsplane.token");
const client = new Client(apiBase, token);
const backoff = new Backoff();

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

function setBanner(message: string | null): void {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function showError(message: string | null): void {
  const box = $("error");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

async function act(id: string, action: WorkspaceAction): Promise<void> {
  const actor = (($("actor") as HTMLInputElement).value || undefined) as string | undefined;
  try {
    await client.workspaceAction(id, action, actor);
    showError(null);
    await refresh();
  } catch (err) {
    // lifecycle errors surface verbatim with the API's error code
    showError(err instanceof ApiRequestError ? `${err.detail.code}: ${err.detail.message}` : String(err));
  }
}

function renderWorkspaces(items: WorkspaceView[]): void {
  const tbody = $("workspaces");
  tbody.replaceChildren();
  for (const ws of items) {
    const row = workspaceRow(ws);
    const tr = document.createElement("tr");
    for (const cell of [row.id, row.owner, row.template, row.state, row.node, row.condition]) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    const note = document.createElement("td");
    note.textContent = row.note;
    note.className = "note";
    tr.appendChild(note);

    const actions = document.createElement("td");
    const legal = enabledActions(ws.state);
    for (const action of ["start", "stop", "rebuild", "delete"] as const) {
      const button = document.createElement("button");
      button.textContent = action;
      button.disabled = !legal.includes(action);
      button.dataset.action = action;
      button.dataset.workspace = ws.workspace_id;
      if (!button.disabled) button.addEventListener("click", () => void act(ws.workspace_id, action));
      actions.appendChild(button);
    }
    tr.appendChild(actions);
    tbody.appendChild(tr);
  }
}

async function renderNodes(): Promise<void> {
  const { items } = await client.listNodes();
  const tbody = $("nodes");
  tbody.replaceChildren();
  for (const node of items) {
    let samples: Sample[] = [];
    let idle: IdleIntervalView[] = [];
    try {
      samples = (await client.nodeSamples(node.node_id)).items;
      if (samples.length) idle = (await client.idleIntervals(node.node_id)).items;
    } catch {
      // node without sample history: explicit "no data" cell below
    }
    const row = nodeRow(node, samples, idle);
    const tr = document.createElement("tr");
    for (const cell of [row.id, row.gpu, row.driver, row.maxCuda, row.gpuFree, row.cached]) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    const spark = document.createElement("td");
    if (samples.length) {
      const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
      svg.setAttribute("width", "120");
      svg.setAttribute("height", "28");
      const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
      line.setAttribute("points", sparklinePoints(samples));
      line.setAttribute("fill", "none");
      line.setAttribute("stroke", "#2a7");
      svg.appendChild(line);
      spark.appendChild(svg);
    } else {
      spark.textContent = "no data";
    }
    tr.appendChild(spark);
    const util = document.createElement("td");
    util.textContent = row.lastUtil;
    tr.appendChild(util);
    const badge = document.createElement("td");
    badge.textContent = row.idleBadge;
    badge.className = "idle-badge";
    tr.appendChild(badge);
    tbody.appendChild(tr);
  }
}

async function renderMetrics(): Promise<void> {
  const { summary } = await client.metricsSummary();
  const tbody = $("metrics");
  tbody.replaceChildren();
  for (const line of metricsPanel(summary)) {
    const tr = document.createElement("tr");
    for (const cell of [line.label, line.value, line.target, line.flag]) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
}

async function renderPipelines(): Promise<void> {
  const { items } = await client.listPipelines();
  const tbody = $("pipelines");
  tbody.replaceChildren();
  for (const run of items) {
    const row = pipelineRow(run);
    const tr = document.createElement("tr");
    for (const cell of [row.runId, row.stages, row.total, row.status]) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
}

async function renderTemplates(): Promise<void> {
  const { items } = await client.listTemplates();
  const picker = $("template") as HTMLSelectElement;
  const current = picker.value;
  picker.replaceChildren();
  for (const template of items) {
    const option = document.createElement("option");
    option.value = template.name;
    option.textContent = `${template.name} (v${template.version}, ${template.image_tag})`;
    picker.appendChild(option);
  }
  if (current) picker.value = current;
}

async function refresh(): Promise<void> {
  const { items } = await client.listWorkspaces();
  renderWorkspaces(items);
  await Promise.all([renderNodes(), renderMetrics(), renderPipelines(), renderTemplates()]);
  const { now } = await client.clock();
  $("clock-now").textContent = `t = ${now.toFixed(0)} s`;
}

async function pollLoop(): Promise<void> {
  try {
    await refresh();
    setBanner(null);
    backoff.success();
  } catch (err) {
    setBanner(`API unreachable at ${apiBase}; retrying in ${backoff.failure() / 1000} s`);
  }
  window.setTimeout(() => void pollLoop(), backoff.interval);
}

function wireForms(): void {
  $("create-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const owner = ($("owner") as HTMLInputElement).value.trim();
    const template = ($("template") as HTMLSelectElement).value;
    if (!owner || !template) return;
    void client
      .createWorkspace(owner, template)
      .then(() => {
        showError(null);
        return refresh();
      })
      .catch((err) =>
        showError(err instanceof ApiRequestError ? `${err.detail.code}: ${err.detail.message}` : String(err)),
      );
  });
  $("advance-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const seconds = Number(($("advance-seconds") as HTMLInputElement).value);
    if (!(seconds > 0)) return;
    void client
      .advanceClock(seconds)
      .then(() => refresh())
      .catch((err) =>
        showError(err instanceof ApiRequestError ? `${err.detail.code}: ${err.detail.message}` : String(err)),
      );
  });
}

$("api-base").textContent = apiBase;
wireForms();
void pollLoop();
