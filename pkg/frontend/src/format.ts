// Pure view-model builders. Every value here is taken from an API
// response; nothing is aggregated or recomputed locally, only formatted
// for display. The fixture tests assert the raw fields pass through
// byte-for-byte.

import type {
  IdleIntervalView,
  LatencyBlock,
  MetricsSummary,
  NodeView,
  PipelineRunView,
  Sample,
  WorkspaceView,
} from "./types.js";

export function fmtSeconds(s: number): string {
  if (s >= 3600) return `${(s / 3600).toFixed(1)} h`;
  if (s >= 60) {
    const m = Math.floor(s / 60);
    return `${m}m ${(s - m * 60).toFixed(0)}s`;
  }
  return `${s.toFixed(1)} s`;
}

export interface WorkspaceRow {
  id: string;
  owner: string;
  template: string;
  state: WorkspaceView["state"];
  node: string;
  condition: string;
  note: string;
}

export function workspaceRow(ws: WorkspaceView): WorkspaceRow {
  return {
    id: ws.workspace_id,
    owner: ws.owner,
    template: `${ws.template_name} v${ws.template_version}`,
    state: ws.state,
    node: ws.node_id ?? "—",
    condition: ws.start_condition ?? "—",
    note: ws.state === "Pending" && ws.unschedulable_reason ? ws.unschedulable_reason : "",
  };
}

export interface NodeRow {
  id: string;
  gpu: string;
  driver: string;
  maxCuda: string;
  gpuFree: string;
  cached: string;
  lastUtil: string; // latest sampled percentage, verbatim from the API
  idleBadge: string;
}

export function nodeRow(
  node: NodeView,
  samples: Sample[],
  idle: IdleIntervalView[],
): NodeRow {
  const latest = samples.length ? samples[samples.length - 1].gpu_util_percent : null;
  return {
    id: node.node_id,
    gpu: `${node.gpu_count}x ${node.gpu_model}`,
    driver: node.driver_version,
    maxCuda: node.max_cuda,
    gpuFree: `${node.gpu_free}/${node.gpu_count}`,
    cached: node.image_cache.join(", ") || "—",
    lastUtil: latest === null ? "no data" : `${latest}%`,
    idleBadge: idle.length ? `idle ×${idle.length}` : "",
  };
}

// SVG polyline for the last N samples: pure presentation of the sampled
// values (x spaced evenly, y linearly mapped from 0..100).
export function sparklinePoints(samples: Sample[], width = 120, height = 28): string {
  if (!samples.length) return "";
  const step = samples.length > 1 ? width / (samples.length - 1) : 0;
  return samples
    .map((s, i) => `${(i * step).toFixed(1)},${(height - (s.gpu_util_percent / 100) * height).toFixed(1)}`)
    .join(" ");
}

export interface MetricLine {
  label: string;
  value: string;
  target: string;
  flag: "met" | "not met" | "below baseline" | "above baseline" | "n/a";
  raw: number | null; // the API's own number, untouched
}

function latencyLine(label: string, block: LatencyBlock | null, target: string): MetricLine {
  if (!block) return { label, value: "no data", target, flag: "n/a", raw: null };
  return {
    label,
    value: fmtSeconds(block.mean_s),
    target,
    flag: block.met === undefined ? "n/a" : block.met ? "met" : "not met",
    raw: block.mean_s,
  };
}

export function metricsPanel(summary: MetricsSummary): MetricLine[] {
  const lat = summary.deployment_latency;
  const rep = summary.reproducibility;
  const onb = summary.onboarding;
  const util = summary.utilisation;
  const lines: MetricLine[] = [
    latencyLine("latency (warm)", lat.warm, `≤ ${lat.warm?.target_s ?? 20} s`),
    latencyLine("latency (cold)", lat.cold, "—"),
    latencyLine("latency (pipeline)", lat.pipeline, `< ${lat.pipeline?.target_s ?? 300} s`),
    {
      label: "reproducibility",
      value: rep.rate === null ? "no data" : rep.rate.toFixed(4),
      target: `≥ ${rep.target}`,
      flag: rep.met === null ? "n/a" : rep.met ? "met" : "not met",
      raw: rep.rate,
    },
    {
      label: "onboarding",
      value: onb.median_s === null ? `${onb.pending} pending` : fmtSeconds(onb.median_s),
      target: `baseline ${onb.baseline}`,
      flag: "n/a", // target not yet established
      raw: onb.median_s,
    },
    {
      label: "gpu utilisation",
      value: util.value === null ? "no data" : `${(util.value * 100).toFixed(1)}%`,
      target: `baseline < ${util.baseline * 100}%`,
      flag:
        util.below_baseline === null ? "n/a" : util.below_baseline ? "below baseline" : "above baseline",
      raw: util.value,
    },
  ];
  return lines;
}

export interface PipelineRow {
  runId: string;
  project: string;
  stages: string;
  total: string;
  status: string;
}

export function pipelineRow(run: PipelineRunView): PipelineRow {
  return {
    runId: run.run_id,
    project: run.project_name,
    stages: run.stage_durations.map(([stage, d]) => `${stage} ${d.toFixed(0)}s`).join(" → "),
    total: fmtSeconds(run.total),
    status: run.status,
  };
}
