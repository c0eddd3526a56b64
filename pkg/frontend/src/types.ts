// API response shapes. Field names mirror the service JSON exactly; the
// dashboard never derives values the API doesn't send.

export type WorkspaceState =
  | "Pending"
  | "Pulling"
  | "Initializing"
  | "Running"
  | "Stopped"
  | "Failed"
  | "Deleted";

export type StartCondition = "Cold" | "Warm" | null;

export interface WorkspaceView {
  workspace_id: string;
  owner: string;
  template_name: string;
  template_version: number;
  state: WorkspaceState;
  node_id: string | null;
  start_condition: StartCondition;
  transition_log: [string, number][];
  created_at: number;
  unschedulable_reason: string | null;
  decision: {
    assigned: boolean;
    node_id: string | null;
    reason: string | null;
    cache_hit: boolean;
  } | null;
}

export interface NodeView {
  node_id: string;
  gpu_count: number;
  gpu_model: string;
  driver_version: string;
  max_cuda: string;
  gpu_free: number;
  cpu_free: number;
  cpu_capacity: number;
  image_cache: string[];
}

export interface TemplateView {
  name: string;
  image_tag: string;
  version: number;
  resources: { cpu_millicores: number; mem_bytes: number; gpu_count: number };
}

export interface Sample {
  timestamp: number;
  gpu_util_percent: number;
}

export interface IdleIntervalView {
  node_id: string;
  start: number;
  end: number;
}

export interface LatencyBlock {
  count: number;
  mean_s: number;
  max_s: number;
  target_s?: number;
  met?: boolean;
}

export interface MetricsSummary {
  window: { start: number; end: number };
  deployment_latency: {
    baseline: string;
    warm: LatencyBlock | null;
    cold: LatencyBlock | null;
    pipeline: LatencyBlock | null;
    available: boolean;
  };
  reproducibility: {
    rate: number | null;
    target: number;
    met: boolean | null;
    available: boolean;
  };
  onboarding: {
    baseline: string;
    completed: number;
    pending: number;
    assisted: number;
    median_s: number | null;
    available: boolean;
  };
  utilisation: {
    value: number | null;
    baseline: number;
    below_baseline: boolean | null;
    available: boolean;
  };
}

export interface PipelineRunView {
  run_id: string;
  project_name: string;
  started_at: number;
  stage_durations: [string, number][];
  total: number;
  status: string;
}

export interface ApiError {
  code: string;
  message: string;
  field: string | null;
}
