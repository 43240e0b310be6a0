// Typed client over the run service. The UI never computes probabilities;
// it renders exactly the numbers these endpoints return.

export interface DifferentialEntry {
  category: string;
  probability: number;
  support: number;
  is_catch_all: boolean;
}

export interface Differential {
  query: string;
  question: string;
  n_models: number;
  total_samples: number;
  coverage: number;
  entries: DifferentialEntry[];
}

export interface ModelSummary {
  index: number;
  status: string;
  semantic_score: number;
  valid: boolean;
  accepted_count: number;
}

export interface EditableCondition {
  index: number;
  text: string;
  span: [number, number];
}

export interface EditableNumber {
  span: [number, number];
  value: number;
}

export interface ModelDetail extends ModelSummary {
  source: string;
  diagnostics: { code: string; message: string }[];
  editable: { conditions: EditableCondition[]; numeric_literals: EditableNumber[] };
}

export interface EditPayload {
  kind: string;
  target?: number | [number, number] | null;
  payload?: string | number | null;
  note?: string;
  seed?: number;
}

export interface InterventionResult {
  base_model_id: string;
  new_version_id: string;
  seed: number;
  budget_exhausted: boolean;
  before: Record<string, Differential>;
  after: Record<string, Differential>;
  before_ensemble: Record<string, Differential>;
  after_ensemble: Record<string, Differential>;
}

export interface RunManifest {
  run_id: string;
  vignette_id: string;
  k: number;
  seed: number;
  no_valid_models: boolean;
  candidates: { index: number; status: string; valid: boolean }[];
}

export interface RunStatus {
  run_id: string;
  complete: boolean;
  manifest: RunManifest | null;
  progress?: {
    state: string;
    error: { code: string; message: string } | null;
    candidates: { index: number; stage: string; status: string | null }[];
  };
}

export interface InterventionMeta {
  version: string;
  parent: string;
  seed: number;
  edit: EditPayload;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: unknown = null,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const body = await response.json();
  if (!response.ok) {
    const error = body?.error ?? {};
    throw new ApiError(response.status, error.code ?? 'INTERNAL', error.message ?? 'request failed', error.details);
  }
  return body as T;
}

export class Client {
  constructor(private base = '') {}

  listRuns(): Promise<{ runs: RunManifest[]; incomplete: number }> {
    return request(`${this.base}/runs`);
  }

  runStatus(runId: string): Promise<RunStatus> {
    return request(`${this.base}/runs/${runId}`);
  }

  models(runId: string): Promise<{ models: ModelSummary[] }> {
    return request(`${this.base}/runs/${runId}/models`);
  }

  model(runId: string, index: number): Promise<ModelDetail> {
    return request(`${this.base}/runs/${runId}/models/${index}`);
  }

  differential(runId: string, query: number, top = 10): Promise<Differential> {
    return request(`${this.base}/runs/${runId}/differential?query=${query}&top=${top}`);
  }

  submitEdit(runId: string, model: number, edit: EditPayload): Promise<InterventionResult> {
    return request(`${this.base}/runs/${runId}/models/${model}/edits`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(edit),
    });
  }

  interventions(runId: string): Promise<{ interventions: InterventionMeta[] }> {
    return request(`${this.base}/runs/${runId}/interventions`);
  }
}
