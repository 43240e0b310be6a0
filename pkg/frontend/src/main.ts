// Single-page what-if console over the run service: pick a run, inspect the
// ensembled differential and each synthesized model, apply a point edit and
// compare before/after. Every screen is hash-addressable.

import { ApiError, Client, InterventionResult, RunStatus } from './api.js';
import { emptyState, renderCompare, renderDifferential } from './bars.js';
import { buildEditForm } from './editForm.js';
import { formatHash, parseHash, Route } from './state.js';

const POLL_INTERVAL_MS = 1000;

export class App {
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  lastIntervention: InterventionResult | null = null;

  constructor(
    private rootEl: HTMLElement,
    private client: Client,
  ) {}

  async render(route: Route): Promise<void> {
    if (this.pollTimer) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
    this.rootEl.textContent = '';
    try {
      if (!route.runId) {
        await this.renderRunList();
      } else {
        await this.renderRun(route);
      }
    } catch (error) {
      this.rootEl.appendChild(
        emptyState(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error)),
      );
    }
  }

  private async renderRunList(): Promise<void> {
    const { runs } = await this.client.listRuns();
    const heading = document.createElement('h2');
    heading.textContent = 'runs';
    this.rootEl.appendChild(heading);
    const list = document.createElement('ul');
    list.className = 'run-list';
    for (const run of runs) {
      const item = document.createElement('li');
      const link = document.createElement('a');
      link.href = formatHash({ runId: run.run_id, query: 2, model: null });
      const valid = run.candidates.filter((c) => c.valid).length;
      link.textContent = `${run.vignette_id}: ${valid}/${run.k} models valid (${run.run_id})`;
      item.appendChild(link);
      if (run.no_valid_models) {
        const badge = document.createElement('span');
        badge.className = 'badge warn';
        badge.textContent = 'no valid models';
        item.appendChild(badge);
      }
      list.appendChild(item);
    }
    this.rootEl.appendChild(list);
  }

  private async renderRun(route: Route): Promise<void> {
    const runId = route.runId!;
    const status = await this.client.runStatus(runId);
    const heading = document.createElement('h2');
    heading.textContent = `run ${runId}`;
    this.rootEl.appendChild(heading);

    if (!status.complete) {
      this.renderProgress(status);
      this.pollTimer = setTimeout(() => void this.render(route), POLL_INTERVAL_MS);
      return;
    }

    if (status.manifest?.no_valid_models) {
      this.rootEl.appendChild(emptyState('NO_VALID_MODELS: synthesis produced no usable model'));
      return;
    }

    await this.renderDifferentialPanel(runId, route.query);
    await this.renderModelsPanel(route);
    if (route.model !== null) {
      await this.renderModelPanel(route);
    }
  }

  private renderProgress(status: RunStatus): void {
    const panel = document.createElement('section');
    panel.className = 'progress';
    const heading = document.createElement('h3');
    heading.textContent = 'synthesizing…';
    panel.appendChild(heading);
    const table = document.createElement('ul');
    for (const candidate of status.progress?.candidates ?? []) {
      const row = document.createElement('li');
      row.textContent = `candidate ${candidate.index}: ${candidate.stage}${
        candidate.status ? ` (${candidate.status})` : ''
      }`;
      table.appendChild(row);
    }
    panel.appendChild(table);
    this.rootEl.appendChild(panel);
  }

  private async renderDifferentialPanel(runId: string, query: number): Promise<void> {
    try {
      const dist = await this.client.differential(runId, query, 10);
      this.rootEl.appendChild(renderDifferential(dist));
    } catch (error) {
      if (error instanceof ApiError && error.code === 'NO_VALID_MODELS') {
        this.rootEl.appendChild(emptyState('NO_VALID_MODELS: nothing to ensemble'));
        return;
      }
      throw error;
    }
  }

  private async renderModelsPanel(route: Route): Promise<void> {
    const runId = route.runId!;
    const { models } = await this.client.models(runId);
    const panel = document.createElement('section');
    panel.className = 'models';
    const heading = document.createElement('h3');
    heading.textContent = 'synthesized models';
    panel.appendChild(heading);
    const list = document.createElement('ul');
    list.className = 'model-list';
    for (const model of models) {
      const item = document.createElement('li');
      if (model.valid) {
        const link = document.createElement('a');
        link.href = formatHash({ ...route, model: model.index });
        link.textContent = `model ${model.index}: ${model.status}, score ${model.semantic_score.toFixed(2)}`;
        item.appendChild(link);
      } else {
        item.textContent = `model ${model.index}: ${model.status}`;
        item.className = 'invalid';
      }
      list.appendChild(item);
    }
    panel.appendChild(list);
    this.rootEl.appendChild(panel);
  }

  private async renderModelPanel(route: Route): Promise<void> {
    const runId = route.runId!;
    const detail = await this.client.model(runId, route.model!);
    const panel = document.createElement('section');
    panel.className = 'model-detail';
    const heading = document.createElement('h3');
    heading.textContent = `model ${detail.index}`;
    panel.appendChild(heading);

    const source = document.createElement('pre');
    source.className = 'source';
    source.textContent = detail.source;
    panel.appendChild(source);

    const lineage = document.createElement('ul');
    lineage.className = 'lineage';
    const { interventions } = await this.client.interventions(runId);
    for (const meta of interventions) {
      const item = document.createElement('li');
      item.textContent = `${meta.version} ← ${meta.parent}: ${meta.edit.kind} ${JSON.stringify(
        meta.edit.payload ?? meta.edit.target,
      )}`;
      lineage.appendChild(item);
    }
    if (interventions.length) {
      const lineageHeading = document.createElement('h4');
      lineageHeading.textContent = 'intervention lineage';
      panel.append(lineageHeading, lineage);
    }

    const compareHost = document.createElement('div');
    compareHost.className = 'compare-host';

    const form = buildEditForm(detail, (edit) => {
      form.setBusy(true);
      this.client
        .submitEdit(runId, detail.index, edit)
        .then((result) => {
          this.lastIntervention = result;
          compareHost.textContent = '';
          if (result.budget_exhausted) {
            const banner = document.createElement('p');
            banner.className = 'banner budget-exhausted';
            banner.textContent = 'no accepted samples within budget';
            compareHost.appendChild(banner);
          }
          const query = `query${parseHash(window.location.hash).query}` as keyof typeof result.before;
          const before = result.before[query as string];
          const after = result.after[query as string];
          if (before && after) {
            compareHost.appendChild(renderCompare(before, after));
          }
        })
        .catch((error) => {
          form.setServerError(
            error instanceof ApiError ? `${error.code}: ${error.message}` : String(error),
          );
        })
        .finally(() => form.setBusy(false));
    });

    panel.appendChild(form.element);
    panel.appendChild(compareHost);
    this.rootEl.appendChild(panel);
  }
}

export function start(rootEl: HTMLElement, client = new Client('')): App {
  const app = new App(rootEl, client);
  const rerender = (): void => {
    void app.render(parseHash(window.location.hash));
  };
  window.addEventListener('hashchange', rerender);
  rerender();
  return app;
}

declare global {
  interface Window {
    medmsaStart?: typeof start;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  start(document.getElementById('app')!);
}
