// Horizontal bar charts as plain DOM. The only arithmetic here is
// percentage formatting; every probability comes from the service.

import { Differential, DifferentialEntry } from './api.js';

export function formatPercent(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}

function barRow(entry: DifferentialEntry, nModels: number, delta?: number): HTMLElement {
  const row = document.createElement('div');
  row.className = 'bar-row' + (entry.is_catch_all ? ' catch-all' : '');
  row.dataset.category = entry.category;
  row.title = `sampled by ${entry.support} of ${nModels} models`;

  const label = document.createElement('span');
  label.className = 'bar-label';
  label.textContent = entry.category + (entry.is_catch_all ? ' ⚑' : '');
  const track = document.createElement('span');
  track.className = 'bar-track';
  const fill = document.createElement('span');
  fill.className = 'bar-fill';
  fill.style.width = `${Math.max(entry.probability * 100, 0.5)}%`;
  track.appendChild(fill);
  const value = document.createElement('span');
  value.className = 'bar-value';
  value.textContent = formatPercent(entry.probability);
  row.append(label, track, value);
  if (delta !== undefined) {
    const deltaEl = document.createElement('span');
    const sign = delta > 0 ? '+' : '';
    deltaEl.className = 'bar-delta ' + (delta < 0 ? 'down' : delta > 0 ? 'up' : 'flat');
    deltaEl.textContent = `${sign}${(delta * 100).toFixed(1)}`;
    row.appendChild(deltaEl);
  }
  return row;
}

export function renderDifferential(dist: Differential, title?: string): HTMLElement {
  const panel = document.createElement('section');
  panel.className = 'differential';
  const heading = document.createElement('h3');
  heading.textContent = title ?? (dist.question || dist.query);
  panel.appendChild(heading);
  const meta = document.createElement('p');
  meta.className = 'meta';
  meta.textContent = `${dist.n_models} models, ${dist.total_samples} samples`;
  panel.appendChild(meta);
  if (dist.entries.length === 0) {
    const empty = document.createElement('p');
    empty.className = 'banner empty';
    empty.textContent = 'no accepted samples';
    panel.appendChild(empty);
    return panel;
  }
  for (const entry of dist.entries) {
    panel.appendChild(barRow(entry, dist.n_models));
  }
  if (dist.coverage < 0.9999999) {
    const coverage = document.createElement('p');
    coverage.className = 'coverage';
    coverage.textContent = `showing ${formatPercent(dist.coverage)} of the probability mass`;
    panel.appendChild(coverage);
  }
  return panel;
}

export function renderCompare(before: Differential, after: Differential): HTMLElement {
  const wrap = document.createElement('div');
  wrap.className = 'compare';
  const beforePanel = renderDifferential(before, 'before');
  beforePanel.classList.add('before');
  wrap.appendChild(beforePanel);

  const afterPanel = document.createElement('section');
  afterPanel.className = 'differential after';
  const heading = document.createElement('h3');
  heading.textContent = 'after';
  afterPanel.appendChild(heading);
  if (after.entries.length === 0) {
    const banner = document.createElement('p');
    banner.className = 'banner budget-exhausted';
    banner.textContent = 'no accepted samples';
    afterPanel.appendChild(banner);
  }
  const beforeByCategory = new Map(before.entries.map((e) => [e.category, e.probability]));
  for (const entry of after.entries) {
    const delta = entry.probability - (beforeByCategory.get(entry.category) ?? 0);
    afterPanel.appendChild(barRow(entry, after.n_models, delta));
  }
  wrap.appendChild(afterPanel);
  return wrap;
}

export function emptyState(message: string): HTMLElement {
  const panel = document.createElement('section');
  panel.className = 'empty-state';
  const text = document.createElement('p');
  text.className = 'banner';
  text.textContent = message;
  panel.appendChild(text);
  return panel;
}
