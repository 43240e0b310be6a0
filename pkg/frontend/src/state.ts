// Deep-linkable view state: every screen is addressable by URL hash so an
// audit trail can be shared as a link.

export interface Route {
  runId: string | null;
  query: number;
  model: number | null;
}

export function parseHash(hash: string): Route {
  const parts = hash.replace(/^#\/?/, '').split('/').filter(Boolean);
  const route: Route = { runId: null, query: 1, model: null };
  for (let i = 0; i + 1 < parts.length; i += 2) {
    const key = parts[i];
    const value = decodeURIComponent(parts[i + 1]);
    if (key === 'runs') route.runId = value;
    if (key === 'query') route.query = Number(value) || 1;
    if (key === 'model') route.model = Number(value) || null;
  }
  return route;
}

export function formatHash(route: Route): string {
  if (!route.runId) return '#/';
  let hash = `#/runs/${encodeURIComponent(route.runId)}/query/${route.query}`;
  if (route.model !== null) hash += `/model/${route.model}`;
  return hash;
}
