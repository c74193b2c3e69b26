/** fetch stub that answers from recorded API fixtures.
 *
 * POST /api/filters responds per clause signature; run status responses
 * are scripted so tests can walk pending -> complete.
 */
import { vi } from 'vitest';

import filtersAge from './fixtures/filters_age.json';
import filtersAgeSex from './fixtures/filters_age_sex.json';
import filtersEmpty from './fixtures/filters_empty.json';
import histogramAge from './fixtures/histogram_age.json';
import runAccepted from './fixtures/run_accepted.json';
import runComplete from './fixtures/run_complete.json';
import runResults from './fixtures/run_results.json';
import runSummary from './fixtures/run_summary.json';
import schema from './fixtures/schema.json';
import subjects from './fixtures/subjects.json';

export const fixtures = {
  schema,
  subjects,
  histogramAge,
  filtersAge,
  filtersAgeSex,
  filtersEmpty,
  runAccepted,
  runComplete,
  runSummary,
  runResults,
};

function json(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

/** No-clause response: a single full layer with every subject surviving. */
const filtersNone = {
  dataset_digest: (schema as { dataset_digest: string }).dataset_digest,
  layers: [{ clause: null, count: subjects.subjects.length }],
  subset: subjects.subjects.map((s: { id: string }) => s.id),
};

export interface MockApiOptions {
  /** run statuses returned by successive GET /api/runs/{id} calls */
  runStatusScript?: unknown[];
}

export function installMockApi(options: MockApiOptions = {}) {
  const statusScript = [...(options.runStatusScript ?? [runComplete])];
  const calls: { method: string; path: string; body?: unknown }[] = [];

  const mock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const path = String(input);
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path, body });

    if (path.endsWith('/api/schema')) return json(schema);
    if (path.endsWith('/api/subjects')) return json(subjects);
    if (path.includes('/api/histogram/age')) return json(histogramAge);

    if (path.endsWith('/api/filters') && method === 'POST') {
      const clauses = (body as { clauses: { variable: string; lo?: number }[] }).clauses;
      if (clauses.length === 0) return json(filtersNone);
      if (clauses.length === 1 && clauses[0].variable === 'age') {
        return json(clauses[0].lo === 200 ? filtersEmpty : filtersAge);
      }
      if (clauses.length === 2) return json(filtersAgeSex);
      return json(filtersNone);
    }

    if (path.endsWith('/api/runs') && method === 'POST') return json(runAccepted);
    if (/\/api\/runs\/[^/]+\/summary$/.test(path)) return json(runSummary);
    if (/\/api\/runs\/[^/]+\/results/.test(path)) return json(runResults);
    if (/\/api\/runs\/[^/]+$/.test(path)) {
      const next = statusScript.length > 1 ? statusScript.shift() : statusScript[0];
      return json(next);
    }
    return json({ detail: `unmocked path ${path}` }, 404);
  });

  vi.stubGlobal('fetch', mock);
  return { mock, calls };
}
