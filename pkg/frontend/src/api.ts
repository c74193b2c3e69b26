/** Thin typed client over the HTTP API. All analysis numbers displayed by
 * the UI come from these endpoints; the client never aggregates. */

import type {
  FilterClause,
  FiltersResponse,
  HistogramResponse,
  ResultsPage,
  RunStatus,
  SchemaResponse,
  SubjectsResponse,
  SummaryResponse,
} from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    public field: string | null,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let field: string | null = null;
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const doc = await resp.json();
    if (doc && typeof doc.detail === 'object' && doc.detail !== null) {
      field = doc.detail.field ?? null;
      message = doc.detail.message ?? message;
    } else if (doc && typeof doc.detail === 'string') {
      message = doc.detail;
    }
  } catch {
    // keep the status text
  }
  throw new ApiError(resp.status, field, message);
}

export class ApiClient {
  constructor(private base: string = '') {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  schema(): Promise<SchemaResponse> {
    return this.get('/api/schema');
  }

  subjects(): Promise<SubjectsResponse> {
    return this.get('/api/subjects');
  }

  histogram(variable: string, bins = 10): Promise<HistogramResponse> {
    return this.get(`/api/histogram/${encodeURIComponent(variable)}?bins=${bins}`);
  }

  applyFilters(clauses: FilterClause[]): Promise<FiltersResponse> {
    return this.post('/api/filters', { clauses });
  }

  launchRun(targets: string[], sources: string[], selections: number[][]): Promise<RunStatus> {
    return this.post('/api/runs', { targets, sources, selections });
  }

  runStatus(runId: string): Promise<RunStatus> {
    return this.get(`/api/runs/${encodeURIComponent(runId)}`);
  }

  runSummary(runId: string): Promise<SummaryResponse> {
    return this.get(`/api/runs/${encodeURIComponent(runId)}/summary`);
  }

  runResults(runId: string, offset = 0, limit = 50): Promise<ResultsPage> {
    return this.get(`/api/runs/${encodeURIComponent(runId)}/results?offset=${offset}&limit=${limit}`);
  }

  /** URL of a subject frame; the server renders overlays with the shared palette. */
  frameUrl(subjectId: string, frame: number, overlay: boolean): string {
    return `${this.base}/api/subjects/${encodeURIComponent(subjectId)}/frames/${frame}?overlay=${overlay ? 1 : 0}`;
  }

  recombinedFrameUrl(runId: string, index: number, frame: number, overlay = false): string {
    return `${this.base}/api/runs/${encodeURIComponent(runId)}/recombined/${index}/frames/${frame}?overlay=${overlay ? 1 : 0}`;
  }
}
