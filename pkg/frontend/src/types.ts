/** Wire types mirroring the HTTP API responses. */

export interface SchemaLabel {
  id: number;
  name: string;
}

export interface VariableDecl {
  name: string;
  kind: 'numeric' | 'categorical';
  unit: string | null;
}

export interface SchemaResponse {
  dataset_digest: string;
  labels: SchemaLabel[];
  variables: VariableDecl[];
}

export interface Subject {
  id: string;
  demographics: Record<string, number | string>;
  predicted_label: 0 | 1;
  probability: number;
  frames: number;
  height: number;
  width: number;
}

export interface SubjectsResponse {
  dataset_digest: string;
  subjects: Subject[];
}

export interface NumericClause {
  variable: string;
  lo: number;
  hi: number;
}

export interface CategoricalClause {
  variable: string;
  values: string[];
}

export type FilterClause = NumericClause | CategoricalClause;

export interface FilterLayer {
  clause: FilterClause | null;
  count: number;
}

export interface FiltersResponse {
  dataset_digest: string;
  layers: FilterLayer[];
  subset: string[];
}

export interface HistogramBin {
  lo: number;
  hi: number;
  count: number;
}

export interface HistogramResponse {
  dataset_digest: string;
  kind: 'numeric' | 'categorical';
  bins?: HistogramBin[];
  counts?: { value: string; count: number }[];
  missing?: number;
}

export type RunPhase = 'pending' | 'running' | 'complete' | 'failed';

export interface RunStatus {
  dataset_digest: string;
  run_id: string;
  status: RunPhase;
  result_count?: number;
  skipped_count?: number;
  error?: string;
}

export interface SummaryRow {
  segments: string;
  selection: number[];
  counterfactuals: number;
  unchanged: number;
  skipped: number;
  proportion: number | null;
}

export interface SummaryResponse {
  dataset_digest: string;
  rows: SummaryRow[];
}

export interface ResultItem {
  index: number;
  target: string;
  source: string;
  selection: number[];
  probability: number;
  label: number;
  target_label: number;
  is_counterfactual: boolean;
  skipped: boolean;
}

export interface ResultsPage {
  dataset_digest: string;
  total: number;
  offset: number;
  limit: number;
  results: ResultItem[];
}
