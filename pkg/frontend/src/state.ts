/** Selector view state and the pure helpers the panels share.
 *
 * The UI is stateless with respect to analysis: everything here is
 * derivable from API responses plus the user's control positions, so
 * replaying the same interactions reproduces identical displays.
 */

import type { FilterClause, FilterLayer } from './types';

/** Rendering bound: at most this many thumbnails are ever displayed. */
export const THUMBNAIL_CAP = 50;

/** Poll interval for run status, ms. */
export const POLL_INTERVAL_MS = 1000;

export interface BrushWindow {
  /** index of the first selected unit */
  start: number;
  /** number of units under the brush */
  size: number;
}

export interface SelectorViewState {
  targetId: string | null;
  /** checked segment label ids */
  segments: Set<number>;
  overlayTarget: boolean;
  overlaySource: boolean;
  clauses: FilterClause[];
  /** last filter response */
  layers: FilterLayer[];
  subset: string[];
  brush: BrushWindow;
  playing: boolean;
  frame: number;
}

export function initialState(): SelectorViewState {
  return {
    targetId: null,
    segments: new Set(),
    overlayTarget: true,
    overlaySource: true,
    clauses: [],
    layers: [],
    subset: [],
    brush: { start: 0, size: THUMBNAIL_CAP },
    playing: false,
    frame: 0,
  };
}

export function toggleSegment(state: SelectorViewState, labelId: number): void {
  if (state.segments.has(labelId)) {
    state.segments.delete(labelId);
  } else {
    state.segments.add(labelId);
  }
}

/** A run can launch once a target and a nonempty segment set are chosen. */
export function canLaunch(state: SelectorViewState): boolean {
  return state.targetId !== null && state.segments.size > 0 && state.subset.length > 0;
}

export interface ThumbnailWindow {
  ids: string[];
  /** units under the brush that exceed the display cap */
  overflow: number;
}

/** Thumbnails under the brush, capped at THUMBNAIL_CAP with an overflow count. */
export function visibleThumbnails(subset: string[], brush: BrushWindow): ThumbnailWindow {
  const start = Math.max(0, Math.min(brush.start, subset.length));
  const span = Math.max(0, Math.min(brush.size, subset.length - start));
  const shown = Math.min(span, THUMBNAIL_CAP);
  return {
    ids: subset.slice(start, start + shown),
    overflow: span - shown,
  };
}

/** Sources for a launch: the filtered subset minus the chosen target. */
export function launchSources(state: SelectorViewState): string[] {
  return state.subset.filter((id) => id !== state.targetId);
}

export function selectionsForLaunch(state: SelectorViewState): number[][] {
  return [Array.from(state.segments).sort((a, b) => a - b)];
}

/** Fraction of the unfiltered cohort surviving each layer, for icicle widths. */
export function layerFractions(layers: FilterLayer[]): number[] {
  if (layers.length === 0) return [];
  const total = layers[0].count;
  return layers.map((layer) => (total === 0 ? 0 : layer.count / total));
}

export function formatProportion(p: number | null): string {
  return p === null ? '—' : p.toFixed(3);
}

export function describeClause(clause: FilterClause | null): string {
  if (clause === null) return 'all subjects';
  if ('values' in clause) return `${clause.variable} ∈ {${clause.values.join(', ')}}`;
  return `${clause.variable} ∈ [${clause.lo}, ${clause.hi}]`;
}
