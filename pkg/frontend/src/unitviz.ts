/** Unit visualization: one mark per source subject, selected units colored
 * dark and left-aligned so the strip lines up with the lowest icicle layer.
 * A draggable brush window picks which selected units the thumbnail grid
 * shows (at most THUMBNAIL_CAP at a time). */

import { UNIT_SELECTED, UNIT_UNSELECTED } from './palette';
import { THUMBNAIL_CAP } from './state';
import type { BrushWindow } from './state';

export interface UnitVizControl {
  root: HTMLElement;
  brush(): BrushWindow;
  setBrushStart(start: number): void;
}

export function renderUnitViz(
  container: HTMLElement,
  allIds: string[],
  subset: string[],
  brush: BrushWindow,
  onBrush: (brush: BrushWindow) => void,
): UnitVizControl {
  container.replaceChildren();
  container.classList.add('unitviz');

  const strip = document.createElement('div');
  strip.className = 'unit-strip';
  const selected = new Set(subset);
  // selected units first (dataset order), then the rest: left-aligned
  const ordered = [...subset, ...allIds.filter((id) => !selected.has(id))];
  for (const id of ordered) {
    const unit = document.createElement('div');
    unit.className = 'unit';
    unit.dataset.subject = id;
    unit.style.background = selected.has(id) ? UNIT_SELECTED : UNIT_UNSELECTED;
    strip.append(unit);
  }
  container.append(strip);

  const state: BrushWindow = {
    start: Math.max(0, Math.min(brush.start, Math.max(0, subset.length - 1))),
    size: brush.size,
  };

  const brushEl = document.createElement('div');
  brushEl.className = 'unit-brush';
  container.append(brushEl);

  function paint() {
    const unitWidth = allIds.length === 0 ? 0 : 100 / allIds.length;
    brushEl.style.left = `${(state.start * unitWidth).toFixed(3)}%`;
    brushEl.style.width = `${(Math.min(state.size, Math.max(subset.length - state.start, 0)) * unitWidth).toFixed(3)}%`;
  }

  let dragOrigin: { x: number; start: number } | null = null;
  brushEl.addEventListener('pointerdown', (ev) => {
    dragOrigin = { x: ev.clientX, start: state.start };
    brushEl.setPointerCapture?.(ev.pointerId);
  });
  brushEl.addEventListener('pointermove', (ev) => {
    if (!dragOrigin || allIds.length === 0) return;
    const stripWidth = strip.getBoundingClientRect().width || 1;
    const unitsMoved = Math.round(((ev.clientX - dragOrigin.x) / stripWidth) * allIds.length);
    const maxStart = Math.max(0, subset.length - 1);
    state.start = Math.max(0, Math.min(dragOrigin.start + unitsMoved, maxStart));
    paint();
    onBrush({ ...state });
  });
  brushEl.addEventListener('pointerup', () => {
    dragOrigin = null;
  });

  paint();
  return {
    root: container,
    brush: () => ({ ...state }),
    setBrushStart(start: number) {
      state.start = Math.max(0, Math.min(start, Math.max(0, subset.length - 1)));
      paint();
      onBrush({ ...state });
    },
  };
}

export { THUMBNAIL_CAP };
