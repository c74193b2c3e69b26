/** Thumbnail grid for source subjects and recombined results.
 *
 * Never renders more than THUMBNAIL_CAP images; an overflow indicator
 * reports how many brushed units were not displayed. Result thumbnails
 * carry a counterfactual badge when the prediction flipped.
 */

import type { ApiClient } from './api';
import { COUNTERFACTUAL_BADGE } from './palette';
import { THUMBNAIL_CAP, visibleThumbnails } from './state';
import type { BrushWindow } from './state';
import type { ResultItem } from './types';

export function renderSourceGallery(
  container: HTMLElement,
  api: ApiClient,
  subset: string[],
  brush: BrushWindow,
  overlay: boolean,
  frame = 0,
): void {
  container.replaceChildren();
  container.classList.add('gallery');
  const window_ = visibleThumbnails(subset, brush);
  for (const id of window_.ids) {
    const cell = document.createElement('figure');
    cell.className = 'thumb';
    const img = document.createElement('img');
    img.src = api.frameUrl(id, frame, overlay);
    img.alt = id;
    const caption = document.createElement('figcaption');
    caption.textContent = id;
    cell.append(img, caption);
    container.append(cell);
  }
  appendOverflow(container, window_.overflow);
}

export function renderResultGallery(
  container: HTMLElement,
  api: ApiClient,
  runId: string,
  results: ResultItem[],
  frame = 0,
): void {
  container.replaceChildren();
  container.classList.add('gallery');
  for (const result of results.slice(0, THUMBNAIL_CAP)) {
    const cell = document.createElement('figure');
    cell.className = 'thumb';
    const img = document.createElement('img');
    img.src = api.recombinedFrameUrl(runId, result.index, frame);
    img.alt = `${result.target} ← ${result.source}`;
    cell.append(img);
    if (result.is_counterfactual) {
      const badge = document.createElement('span');
      badge.className = 'cf-badge';
      badge.textContent = 'counterfactual';
      badge.style.background = COUNTERFACTUAL_BADGE;
      cell.append(badge);
    }
    const caption = document.createElement('figcaption');
    caption.textContent = `${result.target} ← ${result.source}`;
    cell.append(caption);
    container.append(cell);
  }
  appendOverflow(container, Math.max(0, results.length - THUMBNAIL_CAP));
}

function appendOverflow(container: HTMLElement, overflow: number): void {
  if (overflow <= 0) return;
  const note = document.createElement('div');
  note.className = 'overflow-note';
  note.textContent = `+${overflow} more not shown`;
  container.append(note);
}
