/** Icicle plot of successive filter layers: one full-width bar per layer,
 * each layer's width proportional to its surviving-subject count. */

import { describeClause, layerFractions } from './state';
import type { FilterLayer } from './types';

const LAYER_COLORS = ['#94a3b8', '#64748b', '#475569', '#334155', '#1e293b'];

export function renderIcicle(container: HTMLElement, layers: FilterLayer[]): void {
  container.replaceChildren();
  container.classList.add('icicle');
  const fractions = layerFractions(layers);
  layers.forEach((layer, i) => {
    const row = document.createElement('div');
    row.className = 'icicle-layer';
    const bar = document.createElement('div');
    bar.className = 'icicle-bar';
    bar.style.width = `${(fractions[i] * 100).toFixed(2)}%`;
    bar.style.background = LAYER_COLORS[Math.min(i, LAYER_COLORS.length - 1)];
    bar.dataset.count = String(layer.count);
    const label = document.createElement('span');
    label.className = 'icicle-label';
    label.textContent = `${describeClause(layer.clause)}: ${layer.count}`;
    row.append(bar, label);
    container.append(row);
  });
}
