/** Histogram with a draggable range slider along the x-axis.
 *
 * Bars show the distribution of one numeric variable; the two handles set
 * an inclusive [lo, hi] range that becomes a filter clause. Bars inside
 * the active range are highlighted.
 */

import type { HistogramBin } from './types';

const BAR_ACTIVE = '#0072B2';
const BAR_INACTIVE = '#cbd5e1';

export interface HistogramControl {
  root: HTMLElement;
  /** current inclusive range */
  range(): [number, number];
  setRange(lo: number, hi: number): void;
}

export function renderHistogram(
  container: HTMLElement,
  bins: HistogramBin[],
  onRange: (lo: number, hi: number) => void,
): HistogramControl {
  container.replaceChildren();
  container.classList.add('histogram');
  if (bins.length === 0) {
    container.textContent = 'no values';
    return { root: container, range: () => [0, 0], setRange: () => {} };
  }
  const lo0 = bins[0].lo;
  const hi0 = bins[bins.length - 1].hi;
  let lo = lo0;
  let hi = hi0;

  const bars = document.createElement('div');
  bars.className = 'histogram-bars';
  const maxCount = Math.max(1, ...bins.map((b) => b.count));
  const barEls: HTMLElement[] = bins.map((bin) => {
    const bar = document.createElement('div');
    bar.className = 'histogram-bar';
    bar.style.height = `${(100 * bin.count) / maxCount}%`;
    bar.dataset.count = String(bin.count);
    bar.title = `[${bin.lo.toFixed(1)}, ${bin.hi.toFixed(1)}): ${bin.count}`;
    bars.append(bar);
    return bar;
  });
  container.append(bars);

  // x-axis slider: two numeric handles, inclusive endpoints
  const slider = document.createElement('div');
  slider.className = 'histogram-slider';
  const loInput = document.createElement('input');
  const hiInput = document.createElement('input');
  for (const [input, value] of [[loInput, lo0], [hiInput, hi0]] as const) {
    input.type = 'range';
    input.min = String(lo0);
    input.max = String(hi0);
    input.step = 'any';
    input.value = String(value);
  }
  loInput.className = 'slider-lo';
  hiInput.className = 'slider-hi';
  slider.append(loInput, hiInput);
  container.append(slider);

  const readout = document.createElement('div');
  readout.className = 'histogram-range';
  container.append(readout);

  function paint() {
    barEls.forEach((bar, i) => {
      const bin = bins[i];
      const active = bin.hi >= lo && bin.lo <= hi;
      bar.style.background = active ? BAR_ACTIVE : BAR_INACTIVE;
    });
    readout.textContent = `[${lo.toFixed(1)}, ${hi.toFixed(1)}]`;
  }

  function handleInput() {
    lo = Math.min(Number(loInput.value), Number(hiInput.value));
    hi = Math.max(Number(loInput.value), Number(hiInput.value));
    paint();
    onRange(lo, hi);
  }
  loInput.addEventListener('input', handleInput);
  hiInput.addEventListener('input', handleInput);
  paint();

  return {
    root: container,
    range: () => [lo, hi],
    setRange(newLo: number, newHi: number) {
      loInput.value = String(newLo);
      hiInput.value = String(newHi);
      handleInput();
    },
  };
}
