/** Application shell: target panel, segment checkboxes, demographic filter
 * panel (histogram + slider, icicle, unit strip + brush, thumbnail grid)
 * and the run panel (summary table + recombined gallery).
 *
 * Every displayed count equals the corresponding API value; reloading and
 * replaying the same interactions reproduces identical numbers. */

import { ApiClient, ApiError } from './api';
import { renderSourceGallery, renderResultGallery } from './gallery';
import { renderHistogram } from './histogram';
import { renderIcicle } from './icicle';
import { OVERLAY_PALETTE } from './palette';
import {
  POLL_INTERVAL_MS,
  canLaunch,
  initialState,
  launchSources,
  selectionsForLaunch,
} from './state';

/** playback rate for multi-frame volumes in the target panel */
const FRAME_INTERVAL_MS = 150;
import type { SelectorViewState } from './state';
import { renderSummaryTable } from './summary';
import type {
  FilterClause,
  HistogramResponse,
  SchemaResponse,
  Subject,
  SummaryRow,
} from './types';
import { renderUnitViz } from './unitviz';

interface Panels {
  target: HTMLElement;
  segments: HTMLElement;
  filters: HTMLElement;
  histogram: HTMLElement;
  icicle: HTMLElement;
  units: HTMLElement;
  gallery: HTMLElement;
  run: HTMLElement;
  summary: HTMLElement;
  results: HTMLElement;
  status: HTMLElement;
  error: HTMLElement;
}

export class App {
  readonly state: SelectorViewState = initialState();
  schema: SchemaResponse | null = null;
  subjects: Subject[] = [];
  runId: string | null = null;
  runPhase: string | null = null;
  private panels: Panels;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private frameTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    this.panels = buildLayout(root);
  }

  async init(): Promise<void> {
    this.schema = await this.api.schema();
    this.subjects = (await this.api.subjects()).subjects;
    this.renderSegmentCheckboxes();
    this.renderTargetPicker();
    this.renderFilterControls();
    await this.refreshFilters();
  }

  /** target panel ------------------------------------------------------- */

  private renderTargetPicker(): void {
    const picker = document.createElement('select');
    picker.className = 'target-picker';
    const blank = document.createElement('option');
    blank.value = '';
    blank.textContent = 'choose a target…';
    picker.append(blank);
    for (const subject of this.subjects) {
      const opt = document.createElement('option');
      opt.value = subject.id;
      opt.textContent = `${subject.id} (label ${subject.predicted_label})`;
      picker.append(opt);
    }
    picker.addEventListener('change', () => {
      void this.selectTarget(picker.value || null);
    });
    const overlayToggle = document.createElement('label');
    overlayToggle.className = 'overlay-toggle';
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = this.state.overlayTarget;
    box.addEventListener('change', () => {
      this.state.overlayTarget = box.checked;
      this.renderTargetFrame();
    });
    overlayToggle.append(box, document.createTextNode(' overlay'));
    this.panels.target.replaceChildren(picker, overlayToggle);
    const playButton = document.createElement('button');
    playButton.className = 'play-toggle';
    playButton.textContent = 'play';
    playButton.hidden = true;
    playButton.addEventListener('click', () => this.togglePlayback());
    this.panels.target.append(playButton);
    const frameBox = document.createElement('div');
    frameBox.className = 'target-frame';
    this.panels.target.append(frameBox);
  }

  async selectTarget(id: string | null): Promise<void> {
    this.state.targetId = id;
    this.state.frame = 0;
    this.setPlaying(false);
    const subject = this.subjects.find((s) => s.id === id);
    const playButton = this.panels.target.querySelector<HTMLButtonElement>('.play-toggle');
    if (playButton) playButton.hidden = !subject || subject.frames <= 1;
    this.renderTargetFrame();
    await this.refreshFilters(); // target is excluded from launchable sources
  }

  /** multi-frame volumes can play/pause in the target panel */
  togglePlayback(): void {
    this.setPlaying(!this.state.playing);
  }

  private setPlaying(playing: boolean): void {
    this.state.playing = playing;
    const playButton = this.panels.target.querySelector<HTMLButtonElement>('.play-toggle');
    if (playButton) playButton.textContent = playing ? 'pause' : 'play';
    if (this.frameTimer !== null) {
      clearInterval(this.frameTimer);
      this.frameTimer = null;
    }
    if (playing) {
      const subject = this.subjects.find((s) => s.id === this.state.targetId);
      const frames = subject?.frames ?? 1;
      this.frameTimer = setInterval(() => {
        this.state.frame = (this.state.frame + 1) % frames;
        this.renderTargetFrame();
      }, FRAME_INTERVAL_MS);
    }
  }

  private renderTargetFrame(): void {
    const frameBox = this.panels.target.querySelector('.target-frame');
    if (!frameBox) return;
    frameBox.replaceChildren();
    if (this.state.targetId === null) return;
    const img = document.createElement('img');
    img.src = this.api.frameUrl(this.state.targetId, this.state.frame, this.state.overlayTarget);
    img.alt = this.state.targetId;
    frameBox.append(img);
  }

  private renderSegmentCheckboxes(): void {
    const list = document.createElement('div');
    list.className = 'segment-checkboxes';
    for (const label of this.schema?.labels ?? []) {
      const item = document.createElement('label');
      item.className = 'segment-checkbox';
      const box = document.createElement('input');
      box.type = 'checkbox';
      box.value = String(label.id);
      box.addEventListener('change', () => {
        if (box.checked) this.state.segments.add(label.id);
        else this.state.segments.delete(label.id);
        this.updateLaunchButton();
      });
      const swatch = document.createElement('span');
      swatch.className = 'swatch';
      swatch.style.background = OVERLAY_PALETTE[label.id] ?? '#999';
      item.append(box, swatch, document.createTextNode(` ${label.name}`));
      list.append(item);
    }
    this.panels.segments.replaceChildren(list);
  }

  /** filter panel ------------------------------------------------------- */

  private renderFilterControls(): void {
    const dropdown = document.createElement('select');
    dropdown.className = 'variable-picker';
    const blank = document.createElement('option');
    blank.value = '';
    blank.textContent = 'add filter variable…';
    dropdown.append(blank);
    for (const decl of this.schema?.variables ?? []) {
      const opt = document.createElement('option');
      opt.value = decl.name;
      opt.textContent = decl.unit ? `${decl.name} (${decl.unit})` : decl.name;
      dropdown.append(opt);
    }
    dropdown.addEventListener('change', () => {
      if (dropdown.value) void this.addVariable(dropdown.value);
    });
    const overlayToggle = document.createElement('label');
    overlayToggle.className = 'overlay-toggle';
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = this.state.overlaySource;
    box.addEventListener('change', () => {
      this.state.overlaySource = box.checked;
      this.renderGallery();
    });
    overlayToggle.append(box, document.createTextNode(' overlay'));
    this.panels.filters.replaceChildren(dropdown, overlayToggle);
  }

  /** show a variable's distribution and start filtering on it */
  async addVariable(variable: string): Promise<void> {
    const decl = this.schema?.variables.find((v) => v.name === variable);
    const doc = await this.showHistogram(variable);
    if (doc.kind === 'categorical' && doc.counts) {
      const picker = document.createElement('div');
      picker.className = 'category-picker';
      for (const { value, count } of doc.counts) {
        const item = document.createElement('label');
        const box = document.createElement('input');
        box.type = 'checkbox';
        box.value = value;
        box.addEventListener('change', () => {
          const values = Array.from(
            picker.querySelectorAll<HTMLInputElement>('input:checked'),
          ).map((b) => b.value);
          if (values.length > 0) void this.setCategoricalClause(variable, values);
          else void this.removeClause(variable);
        });
        item.append(box, document.createTextNode(` ${value} (${count})`));
        picker.append(item);
      }
      this.panels.histogram.replaceChildren(picker);
    } else if (decl && doc.bins && doc.bins.length > 0) {
      // start with the full range selected; dragging narrows it
      await this.setNumericClause(variable, doc.bins[0].lo, doc.bins[doc.bins.length - 1].hi);
    }
  }

  async setNumericClause(variable: string, lo: number, hi: number): Promise<void> {
    const idx = this.state.clauses.findIndex((c) => c.variable === variable);
    const clause: FilterClause = { variable, lo, hi };
    if (idx >= 0) this.state.clauses[idx] = clause;
    else this.state.clauses.push(clause);
    await this.refreshFilters();
  }

  async setCategoricalClause(variable: string, values: string[]): Promise<void> {
    const idx = this.state.clauses.findIndex((c) => c.variable === variable);
    const clause: FilterClause = { variable, values };
    if (idx >= 0) this.state.clauses[idx] = clause;
    else this.state.clauses.push(clause);
    await this.refreshFilters();
  }

  async removeClause(variable: string): Promise<void> {
    this.state.clauses = this.state.clauses.filter((c) => c.variable !== variable);
    await this.refreshFilters();
  }

  async showHistogram(variable: string): Promise<HistogramResponse> {
    const doc = await this.api.histogram(variable);
    if (doc.kind === 'numeric' && doc.bins) {
      renderHistogram(this.panels.histogram, doc.bins, (lo, hi) => {
        void this.setNumericClause(variable, lo, hi);
      });
    }
    return doc;
  }

  /** POST the clause list; icicle, unit strip and grid re-render from the response. */
  async refreshFilters(): Promise<void> {
    this.clearError();
    try {
      const doc = await this.api.applyFilters(this.state.clauses);
      this.state.layers = doc.layers;
      this.state.subset = doc.subset;
    } catch (err) {
      this.showError(err);
      return;
    }
    renderIcicle(this.panels.icicle, this.state.layers);
    renderUnitViz(
      this.panels.units,
      this.subjects.map((s) => s.id),
      this.state.subset,
      this.state.brush,
      (brush) => {
        this.state.brush = brush;
        this.renderGallery();
      },
    );
    this.renderGallery();
    this.updateLaunchButton();
  }

  private renderGallery(): void {
    renderSourceGallery(
      this.panels.gallery,
      this.api,
      this.state.subset,
      this.state.brush,
      this.state.overlaySource,
      this.state.frame,
    );
  }

  /** run panel ---------------------------------------------------------- */

  private updateLaunchButton(): void {
    let button = this.panels.run.querySelector<HTMLButtonElement>('.launch');
    if (!button) {
      button = document.createElement('button');
      button.className = 'launch';
      button.textContent = 'recombine';
      button.addEventListener('click', () => void this.launchRun());
      this.panels.run.prepend(button);
    }
    button.disabled = !canLaunch(this.state);
  }

  async launchRun(): Promise<string | null> {
    if (!canLaunch(this.state) || this.state.targetId === null) return null;
    this.clearError();
    try {
      const accepted = await this.api.launchRun(
        [this.state.targetId],
        launchSources(this.state),
        selectionsForLaunch(this.state),
      );
      this.runId = accepted.run_id;
      this.runPhase = accepted.status;
      this.panels.status.textContent = `run ${accepted.run_id}: ${accepted.status}`;
      this.startPolling();
      return accepted.run_id;
    } catch (err) {
      this.showError(err);
      return null;
    }
  }

  private startPolling(): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => {
      void this.pollOnce();
    }, POLL_INTERVAL_MS);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async pollOnce(): Promise<void> {
    if (this.runId === null) return;
    const status = await this.api.runStatus(this.runId);
    this.runPhase = status.status;
    this.panels.status.textContent =
      `run ${this.runId}: ${status.status}` +
      (status.result_count !== undefined ? ` (${status.result_count} results)` : '');
    if (status.status === 'complete') {
      this.stopPolling();
      await this.showRunOutputs();
    } else if (status.status === 'failed') {
      this.stopPolling();
      this.panels.status.textContent = `run ${this.runId}: failed — ${status.error ?? ''}`;
    }
  }

  private async showRunOutputs(): Promise<void> {
    if (this.runId === null) return;
    const summary = await this.api.runSummary(this.runId);
    this.renderSummary(summary.rows);
    const page = await this.api.runResults(this.runId, 0, 50);
    renderResultGallery(this.panels.results, this.api, this.runId, page.results, this.state.frame);
  }

  renderSummary(rows: SummaryRow[]): void {
    renderSummaryTable(this.panels.summary, rows);
  }

  /** error surface ------------------------------------------------------ */

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError
        ? `${err.field ? `${err.field}: ` : ''}${err.message}`
        : String(err);
    this.panels.error.textContent = message;
    this.panels.error.hidden = false;
  }

  private clearError(): void {
    this.panels.error.textContent = '';
    this.panels.error.hidden = true;
  }
}

function buildLayout(root: HTMLElement): Panels {
  root.replaceChildren();
  const make = (cls: string, parent: HTMLElement): HTMLElement => {
    const el = document.createElement('section');
    el.className = cls;
    parent.append(el);
    return el;
  };
  const top = document.createElement('div');
  top.className = 'panel panel-target';
  const bottom = document.createElement('div');
  bottom.className = 'panel panel-filter';
  const runPanel = document.createElement('div');
  runPanel.className = 'panel panel-run';
  root.append(top, bottom, runPanel);

  const panels: Panels = {
    target: make('target', top),
    segments: make('segments', top),
    filters: make('filters', bottom),
    histogram: make('histogram-box', bottom),
    icicle: make('icicle-box', bottom),
    units: make('units-box', bottom),
    gallery: make('gallery-box', bottom),
    run: make('run-controls', runPanel),
    status: make('run-status', runPanel),
    summary: make('summary-box', runPanel),
    results: make('results-box', runPanel),
    error: make('error-box', runPanel),
  };
  panels.error.hidden = true;
  return panels;
}

export function boot(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');
  const app = new App(root, new ApiClient(''));
  void app.init();
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot();
}
