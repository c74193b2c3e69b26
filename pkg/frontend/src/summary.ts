/** Per-selection counterfactual summary table; values come straight from
 * the run summary endpoint with no client-side aggregation. */

import { formatProportion } from './state';
import type { SummaryRow } from './types';

const COLUMNS = ['segment(s) replaced', 'counterfactuals', 'unchanged', 'proportion'];

export function renderSummaryTable(container: HTMLElement, rows: SummaryRow[]): void {
  container.replaceChildren();
  const table = document.createElement('table');
  table.className = 'summary-table';
  const thead = document.createElement('thead');
  const headRow = document.createElement('tr');
  for (const name of COLUMNS) {
    const th = document.createElement('th');
    th.textContent = name;
    headRow.append(th);
  }
  thead.append(headRow);
  table.append(thead);

  const tbody = document.createElement('tbody');
  for (const row of rows) {
    const tr = document.createElement('tr');
    const cells = [
      row.segments.replaceAll('+', ' + '),
      String(row.counterfactuals),
      String(row.unchanged),
      formatProportion(row.proportion),
    ];
    for (const text of cells) {
      const td = document.createElement('td');
      td.textContent = text;
      tr.append(td);
    }
    if (row.skipped > 0) {
      tr.title = `${row.skipped} recombination(s) skipped (missing source segment)`;
    }
    tbody.append(tr);
  }
  table.append(tbody);
  container.append(table);
}
