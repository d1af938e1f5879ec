/** Live agreement table and per-question bars, rendered from API data. */

import type { AgreementCell, AgreementTables, PolicyKey } from './types.js';
import { POLICY_LABELS, POLICY_ORDER } from './types.js';

export const EMPTY_CELL = '—'; // em dash placeholder for null denominators

export function formatCell(cell: AgreementCell | null): string {
  if (cell === null) {
    return EMPTY_CELL;
  }
  return `${(100 * cell.rate).toFixed(2)}%`;
}

function policyTable(doc: Document, tables: AgreementTables): HTMLTableElement {
  const table = doc.createElement('table');
  table.className = 'agreement-table';
  const head = table.createTHead().insertRow();
  for (const label of ['Condition', 'Agreement rate', 'Judged & retained']) {
    const th = doc.createElement('th');
    th.textContent = label;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const policy of POLICY_ORDER) {
    const cell = tables.overall[policy];
    const row = body.insertRow();
    row.dataset.policy = policy;
    row.insertCell().textContent = POLICY_LABELS[policy];
    row.insertCell().textContent = formatCell(cell);
    row.insertCell().textContent = cell === null ? EMPTY_CELL : String(cell.judged_retained);
  }
  return table;
}

function questionBars(doc: Document, tables: AgreementTables): HTMLElement {
  const wrap = doc.createElement('div');
  wrap.className = 'question-bars';
  const questions = Object.keys(tables.per_question).sort();
  for (const question of questions) {
    const group = doc.createElement('div');
    group.className = 'bar-group';
    const label = doc.createElement('span');
    label.className = 'bar-label';
    label.textContent = question;
    group.appendChild(label);
    for (const policy of POLICY_ORDER) {
      const cell = (tables.per_question[question] ?? {})[policy as PolicyKey] ?? null;
      const bar = doc.createElement('span');
      bar.className = `bar bar-${POLICY_ORDER.indexOf(policy)}`;
      bar.dataset.policy = policy;
      bar.dataset.question = question;
      if (cell === null) {
        bar.classList.add('bar-empty');
        bar.title = `${POLICY_LABELS[policy]}: ${EMPTY_CELL}`;
      } else {
        bar.style.height = `${Math.round(100 * cell.rate)}%`;
        bar.title = `${POLICY_LABELS[policy]}: ${formatCell(cell)}`;
      }
      group.appendChild(bar);
    }
    wrap.appendChild(group);
  }
  return wrap;
}

export function renderAgreement(container: HTMLElement, tables: AgreementTables): void {
  const doc = container.ownerDocument;
  container.replaceChildren(policyTable(doc, tables), questionBars(doc, tables));
}
