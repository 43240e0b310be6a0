// Structured point-edit form. Edits are validated client-side against the
// edit schema before any request is sent; a 422 from the service lands
// inline at the offending field.

import { EditPayload, ModelDetail } from './api.js';

export const EDIT_KINDS = [
  'ReplaceCondition',
  'AddCondition',
  'RemoveCondition',
  'ReplaceNumericLiteral',
] as const;

export interface FormHandle {
  element: HTMLFormElement;
  setServerError(message: string): void;
  setBusy(busy: boolean): void;
}

function balanced(text: string): boolean {
  let depth = 0;
  let quotes = 0;
  for (const ch of text) {
    if (ch === "'") quotes += 1;
    if (ch === '(') depth += 1;
    if (ch === ')') depth -= 1;
    if (depth < 0) return false;
  }
  return depth === 0 && quotes % 2 === 0;
}

export function validateEdit(edit: EditPayload, detail: ModelDetail): string | null {
  if (!EDIT_KINDS.includes(edit.kind as (typeof EDIT_KINDS)[number])) {
    return `unknown edit kind ${edit.kind}`;
  }
  const conditions = detail.editable.conditions;
  if (edit.kind === 'ReplaceCondition' || edit.kind === 'RemoveCondition') {
    const index = edit.target;
    if (typeof index !== 'number' || !conditions.some((c) => c.index === index)) {
      return 'pick a condition to edit';
    }
  }
  if (edit.kind === 'ReplaceCondition' || edit.kind === 'AddCondition') {
    const payload = edit.payload;
    if (typeof payload !== 'string' || payload.trim() === '') {
      return 'the new condition expression is empty';
    }
    if (!balanced(payload)) {
      return 'the expression has unbalanced parentheses or quotes';
    }
  }
  if (edit.kind === 'ReplaceNumericLiteral') {
    if (!Array.isArray(edit.target)) return 'pick a numeric literal to edit';
    if (typeof edit.payload !== 'number' || Number.isNaN(edit.payload)) {
      return 'the replacement value must be a number';
    }
  }
  return null;
}

export function buildEditForm(
  detail: ModelDetail,
  onSubmit: (edit: EditPayload) => void,
): FormHandle {
  const form = document.createElement('form');
  form.className = 'edit-form';
  form.noValidate = true;

  const kindSelect = document.createElement('select');
  kindSelect.name = 'kind';
  for (const kind of EDIT_KINDS) {
    const option = document.createElement('option');
    option.value = kind;
    option.textContent = kind;
    kindSelect.appendChild(option);
  }

  const conditionSelect = document.createElement('select');
  conditionSelect.name = 'target';
  for (const condition of detail.editable.conditions) {
    const option = document.createElement('option');
    option.value = String(condition.index);
    option.textContent = `#${condition.index}: condition(${condition.text})`;
    conditionSelect.appendChild(option);
  }

  const literalSelect = document.createElement('select');
  literalSelect.name = 'literal';
  literalSelect.hidden = true;
  for (const literal of detail.editable.numeric_literals) {
    const option = document.createElement('option');
    option.value = `${literal.span[0]},${literal.span[1]}`;
    option.textContent = `${literal.value} @ [${literal.span[0]}, ${literal.span[1]})`;
    literalSelect.appendChild(option);
  }

  const payloadInput = document.createElement('input');
  payloadInput.name = 'payload';
  payloadInput.placeholder = "expression, e.g. does_exercise('sean')";
  const noteInput = document.createElement('input');
  noteInput.name = 'note';
  noteInput.placeholder = 'why this edit? (optional)';

  const errorEl = document.createElement('p');
  errorEl.className = 'form-error';
  errorEl.hidden = true;

  const submit = document.createElement('button');
  submit.type = 'submit';
  submit.textContent = 'apply edit and rerun inference';

  form.append(kindSelect, conditionSelect, literalSelect, payloadInput, noteInput, errorEl, submit);

  function syncVisibility(): void {
    const kind = kindSelect.value;
    conditionSelect.hidden = !(kind === 'ReplaceCondition' || kind === 'RemoveCondition');
    literalSelect.hidden = kind !== 'ReplaceNumericLiteral';
    payloadInput.hidden = kind === 'RemoveCondition';
    payloadInput.placeholder =
      kind === 'ReplaceNumericLiteral' ? 'new number, e.g. 0.01' : "expression, e.g. does_exercise('sean')";
  }
  kindSelect.addEventListener('change', syncVisibility);
  syncVisibility();

  function currentEdit(): EditPayload {
    const kind = kindSelect.value;
    const edit: EditPayload = { kind, note: noteInput.value };
    if (kind === 'ReplaceCondition' || kind === 'RemoveCondition') {
      edit.target = Number(conditionSelect.value);
    }
    if (kind === 'ReplaceNumericLiteral') {
      const [start, end] = literalSelect.value.split(',').map(Number);
      edit.target = [start, end];
      edit.payload = Number(payloadInput.value);
    } else if (kind !== 'RemoveCondition') {
      edit.payload = payloadInput.value;
    }
    return edit;
  }

  function showError(message: string): void {
    errorEl.textContent = message;
    errorEl.hidden = false;
  }

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    errorEl.hidden = true;
    const edit = currentEdit();
    const problem = validateEdit(edit, detail);
    if (problem) {
      showError(problem);
      return; // invalid edits never reach the service
    }
    onSubmit(edit);
  });

  return {
    element: form,
    setServerError: showError,
    setBusy(busy: boolean) {
      submit.disabled = busy;
      submit.textContent = busy ? 'rerunning inference…' : 'apply edit and rerun inference';
    },
  };
}
