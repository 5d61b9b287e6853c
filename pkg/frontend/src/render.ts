/**
 * HTML string builders. Pure functions over state, no DOM access, so
 * rendering is testable under plain node. Highlight segmentation walks
 * the span offsets; it never searches the context for span text.
 */

import { EditorState, FieldDiff, PII_TYPES, SpanRecord } from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function relevanceClass(relevance: number): string {
  return relevance === 1 ? "pii-high" : "pii-low";
}

/**
 * Context with each span wrapped in a mark carrying its relevance class.
 * Spans must be non-overlapping; render order comes from offsets.
 */
export function renderContext(context: string, spans: SpanRecord[], selected = -1): string {
  const order = spans
    .map((span, index) => ({ span, index }))
    .sort((a, b) => a.span.start - b.span.start);
  const parts: string[] = [];
  let cursor = 0;
  for (const { span, index } of order) {
    if (span.start < cursor || span.end > context.length) {
      throw new Error(`span ${index} does not fit the context`);
    }
    parts.push(escapeHtml(context.slice(cursor, span.start)));
    const classes = [relevanceClass(span.relevance)];
    if (index === selected) classes.push("selected");
    parts.push(
      `<mark class="${classes.join(" ")}" data-span="${index}">` +
        escapeHtml(context.slice(span.start, span.end)) +
        "</mark>",
    );
    cursor = span.end;
  }
  parts.push(escapeHtml(context.slice(cursor)));
  return parts.join("");
}

export function renderQuestion(question: string): string {
  return `<p class="question">${escapeHtml(question)}</p>`;
}

function typeOptions(current: string): string {
  return PII_TYPES.map(
    (t) =>
      `<option value="${escapeHtml(t)}"${t === current ? " selected" : ""}>` +
      `${escapeHtml(t)}</option>`,
  ).join("");
}

export function renderSpanTable(spans: SpanRecord[], selected: number): string {
  if (spans.length === 0) {
    return '<p class="no-spans">no spans</p>';
  }
  const rows = spans
    .map((span, i) => {
      const cls = i === selected ? ' class="selected"' : "";
      return (
        `<tr${cls} data-span="${i}">` +
        `<td class="span-text">${escapeHtml(span.text)}</td>` +
        `<td>[${span.start}, ${span.end})` +
        ` <button data-act="start-" data-span="${i}" title="start left">&#8676;</button>` +
        `<button data-act="start+" data-span="${i}" title="start right">&#8677;</button>` +
        `<button data-act="end-" data-span="${i}" title="end left">&#8676;</button>` +
        `<button data-act="end+" data-span="${i}" title="end right">&#8677;</button></td>` +
        `<td><select data-act="type" data-span="${i}">${typeOptions(span.type)}</select></td>` +
        `<td><button data-act="toggle" data-span="${i}" class="${relevanceClass(span.relevance)}">` +
        `${span.relevance === 1 ? "high" : "low"}</button></td>` +
        "</tr>"
      );
    })
    .join("");
  return (
    '<table class="spans"><thead><tr><th>text</th><th>offsets</th><th>type</th><th>relevance</th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderViolations(violations: string[]): string {
  if (violations.length === 0) return "";
  const items = violations.map((v) => `<li>${escapeHtml(v)}</li>`).join("");
  return `<ul class="violations">${items}</ul>`;
}

export function renderErrorBanner(message: string, retryable: boolean): string {
  const retry = retryable ? ' <button data-act="retry">retry</button>' : "";
  return `<div class="banner error">${escapeHtml(message)}${retry}</div>`;
}

export function renderConflictDialog(diffs: FieldDiff[], actualRevision: number): string {
  const rows = diffs
    .map(
      (d) =>
        `<tr><td>${escapeHtml(d.field)}</td>` +
        `<td class="server">${escapeHtml(d.server)}</td>` +
        `<td class="local">${escapeHtml(d.local)}</td></tr>`,
    )
    .join("");
  return (
    '<div class="dialog conflict"><h2>someone else saved first</h2>' +
    `<p>the sample is now at revision ${actualRevision}; pick what to keep.</p>` +
    "<table><thead><tr><th>field</th><th>server</th><th>yours</th></tr></thead>" +
    `<tbody>${rows}</tbody></table>` +
    '<button data-act="take-server">load server version</button> ' +
    '<button data-act="keep-local">reapply my edits</button></div>'
  );
}

export function renderStatusLine(state: EditorState): string {
  const sample = state.snapshot;
  const dirtyMark = state.dirty.context || state.dirty.question || state.dirty.spans || state.dirty.status ? " *" : "";
  return (
    `<span class="sample-id">${escapeHtml(sample.id)}</span>` +
    ` <span class="revision">rev ${sample.revision}</span>` +
    ` <span class="status">${escapeHtml(state.status)}</span>${dirtyMark}`
  );
}
