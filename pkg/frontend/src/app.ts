/**
 * DOM wiring for the review tool. All state transitions and HTML
 * generation live in model.ts and render.ts; this file only routes
 * events and swaps innerHTML.
 *
 * Keyboard map: n/p move between samples, arrows move span selection,
 * r toggles the selected span's relevance, v marks validated, s saves.
 */

import { getSample, listSamples, putSample, SampleSummary, SaveResult } from "./api.js";
import {
  buildUpdate,
  canSave,
  diffAgainstServer,
  EditorState,
  initState,
  SampleRecord,
  adjustSpanBoundary,
  selectNextSpan,
  selectSpan,
  setQuestion,
  setSpanType,
  setStatus,
  toggleRelevance,
  validateDraft,
} from "./model.js";
import {
  renderConflictDialog,
  renderContext,
  renderErrorBanner,
  renderQuestion,
  renderSpanTable,
  renderStatusLine,
  renderViolations,
} from "./render.js";

interface AppState {
  summaries: SampleSummary[];
  position: number;
  editor: EditorState | null;
  conflict: { server: SampleRecord; actualRevision: number } | null;
  banner: { message: string; retryable: boolean } | null;
  saving: boolean;
}

const app: AppState = {
  summaries: [],
  position: 0,
  editor: null,
  conflict: null,
  banner: null,
  saving: false,
};

const BASE = "";
const annotator = `reviewer-${Math.random().toString(36).slice(2, 8)}`;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function draw(): void {
  const root = el("app");
  if (app.banner) {
    root.innerHTML = renderErrorBanner(app.banner.message, app.banner.retryable);
    return;
  }
  const editor = app.editor;
  if (!editor) {
    root.innerHTML = '<p class="loading">loading…</p>';
    return;
  }
  const payloadBroken = validateDraft(editor.snapshot.context, editor.snapshot.spans).length > 0;
  const pieces: string[] = [];
  pieces.push(
    `<header>${renderStatusLine(editor)} ` +
      `<span class="position">${app.position + 1}/${app.summaries.length}</span></header>`,
  );
  if (payloadBroken) {
    pieces.push(renderErrorBanner("sample payload is invalid; editing disabled", false));
    pieces.push(`<pre class="raw">${JSON.stringify(editor.snapshot, null, 2)}</pre>`);
  } else {
    pieces.push(`<div class="context">${renderContext(editor.context, editor.spans, editor.selected)}</div>`);
    pieces.push(renderQuestion(editor.question));
    pieces.push(renderSpanTable(editor.spans, editor.selected));
    pieces.push(renderViolations(editor.violations));
    pieces.push(
      `<footer><button id="save" ${canSave(editor) && !app.saving ? "" : "disabled"}>save</button>` +
        ' <span class="hint">n/p sample &#183; arrows span &#183; r relevance &#183; v validate &#183; s save</span></footer>',
    );
  }
  if (app.conflict && editor) {
    pieces.push(
      renderConflictDialog(
        diffAgainstServer(editor, app.conflict.server),
        app.conflict.actualRevision,
      ),
    );
  }
  root.innerHTML = pieces.join("\n");
}

function update(next: EditorState | null): void {
  app.editor = next;
  draw();
}

async function loadSample(position: number): Promise<void> {
  const summary = app.summaries[position];
  if (!summary) return;
  app.position = position;
  app.conflict = null;
  try {
    const sample = await getSample(BASE, summary.id);
    app.banner = null;
    update(initState(sample));
  } catch (err) {
    app.banner = { message: String(err), retryable: true };
    draw();
  }
}

async function boot(): Promise<void> {
  try {
    app.summaries = await listSamples(BASE);
    app.banner = null;
  } catch (err) {
    app.banner = { message: String(err), retryable: true };
    draw();
    return;
  }
  if (app.summaries.length === 0) {
    app.banner = { message: "the dataset has no samples", retryable: false };
    draw();
    return;
  }
  await loadSample(0);
}

async function save(): Promise<void> {
  const editor = app.editor;
  if (!editor || !canSave(editor) || app.saving) return;
  app.saving = true;
  draw();
  const result: SaveResult = await putSample(BASE, editor.snapshot.id, buildUpdate(editor), annotator);
  app.saving = false;
  if (result.kind === "saved") {
    await loadSample(app.position);
    return;
  }
  if (result.kind === "conflict") {
    try {
      const server = await getSample(BASE, editor.snapshot.id);
      app.conflict = { server, actualRevision: result.actualRevision };
    } catch (err) {
      app.banner = { message: String(err), retryable: true };
    }
    draw();
    return;
  }
  if (result.kind === "invalid") {
    update({
      ...editor,
      violations: result.violations.map((v) =>
        v.span_index === null ? v.message : `span ${v.span_index}: ${v.message}`,
      ),
    });
    return;
  }
  app.banner = { message: result.message, retryable: true };
  draw();
}

function onAction(target: HTMLElement): void {
  const editor = app.editor;
  const act = target.dataset.act;
  if (!act) return;
  if (act === "retry") {
    app.banner = null;
    void boot();
    return;
  }
  if (act === "take-server" && app.conflict) {
    app.conflict = null;
    void loadSample(app.position);
    return;
  }
  if (act === "keep-local" && app.conflict && editor) {
    // keep the local field values but rebase onto the server revision
    const rebased = initState(app.conflict.server);
    let next = rebased;
    if (editor.dirty.question) next = setQuestion(next, editor.question);
    if (editor.dirty.status) next = setStatus(next, editor.status);
    if (editor.dirty.spans) {
      next = {
        ...next,
        spans: editor.spans.map((s) => ({ ...s })),
        dirty: { ...next.dirty, spans: true },
        violations: validateDraft(next.context, editor.spans),
      };
    }
    app.conflict = null;
    update(next);
    return;
  }
  if (!editor) return;
  const index = Number(target.dataset.span ?? "-1");
  if (act === "toggle") update(toggleRelevance(selectSpan(editor, index), index));
  else if (act === "start-") update(adjustSpanBoundary(editor, index, "start", -1));
  else if (act === "start+") update(adjustSpanBoundary(editor, index, "start", 1));
  else if (act === "end-") update(adjustSpanBoundary(editor, index, "end", -1));
  else if (act === "end+") update(adjustSpanBoundary(editor, index, "end", 1));
}

function onKey(event: KeyboardEvent): void {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) {
    return;
  }
  const editor = app.editor;
  switch (event.key) {
    case "n":
      void loadSample(Math.min(app.position + 1, app.summaries.length - 1));
      break;
    case "p":
      void loadSample(Math.max(app.position - 1, 0));
      break;
    case "ArrowDown":
    case "ArrowRight":
      if (editor) update(selectNextSpan(editor, 1));
      break;
    case "ArrowUp":
    case "ArrowLeft":
      if (editor) update(selectNextSpan(editor, -1));
      break;
    case "r":
      if (editor && editor.selected >= 0) update(toggleRelevance(editor, editor.selected));
      break;
    case "v":
      if (editor) update(setStatus(editor, "validated"));
      break;
    case "s":
      void save();
      break;
    default:
      return;
  }
  event.preventDefault();
}

export function main(): void {
  document.addEventListener("click", (event) => {
    const target = event.target;
    if (target instanceof HTMLElement) {
      if (target.id === "save") void save();
      else onAction(target);
    }
  });
  document.addEventListener("change", (event) => {
    const target = event.target;
    const editor = app.editor;
    if (editor && target instanceof HTMLSelectElement && target.dataset.act === "type") {
      update(setSpanType(editor, Number(target.dataset.span), target.value));
    }
  });
  document.addEventListener("keydown", onKey);
  void boot();
}

main();
