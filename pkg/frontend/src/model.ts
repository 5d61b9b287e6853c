/**
 * Editor state for one sample under review.
 *
 * All functions are pure: they take a state and return a new one, so
 * every transition is unit-testable without a DOM. Span text is always
 * derived from the context slice when boundaries move; nothing in here
 * ever locates a span by searching for its text.
 */

export const PII_TYPES = [
  "occupation",
  "health",
  "demographic",
  "finance",
  "age",
  "education",
  "location",
  "organization",
  "relationship",
  "sexual orientation",
  "belief",
  "name",
  "code",
  "datetime",
  "appearance",
] as const;

export type PiiTypeName = (typeof PII_TYPES)[number];

export interface SpanRecord {
  text: string;
  start: number;
  end: number;
  type: string;
  relevance: number;
}

export interface SampleRecord {
  id: string;
  context: string;
  question: string;
  spans: SpanRecord[];
  provenance: string;
  status: string;
  revision: number;
}

export interface DirtyFlags {
  context: boolean;
  question: boolean;
  spans: boolean;
  status: boolean;
}

export interface EditorState {
  snapshot: SampleRecord;
  context: string;
  question: string;
  spans: SpanRecord[];
  status: string;
  dirty: DirtyFlags;
  selected: number;
  violations: string[];
}

export interface UpdatePayload {
  expected_revision: number;
  new_context?: string;
  new_question?: string;
  new_spans?: SpanRecord[];
  new_status?: string;
}

const NO_DIRT: DirtyFlags = { context: false, question: false, spans: false, status: false };

export function validateDraft(context: string, spans: SpanRecord[]): string[] {
  const problems: string[] = [];
  spans.forEach((span, i) => {
    if (!(0 <= span.start && span.start < span.end && span.end <= context.length)) {
      problems.push(`span ${i}: offsets [${span.start}, ${span.end}) out of range`);
      return;
    }
    if (context.slice(span.start, span.end) !== span.text) {
      problems.push(`span ${i}: text no longer matches the context slice; adjust its boundaries`);
    }
    if (span.relevance !== 0 && span.relevance !== 1) {
      problems.push(`span ${i}: relevance must be 0 or 1`);
    }
  });
  const order = [...spans].sort((a, b) => a.start - b.start || a.end - b.end);
  for (let i = 1; i < order.length; i++) {
    const prev = order[i - 1]!;
    if (order[i]!.start < prev.end) {
      problems.push(`spans overlap near offset ${order[i]!.start}`);
      break;
    }
  }
  return problems;
}

export function initState(sample: SampleRecord): EditorState {
  return {
    snapshot: sample,
    context: sample.context,
    question: sample.question,
    spans: sample.spans.map((s) => ({ ...s })),
    status: sample.status,
    dirty: { ...NO_DIRT },
    selected: sample.spans.length > 0 ? 0 : -1,
    violations: validateDraft(sample.context, sample.spans),
  };
}

function withSpans(state: EditorState, spans: SpanRecord[]): EditorState {
  return {
    ...state,
    spans,
    dirty: { ...state.dirty, spans: true },
    violations: validateDraft(state.context, spans),
  };
}

export function toggleRelevance(state: EditorState, index: number): EditorState {
  const span = state.spans[index];
  if (span === undefined) return state;
  const spans = state.spans.map((s, i) =>
    i === index ? { ...s, relevance: s.relevance === 1 ? 0 : 1 } : s,
  );
  return withSpans(state, spans);
}

export function setSpanType(state: EditorState, index: number, type: string): EditorState {
  if (state.spans[index] === undefined) return state;
  return withSpans(
    state,
    state.spans.map((s, i) => (i === index ? { ...s, type } : s)),
  );
}

/**
 * Move one boundary of one span by a character delta. The span's text is
 * re-derived from the context slice; offsets are the source of truth.
 */
export function adjustSpanBoundary(
  state: EditorState,
  index: number,
  edge: "start" | "end",
  delta: number,
): EditorState {
  const span = state.spans[index];
  if (span === undefined) return state;
  const start = edge === "start" ? span.start + delta : span.start;
  const end = edge === "end" ? span.end + delta : span.end;
  const text =
    0 <= start && start < end && end <= state.context.length
      ? state.context.slice(start, end)
      : span.text;
  const spans = state.spans.map((s, i) => (i === index ? { ...s, start, end, text } : s));
  return withSpans(state, spans);
}

export function setQuestion(state: EditorState, question: string): EditorState {
  return { ...state, question, dirty: { ...state.dirty, question: true } };
}

/**
 * Context edits never move spans. Any span whose slice stops matching
 * is flagged as a violation and must be fixed manually before saving.
 */
export function setContext(state: EditorState, context: string): EditorState {
  return {
    ...state,
    context,
    dirty: { ...state.dirty, context: true },
    violations: validateDraft(context, state.spans),
  };
}

export function setStatus(state: EditorState, status: string): EditorState {
  return { ...state, status, dirty: { ...state.dirty, status: true } };
}

export function selectSpan(state: EditorState, index: number): EditorState {
  if (index < -1 || index >= state.spans.length) return state;
  return { ...state, selected: index };
}

export function selectNextSpan(state: EditorState, step: 1 | -1): EditorState {
  if (state.spans.length === 0) return state;
  const next = (state.selected + step + state.spans.length) % state.spans.length;
  return { ...state, selected: next };
}

export function isDirty(state: EditorState): boolean {
  return state.dirty.context || state.dirty.question || state.dirty.spans || state.dirty.status;
}

export function canSave(state: EditorState): boolean {
  return isDirty(state) && state.violations.length === 0;
}

export function buildUpdate(state: EditorState): UpdatePayload {
  const payload: UpdatePayload = { expected_revision: state.snapshot.revision };
  if (state.dirty.context) payload.new_context = state.context;
  if (state.dirty.question) payload.new_question = state.question;
  if (state.dirty.spans) payload.new_spans = state.spans.map((s) => ({ ...s }));
  if (state.dirty.status) payload.new_status = state.status;
  return payload;
}

export interface FieldDiff {
  field: string;
  server: string;
  local: string;
}

/** Per-field comparison shown in the conflict dialog. */
export function diffAgainstServer(state: EditorState, server: SampleRecord): FieldDiff[] {
  const diffs: FieldDiff[] = [];
  if (state.dirty.context && server.context !== state.context) {
    diffs.push({ field: "context", server: server.context, local: state.context });
  }
  if (state.dirty.question && server.question !== state.question) {
    diffs.push({ field: "question", server: server.question, local: state.question });
  }
  if (state.dirty.status && server.status !== state.status) {
    diffs.push({ field: "status", server: server.status, local: state.status });
  }
  if (state.dirty.spans) {
    const serverSpans = JSON.stringify(server.spans);
    const localSpans = JSON.stringify(state.spans);
    if (serverSpans !== localSpans) {
      diffs.push({ field: "spans", server: serverSpans, local: localSpans });
    }
  }
  return diffs;
}
