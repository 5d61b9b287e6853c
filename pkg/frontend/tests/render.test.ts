import { describe, expect, it } from "vitest";
import { initState, setQuestion, SampleRecord, SpanRecord } from "../src/model.js";
import {
  escapeHtml,
  renderConflictDialog,
  renderContext,
  renderErrorBanner,
  renderQuestion,
  renderSpanTable,
  renderStatusLine,
  renderViolations,
} from "../src/render.js";

// Worked review example: a first-person story with six marked spans,
// two question-relevant (the job and the condition) and four not.
const STORY_CONTEXT =
  "So here's my story: I'm 34 and spend my days as a preschool teacher, " +
  "which I totally love! I live with a cognitive development disorder, but " +
  "honestly, I make it work. My $36,500 annually keeps me living pretty " +
  "comfortably, thank you very much. I snagged my Associate's Degree before " +
  "diving into the world of tiny humans and finger paint, and oh yeah, I'm " +
  "heterosexual.";
const STORY_QUESTION = "How can my issues affect my daily responsibilities?";
const STORY_MARKS: { text: string; type: string; relevance: number }[] = [
  { text: "34", type: "age", relevance: 0 },
  { text: "preschool teacher", type: "occupation", relevance: 1 },
  { text: "cognitive development disorder", type: "health", relevance: 1 },
  { text: "$36,500 annually", type: "finance", relevance: 0 },
  { text: "Associate's Degree", type: "education", relevance: 0 },
  { text: "heterosexual", type: "sexual orientation", relevance: 0 },
];

function storySpans(): SpanRecord[] {
  return STORY_MARKS.map((m) => {
    const start = STORY_CONTEXT.indexOf(m.text);
    const span = { ...m, start, end: start + m.text.length };
    if (STORY_CONTEXT.slice(span.start, span.end) !== m.text) {
      throw new Error(`fixture span broken: ${m.text}`);
    }
    return span;
  });
}

describe("renderContext on the worked example", () => {
  const html = renderContext(STORY_CONTEXT, storySpans());

  it("marks the job and the condition as high relevance", () => {
    expect(html).toContain('<mark class="pii-high" data-span="1">preschool teacher</mark>');
    expect(html).toContain(
      '<mark class="pii-high" data-span="2">cognitive development disorder</mark>',
    );
  });

  it("marks age, salary, degree and orientation as low relevance", () => {
    for (const text of ["34", "$36,500 annually", "Associate's Degree", "heterosexual"]) {
      const at = html.indexOf(`>${text}</mark>`);
      expect(at).toBeGreaterThan(-1);
      expect(html.slice(Math.max(0, at - 60), at)).toContain("pii-low");
    }
    expect(html.match(/pii-high/g)).toHaveLength(2);
    expect(html.match(/pii-low/g)).toHaveLength(4);
  });

  it("preserves the full text around the marks", () => {
    const stripped = html.replace(/<\/?mark[^>]*>/g, "");
    expect(stripped).toBe(escapeHtml(STORY_CONTEXT));
  });

  it("shows the question", () => {
    expect(renderQuestion(STORY_QUESTION)).toBe(
      '<p class="question">How can my issues affect my daily responsibilities?</p>',
    );
  });
});

describe("renderContext edge cases", () => {
  it("renders a sample with zero spans as plain escaped text", () => {
    const html = renderContext("No secrets here. 1 < 2.", []);
    expect(html).toBe("No secrets here. 1 &lt; 2.");
    expect(html).not.toContain("<mark");
  });

  it("escapes markup inside and outside spans", () => {
    const ctx = '<b>bold</b> says "Ann & Co"';
    const spans = [{ text: '"Ann & Co"', start: 17, end: 27, type: "organization", relevance: 0 }];
    expect(ctx.slice(17, 27)).toBe('"Ann & Co"');
    const html = renderContext(ctx, spans);
    expect(html).toContain("&lt;b&gt;bold&lt;/b&gt;");
    expect(html).toContain("&quot;Ann &amp; Co&quot;</mark>");
  });

  it("throws on overlapping spans instead of rendering them", () => {
    const spans = [
      { text: "ab", start: 0, end: 2, type: "name", relevance: 0 },
      { text: "bc", start: 1, end: 3, type: "name", relevance: 0 },
    ];
    expect(() => renderContext("abcd", spans)).toThrow(/does not fit/);
  });

  it("flags the selected span", () => {
    const spans = [{ text: "ab", start: 0, end: 2, type: "name", relevance: 1 }];
    expect(renderContext("abcd", spans, 0)).toContain('class="pii-high selected"');
  });
});

describe("renderSpanTable", () => {
  it("shows a notice instead of an empty table", () => {
    expect(renderSpanTable([], -1)).toBe('<p class="no-spans">no spans</p>');
  });

  it("gives every span a type dropdown over all 15 types and a relevance toggle", () => {
    const html = renderSpanTable(storySpans(), 1);
    expect(html.match(/<select/g)).toHaveLength(6);
    expect(html.match(/<option/g)).toHaveLength(6 * 15);
    expect(html).toContain('<option value="occupation" selected>');
    expect(html.match(/data-act="toggle"/g)).toHaveLength(6);
    expect(html).toContain('<tr class="selected" data-span="1">');
    expect(html).toContain(">high</button>");
    expect(html).toContain(">low</button>");
  });
});

describe("chrome fragments", () => {
  it("violations list escapes and enumerates", () => {
    expect(renderViolations([])).toBe("");
    const html = renderViolations(["span 0: text <bad>"]);
    expect(html).toBe('<ul class="violations"><li>span 0: text &lt;bad&gt;</li></ul>');
  });

  it("error banner offers retry only when retryable", () => {
    expect(renderErrorBanner("load failed", true)).toContain('data-act="retry"');
    expect(renderErrorBanner("broken payload", false)).not.toContain("retry");
  });

  it("conflict dialog shows both versions and both choices", () => {
    const html = renderConflictDialog(
      [{ field: "question", server: "their text", local: "my text" }],
      5,
    );
    expect(html).toContain("someone else saved first");
    expect(html).toContain("revision 5");
    expect(html).toContain('<td class="server">their text</td>');
    expect(html).toContain('<td class="local">my text</td>');
    expect(html).toContain('data-act="take-server"');
    expect(html).toContain('data-act="keep-local"');
  });

  it("status line carries id, revision and a dirty marker", () => {
    const sample: SampleRecord = {
      id: "rv-0009",
      context: "c",
      question: "q",
      spans: [],
      provenance: "other",
      status: "raw",
      revision: 2,
    };
    const clean = renderStatusLine(initState(sample));
    expect(clean).toContain("rv-0009");
    expect(clean).toContain("rev 2");
    expect(clean).not.toContain("*");
    expect(renderStatusLine(setQuestion(initState(sample), "new"))).toContain("*");
  });
});
