/** Mirrored span classifier for editor highlighting.
 *
 * Same rules as the server's tokenizer: `Let` / `Suppose that` /
 * `Prove that` at line-leading positions are keywords, dollar-delimited
 * regions are math, top-level `.`/`,`/`;` are punctuation, everything else
 * is text. `\$` is a literal dollar. Offsets are JS string indices (all
 * delimiters are ASCII, so spans still tile the content for any input).
 * An unterminated math span renders as math to the end of the document
 * rather than erroring: half-typed input is normal in an editor.
 */

export type SpanKind = "keyword" | "math" | "text" | "punctuation";

export interface HighlightSpan {
  start: number;
  end: number;
  kind: SpanKind;
}

const KEYWORDS = ["Suppose that", "Prove that", "Let"];
const PUNCTUATION = new Set([".", ",", ";"]);

function isLineLeading(source: string, pos: number): boolean {
  for (let i = pos - 1; i >= 0; i--) {
    const ch = source[i];
    if (ch === "\n") return true;
    if (ch !== " " && ch !== "\t" && ch !== "\r") return false;
  }
  return true;
}

function keywordAt(source: string, pos: number): string | null {
  for (const kw of KEYWORDS) {
    if (source.startsWith(kw, pos)) {
      const after = source[pos + kw.length];
      if (after === undefined || /\s/.test(after)) return kw;
    }
  }
  return null;
}

export function classify(source: string): HighlightSpan[] {
  const marks: HighlightSpan[] = [];
  let i = 0;
  let mathStart = -1;
  while (i < source.length) {
    const ch = source[i];
    if (ch === "\\" && i + 1 < source.length) {
      i += 2;
      continue;
    }
    if (ch === "$") {
      if (mathStart >= 0) {
        marks.push({ start: mathStart, end: i + 1, kind: "math" });
        mathStart = -1;
      } else {
        mathStart = i;
      }
      i += 1;
      continue;
    }
    if (mathStart < 0) {
      if (PUNCTUATION.has(ch!)) {
        marks.push({ start: i, end: i + 1, kind: "punctuation" });
      } else if (isLineLeading(source, i)) {
        const kw = keywordAt(source, i);
        if (kw !== null) {
          marks.push({ start: i, end: i + kw.length, kind: "keyword" });
          i += kw.length;
          continue;
        }
      }
    }
    i += 1;
  }
  if (mathStart >= 0) {
    marks.push({ start: mathStart, end: source.length, kind: "math" });
  }

  const spans: HighlightSpan[] = [];
  let pos = 0;
  for (const mark of marks) {
    if (mark.start > pos) spans.push({ start: pos, end: mark.start, kind: "text" });
    spans.push(mark);
    pos = mark.end;
  }
  if (pos < source.length) {
    spans.push({ start: pos, end: source.length, kind: "text" });
  }
  return spans;
}

/** Render the classified spans as highlight-overlay HTML. */
export function toHtml(source: string, spans: HighlightSpan[]): string {
  const escape = (s: string) =>
    s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  return spans
    .map((span) => {
      const piece = escape(source.slice(span.start, span.end));
      return span.kind === "text"
        ? piece
        : `<span class="tok-${span.kind}">${piece}</span>`;
    })
    .join("");
}
