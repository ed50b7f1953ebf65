/** Segment model for act-tagged responses.
 *
 * A tagged response is a concatenation of `<X>text</X>` spans, one per
 * sentence-ish segment, where X is one of the four act tags. The editor
 * only ever moves boundaries or swaps tags, so the covered text is an
 * invariant of every operation.
 */

export const ACT_TAGS = ["I", "Q", "D", "C"] as const;
export type ActTag = (typeof ACT_TAGS)[number];

export const ACT_NAMES: Record<ActTag, string> = {
  I: "inform",
  Q: "question",
  D: "directive",
  C: "commissive",
};

export interface Segment {
  tag: ActTag;
  text: string;
}

export class TagParseError extends Error {
  constructor(message: string, readonly offset: number) {
    super(message);
  }
}

export function parseTagged(tagged: string): Segment[] {
  const segments: Segment[] = [];
  let i = 0;
  while (i < tagged.length) {
    if (tagged[i] !== "<") {
      throw new TagParseError(`stray text outside tags at offset ${i}`, i);
    }
    const endOpen = tagged.indexOf(">", i);
    if (endOpen < 0) throw new TagParseError(`unterminated tag at offset ${i}`, i);
    const tag = tagged.slice(i + 1, endOpen);
    if (!(ACT_TAGS as readonly string[]).includes(tag)) {
      throw new TagParseError(`unknown tag ${tag} at offset ${i}`, i);
    }
    const closer = `</${tag}>`;
    const close = tagged.indexOf(closer, endOpen + 1);
    if (close < 0) throw new TagParseError(`missing ${closer}`, i);
    const text = tagged.slice(endOpen + 1, close);
    const nested = text.indexOf("<");
    if (nested >= 0) {
      throw new TagParseError(`tag inside <${tag}> at offset ${endOpen + 1 + nested}`, endOpen + 1 + nested);
    }
    segments.push({ tag: tag as ActTag, text });
    i = close + closer.length;
  }
  return segments;
}

export function serializeTagged(segments: readonly Segment[]): string {
  return segments.map((s) => `<${s.tag}>${s.text}</${s.tag}>`).join("");
}

/** Starting point when the service offers no pretagging. */
export function defaultSegments(text: string): Segment[] {
  return [{ tag: "I", text }];
}

export function coveredText(segments: readonly Segment[]): string {
  return segments.map((s) => s.text).join("");
}

export function retag(segments: readonly Segment[], index: number, tag: ActTag): Segment[] {
  const next = segments.slice();
  next[index] = { tag, text: segments[index].text };
  return next;
}

/** Insert a boundary inside segment `index` after `offset` characters. */
export function splitSegment(segments: readonly Segment[], index: number, offset: number): Segment[] {
  const { tag, text } = segments[index];
  if (!(offset > 0 && offset < text.length)) return segments.slice();
  const next = segments.slice();
  next.splice(index, 1, { tag, text: text.slice(0, offset) }, { tag, text: text.slice(offset) });
  return next;
}

/** Delete the boundary after segment `index`; the left tag wins. */
export function mergeWithNext(segments: readonly Segment[], index: number): Segment[] {
  if (index < 0 || index >= segments.length - 1) return segments.slice();
  const next = segments.slice();
  next.splice(index, 2, { tag: segments[index].tag, text: segments[index].text + segments[index + 1].text });
  return next;
}
