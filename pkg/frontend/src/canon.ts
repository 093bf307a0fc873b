// Canonical JSON writer: keys sorted by code point, no whitespace, numbers
// rendered the way ECMAScript String(x) prints them. Any two conforming
// writers produce byte-identical text for the same document, which is what
// the golden frame fixtures pin down.

export const MAX_EXACT_INT = 2 ** 53;

export class CanonError extends Error {}

/** Render one finite number; both zeros print as "0". */
export function canonNumber(x: number): string {
  if (!Number.isFinite(x)) {
    throw new CanonError(`non-finite number ${x}`);
  }
  // String(-0) is already "0"; the branch just makes the rule explicit
  return x === 0 ? "0" : String(x);
}

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

export function dumpsCanonical(value: unknown): string {
  const out: string[] = [];
  writeValue(value, out);
  return out.join("");
}

// Default Array.sort compares UTF-16 code units, which disagrees with
// code-point order past the BMP; sort the way a byte-oriented peer would.
function byCodePoint(a: string, b: string): number {
  let i = 0;
  let j = 0;
  while (i < a.length && j < b.length) {
    const ca = a.codePointAt(i)!;
    const cb = b.codePointAt(j)!;
    if (ca !== cb) return ca - cb;
    i += ca > 0xffff ? 2 : 1;
    j += cb > 0xffff ? 2 : 1;
  }
  return a.length - i - (b.length - j);
}

function writeValue(value: unknown, out: string[]): void {
  if (value === null) {
    out.push("null");
    return;
  }
  switch (typeof value) {
    case "boolean":
      out.push(value ? "true" : "false");
      return;
    case "number":
      out.push(canonNumber(value));
      return;
    case "string":
      out.push(JSON.stringify(value));
      return;
  }
  if (Array.isArray(value)) {
    out.push("[");
    for (let i = 0; i < value.length; i++) {
      if (i) out.push(",");
      writeValue(value[i], out);
    }
    out.push("]");
    return;
  }
  if (typeof value === "object") {
    const doc = value as Record<string, unknown>;
    const keys = Object.keys(doc).sort(byCodePoint);
    out.push("{");
    for (let i = 0; i < keys.length; i++) {
      if (i) out.push(",");
      out.push(JSON.stringify(keys[i]), ":");
      writeValue(doc[keys[i]], out);
    }
    out.push("}");
    return;
  }
  throw new CanonError(`cannot serialize ${typeof value}`);
}
