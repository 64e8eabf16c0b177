/** JDL validation for the editor: `Attribute = value ;` statements with
 * strings, integers, booleans, brace lists, bracketed sub-descriptors and
 * verbatim expressions.  Produces line/column diagnostics; the gateway's
 * parser remains the authority at submission time. */

export interface Diagnostic {
  line: number;
  column: number;
  message: string;
}

export interface ValidationResult {
  ok: boolean;
  diagnostics: Diagnostic[];
  attributes: Map<string, string>; // lower-cased name -> raw value text
}

class Scanner {
  pos = 0;

  constructor(public readonly text: string) {}

  position(at = this.pos): { line: number; column: number } {
    let line = 1;
    let lineStart = 0;
    for (let i = 0; i < at && i < this.text.length; i++) {
      if (this.text[i] === "\n") {
        line++;
        lineStart = i + 1;
      }
    }
    return { line, column: at - lineStart + 1 };
  }

  skipBlank(): void {
    while (this.pos < this.text.length) {
      const ch = this.text[this.pos];
      if (ch === " " || ch === "\t" || ch === "\r" || ch === "\n") {
        this.pos++;
      } else if (ch === "#" || this.text.startsWith("//", this.pos)) {
        const nl = this.text.indexOf("\n", this.pos);
        this.pos = nl < 0 ? this.text.length : nl + 1;
      } else {
        return;
      }
    }
  }

  atEnd(): boolean {
    this.skipBlank();
    return this.pos >= this.text.length;
  }
}

function fail(scanner: Scanner, at: number, message: string): Diagnostic {
  const { line, column } = scanner.position(at);
  return { line, column, message };
}

function scanString(scanner: Scanner): string | null {
  const start = scanner.pos;
  scanner.pos++;
  while (scanner.pos < scanner.text.length) {
    const ch = scanner.text[scanner.pos];
    if (ch === "\\") scanner.pos += 2;
    else if (ch === '"') {
      scanner.pos++;
      return scanner.text.slice(start, scanner.pos);
    } else scanner.pos++;
  }
  return null;
}

/** capture raw value text up to an unnested terminator */
function scanValue(scanner: Scanner, terminators: string): { raw: string; error?: string } {
  scanner.skipBlank();
  const start = scanner.pos;
  let depth = 0;
  while (scanner.pos < scanner.text.length) {
    const ch = scanner.text[scanner.pos];
    if (ch === '"') {
      if (scanString(scanner) === null) return { raw: "", error: "unterminated string" };
      continue;
    }
    if (ch === "#" || scanner.text.startsWith("//", scanner.pos)) {
      const nl = scanner.text.indexOf("\n", scanner.pos);
      scanner.pos = nl < 0 ? scanner.text.length : nl + 1;
      continue;
    }
    if ("{[(".includes(ch)) depth++;
    else if ("}])".includes(ch)) {
      if (depth === 0 && terminators.includes(ch)) return { raw: scanner.text.slice(start, scanner.pos) };
      depth--;
      if (depth < 0) return { raw: "", error: `unbalanced '${ch}'` };
    } else if (depth === 0 && terminators.includes(ch)) {
      return { raw: scanner.text.slice(start, scanner.pos) };
    }
    scanner.pos++;
  }
  return { raw: "", error: "unterminated statement (missing ';')" };
}

export function validateJdl(text: string): ValidationResult {
  const diagnostics: Diagnostic[] = [];
  const attributes = new Map<string, string>();
  const scanner = new Scanner(text);

  if (!text.trim()) {
    diagnostics.push({ line: 1, column: 1, message: "empty job description" });
    return { ok: false, diagnostics, attributes };
  }

  while (!scanner.atEnd()) {
    const nameStart = scanner.pos;
    const match = /^[A-Za-z_][A-Za-z0-9_.]*/.exec(scanner.text.slice(scanner.pos));
    if (!match) {
      diagnostics.push(fail(scanner, nameStart, "expected an attribute name"));
      break;
    }
    const name = match[0];
    scanner.pos += name.length;
    scanner.skipBlank();
    if (scanner.text[scanner.pos] !== "=") {
      diagnostics.push(fail(scanner, scanner.pos, `expected '=' after ${name}`));
      break;
    }
    scanner.pos++;
    const valueAt = scanner.pos;
    const { raw, error } = scanValue(scanner, ";");
    if (error) {
      diagnostics.push(fail(scanner, valueAt, error));
      break;
    }
    if (!raw.trim()) {
      diagnostics.push(fail(scanner, valueAt, `empty value for ${name}`));
      break;
    }
    scanner.skipBlank();
    if (scanner.text[scanner.pos] !== ";") {
      diagnostics.push(fail(scanner, scanner.pos, "expected ';'"));
      break;
    }
    scanner.pos++;
    attributes.set(name.toLowerCase(), raw.trim());
  }

  if (diagnostics.length === 0) {
    const type = attributes.get("type") ?? "";
    const isCollection = /^"collection"$/i.test(type);
    if (isCollection) {
      if (!attributes.has("nodes")) {
        diagnostics.push({ line: 1, column: 1, message: "a collection needs a Nodes list" });
      }
      if (attributes.has("executable")) {
        diagnostics.push({ line: 1, column: 1, message: "a collection must not carry a top-level Executable" });
      }
    } else {
      if (!attributes.has("executable")) {
        diagnostics.push({ line: 1, column: 1, message: "missing mandatory Executable attribute" });
      }
      const jobType = attributes.get("jobtype") ?? "";
      if (/^"parametric"$/i.test(jobType) && !attributes.has("parameters")) {
        diagnostics.push({ line: 1, column: 1, message: "a parametric job needs a Parameters attribute" });
      }
    }
  }

  return { ok: diagnostics.length === 0, diagnostics, attributes };
}
