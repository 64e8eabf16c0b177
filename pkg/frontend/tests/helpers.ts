import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

const SUPPORT = fileURLToPath(new URL("support.py", import.meta.url));

export interface Fixtures {
  dir: string;
  p12: string;
  passphrase: string;
  subject_dn: string;
  csr: string;
  foreign_csr?: string;
  gateway_url?: string;
}

export function makeFixtures(): Fixtures {
  const dir = mkdtempSync(join(tmpdir(), "lgrid-web-"));
  const out = execFileSync("python3", [SUPPORT, "fixtures", dir], { encoding: "utf-8" });
  return JSON.parse(out.trim().split("\n").pop()!);
}

export interface LiveGateway {
  fixtures: Fixtures;
  stop: () => void;
}

export function startGateway(): Promise<LiveGateway> {
  const dir = mkdtempSync(join(tmpdir(), "lgrid-web-"));
  const child: ChildProcess = spawn("python3", [SUPPORT, "serve", dir], {
    stdio: ["pipe", "pipe", "inherit"],
  });
  return new Promise((resolve, reject) => {
    let buffer = "";
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const newline = buffer.indexOf("\n");
      if (newline >= 0) {
        const fixtures: Fixtures = JSON.parse(buffer.slice(0, newline));
        resolve({
          fixtures,
          stop: () => {
            child.stdin!.end();
            child.kill();
          },
        });
      }
    });
    child.on("error", reject);
    child.on("exit", (code) => {
      if (buffer.indexOf("\n") < 0) reject(new Error(`gateway exited early (${code})`));
    });
  });
}

export function readFixture(path: string): Uint8Array {
  return new Uint8Array(readFileSync(path));
}

export function validateProxyWithPython(dir: string): { ok: boolean; violations: string[] } {
  const out = execFileSync("python3", [SUPPORT, "validate-proxy", dir], { encoding: "utf-8" });
  return JSON.parse(out.trim());
}

/** the scan needles a leak of `keyPem` could appear as */
export function keyNeedles(keyPem: string, extra: Uint8Array[] = []): Uint8Array[] {
  const encoder = new TextEncoder();
  const body = keyPem.replace(/-----[^-]+-----/g, "").replace(/\s+/g, "");
  const der = Uint8Array.from(Buffer.from(body, "base64"));
  return [
    encoder.encode(keyPem),
    encoder.encode(body),
    der,
    ...extra.flatMap((bytes) => [bytes, encoder.encode(Buffer.from(bytes).toString("base64"))]),
  ];
}

export function containsNeedle(haystack: Uint8Array, needle: Uint8Array): boolean {
  if (needle.length === 0) return false;
  outer: for (let i = 0; i + needle.length <= haystack.length; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (haystack[i + j] !== needle[j]) continue outer;
    }
    return true;
  }
  return false;
}

export function scanTraffic(blob: Uint8Array, needles: Uint8Array[]): string[] {
  const text = Buffer.from(blob).toString("latin1");
  const variants = [
    blob,
    Uint8Array.from(Buffer.from(text.replaceAll("\\n", "\n"), "latin1")),
    Uint8Array.from(Buffer.from(text.replace(/\s+/g, ""), "latin1")),
  ];
  const hits: string[] = [];
  needles.forEach((needle, index) => {
    const stripped = Uint8Array.from(
      Buffer.from(Buffer.from(needle).toString("latin1").replace(/\s+/g, ""), "latin1"),
    );
    for (const variant of variants) {
      if (containsNeedle(variant, needle) || containsNeedle(variant, stripped)) {
        hits.push(`needle #${index} (${needle.length} bytes) found in traffic`);
        break;
      }
    }
  });
  return hits;
}
