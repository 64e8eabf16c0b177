/** End-to-end acceptance: import a test credential, delegate with in-browser
 * signing, submit, watch the row turn green, download the output — while
 * recording every outgoing request to prove no key material ever leaves. */

import { gunzipSync } from "node:zlib";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, DelegationError, NetworkRecorder } from "../src/api.js";
import { stateColor, toJobView } from "../src/colors.js";
import { validateJdl } from "../src/jdl.js";
import { importCredential } from "../src/pkcs12.js";
import { buildTarGz } from "../src/sandbox.js";
import { LiveGateway, keyNeedles, readFixture, scanTraffic, startGateway } from "./helpers.js";

let live: LiveGateway;

beforeAll(async () => {
  live = await startGateway();
}, 30000);

afterAll(() => {
  live?.stop();
});

const ECHO_JDL = `Executable = "run.sh";
StdOutput = "out.txt";
OutputSandbox = {"out.txt"};
`;

async function poll<T>(fn: () => Promise<T | undefined>, timeoutMs = 30000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const result = await fn();
    if (result !== undefined) return result;
    if (Date.now() > deadline) throw new Error("timed out waiting");
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

describe("browser delegation end to end", () => {
  it("imports, delegates, submits, sees the green row, downloads output — leak-free", async () => {
    const { fixtures } = live;
    const recorder = new NetworkRecorder();
    const client = new ApiClient(fixtures.gateway_url!, recorder);

    // 1. import: in memory only
    const credential = await importCredential(readFixture(fixtures.p12), fixtures.passphrase);
    expect(credential.certificate.subject.toString()).toBe(fixtures.subject_dn);

    // 2. delegate with in-browser signing
    const editor = validateJdl(ECHO_JDL);
    expect(editor.ok).toBe(true);
    const ack = await client.delegate(credential);
    expect(client.token).toBeTruthy();
    expect(ack.proxy_fingerprint).toMatch(/^[0-9a-f]{64}$/);

    // 3. submit with a sandbox built in the page
    const script = new TextEncoder().encode('#!/bin/sh\necho "hello from the browser"\n');
    const archive = await buildTarGz([["run.sh", script]]);
    const { job_ids } = await client.submit(ECHO_JDL, archive);
    expect(job_ids).toHaveLength(1);

    // 4. the monitor row turns green DONE_OK
    const greenRow = await poll(async () => {
      const rows = (await client.jobs()).map(toJobView);
      const row = rows.find((r) => r.id === job_ids[0]);
      expect(row).toBeDefined();
      expect(row!.color).toBe(stateColor(row!.state)); // colors always match the lookup
      if (row!.state === "ABORTED" || row!.state === "DONE_FAILED") {
        throw new Error(`job failed: ${row!.state}`);
      }
      return row!.state === "DONE_OK" ? row : undefined;
    });
    expect(greenRow.color).toBe("green");
    expect(greenRow.downloadable).toBe(true);

    // 5. output retrieval
    const outputArchive = await client.jobOutput(job_ids[0]);
    const tar = gunzipSync(Buffer.from(outputArchive));
    expect(tar.includes(Buffer.from("hello from the browser"))).toBe(true);
    const cleared = await client.jobStatus(job_ids[0]);
    expect(cleared.state).toBe("CLEARED");
    expect(stateColor(cleared.state)).toBe("gray");

    // 6. the recorded traffic carries no key material in any encoding
    const keyPem = readFileSync(join(fixtures.dir, "alice-key.pem"), "utf-8");
    const p12Bytes = readFixture(fixtures.p12);
    const needles = keyNeedles(keyPem, [p12Bytes]);
    const hits = scanTraffic(recorder.outboundBlob(), needles);
    expect(hits).toEqual([]);
    expect(recorder.requests.length).toBeGreaterThanOrEqual(4);
  }, 60000);

  it("aborts visibly when the service tries a DN substitution", async () => {
    const { fixtures } = live;
    const credential = await importCredential(readFixture(fixtures.p12), fixtures.passphrase);

    // a tampering middlebox: swap the CSR reply for a well-formed CSR naming
    // a foreign subject (proof-of-possession intact, so the subject check is
    // what must fire)
    const originalFetch = fetch;
    const foreignCsr = readFileSync(fixtures.foreign_csr!, "utf-8");
    const tampering: typeof fetch = async (input, init) => {
      const response = await originalFetch(input, init);
      if (String(input).endsWith("/delegate")) {
        const frame = new Uint8Array(await response.arrayBuffer());
        const doc = JSON.parse(new TextDecoder().decode(frame.subarray(4)));
        if (doc.type === "csr-reply") {
          doc.csr_pem = foreignCsr;
          const payload = new TextEncoder().encode(JSON.stringify(doc));
          const out = new Uint8Array(4 + payload.length);
          new DataView(out.buffer).setUint32(0, payload.length, false);
          out.set(payload, 4);
          return new Response(out, { status: 200, headers: response.headers });
        }
        return new Response(frame, { status: response.status, headers: response.headers });
      }
      return response;
    };

    const client = new ApiClient(fixtures.gateway_url!, new NetworkRecorder(), tampering);
    let failure: unknown;
    try {
      await client.delegate(credential);
    } catch (error) {
      failure = error;
    }
    expect(failure).toBeInstanceOf(DelegationError);
    expect((failure as DelegationError).code).toBe("substitution-attack");
  }, 30000);
});
