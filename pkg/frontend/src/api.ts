/** Gateway API client.  Every outgoing request body is recorded so tests
 * can prove no key material ever crosses the network. */

import { derToPem } from "./asn1.js";
import { ApiJob } from "./colors.js";
import { ImportedCredential } from "./pkcs12.js";
import { buildProxyCertificate, parseCsr, verifyCsrSignature } from "./x509.js";
import { AckMessage, decodeFrame, encodeFrame } from "./wire.js";

export interface RecordedRequest {
  method: string;
  url: string;
  body: Uint8Array;
}

export class NetworkRecorder {
  requests: RecordedRequest[] = [];

  record(method: string, url: string, body: Uint8Array | undefined): void {
    this.requests.push({ method, url, body: body ?? new Uint8Array(0) });
  }

  /** concatenation of every byte this client ever sent (bodies + URLs) */
  outboundBlob(): Uint8Array {
    const encoder = new TextEncoder();
    const parts: Uint8Array[] = [];
    for (const request of this.requests) {
      parts.push(encoder.encode(`${request.method} ${request.url}\n`));
      parts.push(request.body);
      parts.push(encoder.encode("\n"));
    }
    const total = parts.reduce((n, p) => n + p.length, 0);
    const out = new Uint8Array(total);
    let at = 0;
    for (const part of parts) {
      out.set(part, at);
      at += part.length;
    }
    return out;
  }
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly reason: string,
    detail = "",
  ) {
    super(detail ? `${status} ${reason}: ${detail}` : `${status} ${reason}`);
  }
}

export class DelegationError extends Error {
  constructor(
    public readonly code: string,
    detail = "",
  ) {
    super(detail ? `${code}: ${detail}` : code);
  }
}

export class ApiClient {
  token: string | null = null;

  constructor(
    public readonly baseUrl: string,
    public readonly recorder: NetworkRecorder = new NetworkRecorder(),
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: Uint8Array,
    contentType?: string,
  ): Promise<Response> {
    const url = this.baseUrl + path;
    this.recorder.record(method, url, body);
    const headers: Record<string, string> = {};
    if (contentType) headers["Content-Type"] = contentType;
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return this.fetchImpl(url, {
      method,
      headers,
      body: body ? (body as unknown as BodyInit) : undefined,
    });
  }

  private async json<T>(response: Response): Promise<T> {
    const text = await response.text();
    const doc = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, doc.error ?? "error", doc.detail ?? "");
    }
    return doc as T;
  }

  async ping(): Promise<void> {
    await this.json(await this.request("GET", "/ping"));
  }

  /** The delegation handshake with in-browser signing: receive the CSR,
   * verify it extends our own DN, sign the proxy locally, send it back.
   * The private key is used through WebCrypto only; it has no serialized
   * form anywhere in this flow. */
  async delegate(credential: ImportedCredential, lifetimeSeconds = 12 * 3600): Promise<AckMessage> {
    const ownDn = credential.certificate.subject;
    const initFrame = encodeFrame({
      type: "init",
      subject_dn: ownDn.toString(),
      user_cert_pem: derToPem(credential.certificate.der, "CERTIFICATE"),
    });
    const initResponse = await this.request(
      "POST",
      "/delegate",
      initFrame,
      "application/octet-stream",
    );
    const reply = decodeFrame(new Uint8Array(await initResponse.arrayBuffer()));
    if (reply.type === "fault") throw new DelegationError(reply.code, reply.detail);
    if (reply.type !== "csr-reply") throw new DelegationError("protocol-error", `unexpected ${reply.type}`);

    const csr = parseCsr(pemBodyToDer(reply.csr_pem));
    if (!(await verifyCsrSignature(csr))) {
      throw new DelegationError("bad-csr", "CSR proof-of-possession does not verify");
    }
    if (!csr.subject.extendsByOneCn(ownDn)) {
      throw new DelegationError(
        "substitution-attack",
        `service asked to sign ${csr.subject}, which does not extend ${ownDn}`,
      );
    }

    const proxyDer = await buildProxyCertificate(
      csr,
      credential.certificate,
      credential.key,
      lifetimeSeconds,
    );
    const signedFrame = encodeFrame({
      type: "signed-proxy",
      session_id: reply.session_id,
      proxy_cert_pem: derToPem(proxyDer, "CERTIFICATE"),
    });
    const finalResponse = await this.request(
      "POST",
      "/delegate",
      signedFrame,
      "application/octet-stream",
    );
    const token = finalResponse.headers.get("X-LGRID-Token");
    const final = decodeFrame(new Uint8Array(await finalResponse.arrayBuffer()));
    if (final.type === "fault") throw new DelegationError(final.code, final.detail);
    if (final.type !== "ack") throw new DelegationError("protocol-error", `unexpected ${final.type}`);
    if (token) this.token = token;
    return final;
  }

  async submit(jdl: string, inputArchive?: Uint8Array): Promise<{ job_ids: string[] }> {
    const boundary = "lgrid" + crypto.getRandomValues(new Uint8Array(12)).reduce((s, b) => s + b.toString(16).padStart(2, "0"), "");
    const encoder = new TextEncoder();
    const parts: Uint8Array[] = [
      encoder.encode(
        `--${boundary}\r\nContent-Disposition: form-data; name="jdl"\r\nContent-Type: text/plain\r\n\r\n`,
      ),
      encoder.encode(jdl),
      encoder.encode("\r\n"),
    ];
    if (inputArchive) {
      parts.push(
        encoder.encode(
          `--${boundary}\r\nContent-Disposition: form-data; name="input"; filename="input"\r\nContent-Type: application/gzip\r\n\r\n`,
        ),
      );
      parts.push(inputArchive);
      parts.push(encoder.encode("\r\n"));
    }
    parts.push(encoder.encode(`--${boundary}--\r\n`));
    const total = parts.reduce((n, p) => n + p.length, 0);
    const body = new Uint8Array(total);
    let at = 0;
    for (const part of parts) {
      body.set(part, at);
      at += part.length;
    }
    const response = await this.request(
      "POST",
      "/jobs",
      body,
      `multipart/form-data; boundary=${boundary}`,
    );
    return this.json(response);
  }

  async jobs(): Promise<ApiJob[]> {
    return this.json(await this.request("GET", "/jobs"));
  }

  async jobStatus(jobId: string): Promise<ApiJob & { history: unknown[] }> {
    return this.json(await this.request("GET", `/jobs/${uuidOf(jobId)}`));
  }

  async jobOutput(jobId: string): Promise<Uint8Array> {
    const response = await this.request("GET", `/jobs/${uuidOf(jobId)}/output`);
    if (!response.ok) {
      const doc = await response.json().catch(() => ({}));
      throw new ApiError(response.status, (doc as any).error ?? "error", (doc as any).detail ?? "");
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  async cancel(jobId: string): Promise<ApiJob> {
    return this.json(await this.request("DELETE", `/jobs/${uuidOf(jobId)}`));
  }
}

export function uuidOf(jobId: string): string {
  return jobId.split("/").pop() ?? jobId;
}

function pemBodyToDer(pem: string): Uint8Array {
  const body = pem.replace(/-----[^-]+-----/g, "").replace(/\s+/g, "");
  const binary = atob(body);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
