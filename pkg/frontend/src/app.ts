/** Single-page portal wiring.  The credential lives only in this module's
 * closure as a non-extractable CryptoKey; reloading the page discards it. */

import { ApiClient } from "./api.js";
import { TERMINAL_STATES, toJobView } from "./colors.js";
import { validateJdl } from "./jdl.js";
import { CredentialImportError, ImportedCredential, importCredential } from "./pkcs12.js";
import { buildTarGz } from "./sandbox.js";

const POLL_INTERVAL_MS = 2000;

const DEFAULT_JDL = `Executable = "run.sh";
Arguments = "";
StdOutput = "out.txt";
OutputSandbox = {"out.txt"};
`;

let credential: ImportedCredential | null = null;
let client: ApiClient | null = null;
let pollTimer: number | null = null;
let pollInFlight = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setText(id: string, text: string, className?: string): void {
  const node = el(id);
  node.textContent = text;
  if (className !== undefined) node.className = className;
}

function gatewayUrl(): string {
  const typed = el<HTMLInputElement>("gateway-url").value.trim();
  return typed || window.location.origin;
}

// -- credential import ---------------------------------------------------------

async function onImport(): Promise<void> {
  const fileInput = el<HTMLInputElement>("p12-file");
  const passphrase = el<HTMLInputElement>("p12-passphrase").value;
  const file = fileInput.files?.[0];
  if (!file) {
    setText("import-status", "choose a .p12 file first", "status error");
    return;
  }
  try {
    const bytes = new Uint8Array(await file.arrayBuffer());
    credential = await importCredential(bytes, passphrase);
    const dn = credential.certificate.subject.toString();
    setText("import-status", `credential loaded: ${dn}`, "status ok");
    el<HTMLButtonElement>("delegate-button").disabled = false;
  } catch (error) {
    credential = null;
    el<HTMLButtonElement>("delegate-button").disabled = true;
    const message = error instanceof CredentialImportError ? error.message : String(error);
    setText("import-status", message, "status error");
  }
}

// -- delegation ------------------------------------------------------------------

async function onDelegate(): Promise<void> {
  if (!credential) return;
  const button = el<HTMLButtonElement>("delegate-button");
  button.disabled = true;
  try {
    client = new ApiClient(gatewayUrl());
    const ack = await client.delegate(credential);
    setText(
      "delegate-status",
      `delegated until ${ack.not_after} (fingerprint ${ack.proxy_fingerprint.slice(0, 16)}…)`,
      "status ok",
    );
    el<HTMLButtonElement>("submit-button").disabled = !validateEditor();
    startPolling();
  } catch (error) {
    client = null;
    setText("delegate-status", `delegation failed: ${error}`, "status error");
  } finally {
    button.disabled = false;
  }
}

// -- editor ------------------------------------------------------------------------

function validateEditor(): boolean {
  const text = el<HTMLTextAreaElement>("jdl-editor").value;
  const result = validateJdl(text);
  const box = el("jdl-diagnostics");
  box.replaceChildren();
  for (const diagnostic of result.diagnostics) {
    const line = document.createElement("div");
    line.className = "diagnostic";
    line.textContent = `line ${diagnostic.line}, col ${diagnostic.column}: ${diagnostic.message}`;
    box.appendChild(line);
  }
  if (result.ok) {
    const line = document.createElement("div");
    line.className = "diagnostic ok";
    line.textContent = "job description is valid";
    box.appendChild(line);
  }
  el<HTMLButtonElement>("submit-button").disabled = !(result.ok && client?.token);
  return result.ok;
}

// -- submission --------------------------------------------------------------------

async function onSubmit(): Promise<void> {
  if (!client) return;
  const jdl = el<HTMLTextAreaElement>("jdl-editor").value;
  const files = el<HTMLInputElement>("input-files").files;
  try {
    let archive: Uint8Array | undefined;
    if (files && files.length > 0) {
      const entries: Array<[string, Uint8Array]> = [];
      for (const file of Array.from(files)) {
        entries.push([file.name, new Uint8Array(await file.arrayBuffer())]);
      }
      archive = await buildTarGz(entries);
    }
    const result = await client.submit(jdl, archive);
    setText("submit-status", `submitted ${result.job_ids.length} job(s)`, "status ok");
    refreshJobs();
  } catch (error) {
    setText("submit-status", `submission failed: ${error}`, "status error");
  }
}

// -- monitor -----------------------------------------------------------------------

function startPolling(): void {
  if (pollTimer !== null) return;
  refreshJobs();
  pollTimer = window.setInterval(refreshJobs, POLL_INTERVAL_MS);
}

async function refreshJobs(): Promise<void> {
  if (!client?.token || pollInFlight) return;
  pollInFlight = true;
  try {
    renderRows(await client.jobs());
  } catch {
    // transient polling errors stay silent; the next tick retries
  } finally {
    pollInFlight = false;
  }
}

function renderRows(jobs: Parameters<typeof toJobView>[0][]): void {
  const tbody = el("job-rows");
  tbody.replaceChildren();
  for (const job of jobs) {
    const view = toJobView(job);
    const row = document.createElement("tr");
    row.className = `job-row color-${view.color}`;
    row.dataset.state = view.state;
    row.dataset.jobId = view.id;

    const cells = [view.shortId, view.state, view.submittedAt, view.lastUpdate];
    for (const text of cells) {
      const cell = document.createElement("td");
      cell.textContent = text;
      row.appendChild(cell);
    }
    const actions = document.createElement("td");
    if (view.downloadable) {
      const download = document.createElement("button");
      download.textContent = "download output";
      download.addEventListener("click", () => onDownload(view.id));
      actions.appendChild(download);
    }
    if (!TERMINAL_STATES.includes(view.state)) {
      const cancel = document.createElement("button");
      cancel.textContent = "cancel";
      cancel.addEventListener("click", () => client?.cancel(view.id).then(refreshJobs));
      actions.appendChild(cancel);
    }
    row.appendChild(actions);
    tbody.appendChild(row);
  }
}

async function onDownload(jobId: string): Promise<void> {
  if (!client) return;
  try {
    const archive = await client.jobOutput(jobId);
    const blob = new Blob([archive as unknown as BlobPart], { type: "application/gzip" });
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = `${jobId.split("/").pop()}-output.tar.gz`;
    anchor.click();
    URL.revokeObjectURL(anchor.href);
    refreshJobs();
  } catch (error) {
    setText("submit-status", `download failed: ${error}`, "status error");
  }
}

// -- bootstrap ---------------------------------------------------------------------

export function start(): void {
  el<HTMLTextAreaElement>("jdl-editor").value = DEFAULT_JDL;
  el("import-button").addEventListener("click", onImport);
  el("delegate-button").addEventListener("click", onDelegate);
  el("submit-button").addEventListener("click", onSubmit);
  el<HTMLTextAreaElement>("jdl-editor").addEventListener("input", validateEditor);
  validateEditor();
}

if (typeof document !== "undefined" && document.getElementById("p12-file")) {
  start();
}
