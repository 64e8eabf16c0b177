/** Delegation wire messages: 4-byte big-endian length prefix + JSON with a
 * "type" field.  Mirrors the gateway's codec. */

export interface InitMessage {
  type: "init";
  subject_dn: string;
  user_cert_pem: string | null;
}

export interface CsrReplyMessage {
  type: "csr-reply";
  session_id: string;
  csr_pem: string;
}

export interface SignedProxyMessage {
  type: "signed-proxy";
  session_id: string;
  proxy_cert_pem: string;
}

export interface AckMessage {
  type: "ack";
  session_id: string;
  proxy_fingerprint: string;
  not_after: string;
}

export interface FaultMessage {
  type: "fault";
  code: string;
  detail: string;
}

export type DelegationMessage =
  | InitMessage
  | CsrReplyMessage
  | SignedProxyMessage
  | AckMessage
  | FaultMessage;

export function encodeFrame(message: DelegationMessage): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(message));
  const frame = new Uint8Array(4 + payload.length);
  new DataView(frame.buffer).setUint32(0, payload.length, false);
  frame.set(payload, 4);
  return frame;
}

export function decodeFrame(frame: Uint8Array): DelegationMessage {
  if (frame.length < 4) throw new Error("frame shorter than its length prefix");
  const length = new DataView(frame.buffer, frame.byteOffset).getUint32(0, false);
  if (frame.length !== 4 + length) {
    throw new Error(`frame length mismatch: prefix says ${length}, got ${frame.length - 4}`);
  }
  const doc = JSON.parse(new TextDecoder().decode(frame.subarray(4)));
  if (!doc || typeof doc.type !== "string") throw new Error("frame payload is not a tagged message");
  return doc as DelegationMessage;
}
