/** Minimal DER reader/writer: just enough ASN.1 for certificates, CSRs and
 * PKCS#12 containers. All functions throw Asn1Error on malformed input. */

export class Asn1Error extends Error {}

export const TAG = {
  BOOLEAN: 0x01,
  INTEGER: 0x02,
  BIT_STRING: 0x03,
  OCTET_STRING: 0x04,
  NULL: 0x05,
  OID: 0x06,
  UTF8_STRING: 0x0c,
  SEQUENCE: 0x30,
  SET: 0x31,
  PRINTABLE_STRING: 0x13,
  T61_STRING: 0x14,
  IA5_STRING: 0x16,
  UTC_TIME: 0x17,
  GENERALIZED_TIME: 0x18,
} as const;

export function contextTag(num: number, constructed = true): number {
  return 0x80 | (constructed ? 0x20 : 0) | num;
}

export interface Tlv {
  tag: number;
  value: Uint8Array;
  /** full encoding including tag and length */
  raw: Uint8Array;
}

export class DerReader {
  private offset = 0;

  constructor(private readonly bytes: Uint8Array) {}

  atEnd(): boolean {
    return this.offset >= this.bytes.length;
  }

  peekTag(): number {
    if (this.atEnd()) throw new Asn1Error("unexpected end of DER input");
    return this.bytes[this.offset];
  }

  read(expectedTag?: number): Tlv {
    if (this.atEnd()) throw new Asn1Error("unexpected end of DER input");
    const start = this.offset;
    const tag = this.bytes[this.offset++];
    if (expectedTag !== undefined && tag !== expectedTag) {
      throw new Asn1Error(
        `expected tag 0x${expectedTag.toString(16)}, found 0x${tag.toString(16)} at ${start}`,
      );
    }
    if (this.offset >= this.bytes.length) throw new Asn1Error("truncated length");
    let lengthByte = this.bytes[this.offset++];
    let length = 0;
    if (lengthByte < 0x80) {
      length = lengthByte;
    } else {
      const count = lengthByte & 0x7f;
      if (count === 0 || count > 4) throw new Asn1Error(`unsupported length of length ${count}`);
      for (let i = 0; i < count; i++) {
        if (this.offset >= this.bytes.length) throw new Asn1Error("truncated length");
        length = length * 256 + this.bytes[this.offset++];
      }
    }
    if (this.offset + length > this.bytes.length) throw new Asn1Error("value overruns input");
    const value = this.bytes.subarray(this.offset, this.offset + length);
    this.offset += length;
    return { tag, value, raw: this.bytes.subarray(start, this.offset) };
  }

  /** read an OPTIONAL element with the given tag; undefined when absent */
  readOptional(tag: number): Tlv | undefined {
    if (!this.atEnd() && this.peekTag() === tag) return this.read(tag);
    return undefined;
  }
}

export function sequenceReader(tlv: Tlv | Uint8Array): DerReader {
  const bytes = tlv instanceof Uint8Array ? tlv : tlv.value;
  return new DerReader(bytes);
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

export function der(tag: number, ...contents: Uint8Array[]): Uint8Array {
  const body = concatBytes(...contents);
  let header: number[];
  if (body.length < 0x80) {
    header = [tag, body.length];
  } else {
    const lengthBytes: number[] = [];
    let n = body.length;
    while (n > 0) {
      lengthBytes.unshift(n & 0xff);
      n >>>= 8;
    }
    header = [tag, 0x80 | lengthBytes.length, ...lengthBytes];
  }
  return concatBytes(new Uint8Array(header), body);
}

export function readOidValue(value: Uint8Array): string {
  if (value.length === 0) throw new Asn1Error("empty OID");
  const parts: number[] = [];
  const first = value[0];
  parts.push(Math.min(2, Math.floor(first / 40)));
  parts.push(parts[0] === 2 ? first - 80 : first % 40);
  let acc = 0;
  for (let i = 1; i < value.length; i++) {
    acc = acc * 128 + (value[i] & 0x7f);
    if ((value[i] & 0x80) === 0) {
      parts.push(acc);
      acc = 0;
    }
  }
  return parts.join(".");
}

export function encodeOid(dotted: string): Uint8Array {
  const parts = dotted.split(".").map((p) => parseInt(p, 10));
  if (parts.length < 2 || parts.some((p) => Number.isNaN(p))) {
    throw new Asn1Error(`bad OID ${dotted}`);
  }
  const body: number[] = [parts[0] * 40 + parts[1]];
  for (const part of parts.slice(2)) {
    const septets: number[] = [];
    let n = part;
    do {
      septets.unshift(n & 0x7f);
      n = Math.floor(n / 128);
    } while (n > 0);
    for (let i = 0; i < septets.length - 1; i++) septets[i] |= 0x80;
    body.push(...septets);
  }
  return der(TAG.OID, new Uint8Array(body));
}

export function readIntegerAsNumber(tlv: Tlv): number {
  if (tlv.value.length > 6) throw new Asn1Error("integer too large for a JS number");
  let n = 0;
  for (const byte of tlv.value) n = n * 256 + byte;
  return n;
}

export function encodeInteger(n: number): Uint8Array {
  if (!Number.isInteger(n) || n < 0) throw new Asn1Error("only non-negative integers supported");
  const bytes: number[] = [];
  let v = n;
  do {
    bytes.unshift(v & 0xff);
    v = Math.floor(v / 256);
  } while (v > 0);
  if (bytes[0] & 0x80) bytes.unshift(0); // keep it positive
  return der(TAG.INTEGER, new Uint8Array(bytes));
}

export function readTime(tlv: Tlv): Date {
  const text = new TextDecoder().decode(tlv.value);
  let iso: string;
  if (tlv.tag === TAG.UTC_TIME) {
    const year = parseInt(text.slice(0, 2), 10);
    const century = year >= 50 ? "19" : "20";
    iso = `${century}${text.slice(0, 2)}-${text.slice(2, 4)}-${text.slice(4, 6)}T${text.slice(6, 8)}:${text.slice(8, 10)}:${text.slice(10, 12)}Z`;
  } else if (tlv.tag === TAG.GENERALIZED_TIME) {
    iso = `${text.slice(0, 4)}-${text.slice(4, 6)}-${text.slice(6, 8)}T${text.slice(8, 10)}:${text.slice(10, 12)}:${text.slice(12, 14)}Z`;
  } else {
    throw new Asn1Error(`not a time tag: 0x${tlv.tag.toString(16)}`);
  }
  const date = new Date(iso);
  if (Number.isNaN(date.getTime())) throw new Asn1Error(`unparseable time ${text}`);
  return date;
}

export function encodeUtcTime(date: Date): Uint8Array {
  const pad = (n: number) => String(n).padStart(2, "0");
  const text =
    pad(date.getUTCFullYear() % 100) +
    pad(date.getUTCMonth() + 1) +
    pad(date.getUTCDate()) +
    pad(date.getUTCHours()) +
    pad(date.getUTCMinutes()) +
    pad(date.getUTCSeconds()) +
    "Z";
  return der(TAG.UTC_TIME, new TextEncoder().encode(text));
}

/** ECDSA signature: WebCrypto raw r||s  ->  DER SEQUENCE { INTEGER r, INTEGER s } */
export function ecdsaRawToDer(raw: Uint8Array): Uint8Array {
  if (raw.length % 2 !== 0) throw new Asn1Error("odd raw ECDSA signature length");
  const half = raw.length / 2;
  const toInt = (bytes: Uint8Array) => {
    let start = 0;
    while (start < bytes.length - 1 && bytes[start] === 0) start++;
    let trimmed = bytes.subarray(start);
    if (trimmed[0] & 0x80) trimmed = concatBytes(new Uint8Array([0]), trimmed);
    return der(TAG.INTEGER, trimmed);
  };
  return der(TAG.SEQUENCE, toInt(raw.subarray(0, half)), toInt(raw.subarray(half)));
}

/** ECDSA signature: DER  ->  fixed-size raw r||s for WebCrypto */
export function ecdsaDerToRaw(derSig: Uint8Array, size = 32): Uint8Array {
  const seq = new DerReader(derSig).read(TAG.SEQUENCE);
  const inner = sequenceReader(seq);
  const r = inner.read(TAG.INTEGER).value;
  const s = inner.read(TAG.INTEGER).value;
  const out = new Uint8Array(size * 2);
  const put = (bytes: Uint8Array, at: number) => {
    let trimmed = bytes;
    while (trimmed.length > size && trimmed[0] === 0) trimmed = trimmed.subarray(1);
    if (trimmed.length > size) throw new Asn1Error("ECDSA integer wider than curve size");
    out.set(trimmed, at + size - trimmed.length);
  };
  put(r, 0);
  put(s, size);
  return out;
}

export function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) if (a[i] !== b[i]) return false;
  return true;
}

export function toBase64(bytes: Uint8Array): string {
  let binary = "";
  for (const byte of bytes) binary += String.fromCharCode(byte);
  return btoa(binary);
}

export function fromBase64(text: string): Uint8Array {
  const binary = atob(text.replace(/\s+/g, ""));
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

export function pemToDer(pem: string, label?: string): Uint8Array {
  const match = pem.match(/-----BEGIN ([^-]+)-----([\s\S]*?)-----END \1-----/);
  if (!match) throw new Asn1Error("no PEM block found");
  if (label && match[1] !== label) throw new Asn1Error(`expected ${label}, found ${match[1]}`);
  return fromBase64(match[2]);
}

export function derToPem(derBytes: Uint8Array, label: string): string {
  const b64 = toBase64(derBytes);
  const lines = b64.match(/.{1,64}/g) ?? [];
  return `-----BEGIN ${label}-----\n${lines.join("\n")}\n-----END ${label}-----\n`;
}
