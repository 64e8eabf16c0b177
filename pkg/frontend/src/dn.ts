/** Distinguished names in the slash-separated one-line form, mirrored from
 * the gateway's canonical grammar. */

import { DerReader, sequenceReader, readOidValue, TAG, Tlv } from "./asn1.js";

export type Rdn = [attribute: string, value: string];

const OID_TO_ATTR: Record<string, string> = {
  "2.5.4.6": "C",
  "2.5.4.10": "O",
  "2.5.4.11": "OU",
  "2.5.4.3": "CN",
  "2.5.4.7": "L",
  "2.5.4.8": "ST",
  "0.9.2342.19200300.100.1.25": "DC",
  "1.2.840.113549.1.9.1": "emailAddress",
};

export class Dn {
  constructor(public readonly rdns: Rdn[]) {
    if (rdns.length === 0) throw new Error("a DN needs at least one RDN");
  }

  toString(): string {
    return this.rdns
      .map(([attr, value]) => `/${attr}=${value.replaceAll("\\", "\\\\").replaceAll("/", "\\/")}`)
      .join("");
  }

  equals(other: Dn): boolean {
    return (
      this.rdns.length === other.rdns.length &&
      this.rdns.every(([a, v], i) => other.rdns[i][0] === a && other.rdns[i][1] === v)
    );
  }

  terminal(): Rdn {
    return this.rdns[this.rdns.length - 1];
  }

  /** true iff `this` is `base` plus exactly one additional terminal CN */
  extendsByOneCn(base: Dn): boolean {
    if (this.rdns.length !== base.rdns.length + 1) return false;
    if (this.terminal()[0] !== "CN") return false;
    return base.rdns.every(([a, v], i) => this.rdns[i][0] === a && this.rdns[i][1] === v);
  }
}

/** Decode an X.501 Name (RDNSequence) from its DER SEQUENCE value. */
export function dnFromNameDer(name: Tlv | Uint8Array): Dn {
  const outer = name instanceof Uint8Array ? new DerReader(name).read(TAG.SEQUENCE) : name;
  const rdns: Rdn[] = [];
  const seq = sequenceReader(outer);
  while (!seq.atEnd()) {
    const set = seq.read(TAG.SET);
    const atv = sequenceReader(sequenceReader(set).read(TAG.SEQUENCE));
    const oid = readOidValue(atv.read(TAG.OID).value);
    const valueTlv = atv.read();
    const attr = OID_TO_ATTR[oid];
    if (!attr) throw new Error(`unsupported name attribute OID ${oid}`);
    rdns.push([attr, new TextDecoder().decode(valueTlv.value)]);
  }
  return new Dn(rdns);
}
