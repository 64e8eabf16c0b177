import { describe, expect, it } from "vitest";

import {
  DerReader,
  TAG,
  der,
  derToPem,
  ecdsaDerToRaw,
  ecdsaRawToDer,
  encodeInteger,
  encodeOid,
  encodeUtcTime,
  pemToDer,
  readIntegerAsNumber,
  readOidValue,
  readTime,
  sequenceReader,
} from "../src/asn1.js";

describe("DER primitives", () => {
  it("round-trips OIDs", () => {
    for (const oid of ["1.2.840.113549.1.7.1", "2.16.840.1.101.3.4.1.42", "1.3.6.1.5.5.7.1.14"]) {
      const encoded = encodeOid(oid);
      const tlv = new DerReader(encoded).read(TAG.OID);
      expect(readOidValue(tlv.value)).toBe(oid);
    }
  });

  it("round-trips integers including high-bit padding", () => {
    for (const n of [0, 1, 127, 128, 255, 256, 65535, 2147483647]) {
      const tlv = new DerReader(encodeInteger(n)).read(TAG.INTEGER);
      expect(readIntegerAsNumber(tlv)).toBe(n);
    }
  });

  it("handles long-form lengths", () => {
    const big = new Uint8Array(300).fill(0xab);
    const encoded = der(TAG.OCTET_STRING, big);
    const tlv = new DerReader(encoded).read(TAG.OCTET_STRING);
    expect(tlv.value.length).toBe(300);
    expect(tlv.value[0]).toBe(0xab);
  });

  it("walks nested sequences", () => {
    const inner = der(TAG.SEQUENCE, encodeInteger(7), encodeOid("1.2.3"));
    const outer = der(TAG.SEQUENCE, inner, encodeInteger(9));
    const reader = sequenceReader(new DerReader(outer).read(TAG.SEQUENCE));
    const innerReader = sequenceReader(reader.read(TAG.SEQUENCE));
    expect(readIntegerAsNumber(innerReader.read(TAG.INTEGER))).toBe(7);
    expect(readIntegerAsNumber(reader.read(TAG.INTEGER))).toBe(9);
  });

  it("round-trips UTCTime", () => {
    const date = new Date("2031-05-04T03:02:01Z");
    const tlv = new DerReader(encodeUtcTime(date)).read(TAG.UTC_TIME);
    expect(readTime(tlv).getTime()).toBe(date.getTime());
  });

  it("converts ECDSA signatures between raw and DER", () => {
    const raw = new Uint8Array(64);
    raw[0] = 0x80; // r with the high bit set needs a padding byte in DER
    raw[31] = 0x01;
    raw[63] = 0x02;
    const derSig = ecdsaRawToDer(raw);
    expect(ecdsaDerToRaw(derSig)).toEqual(raw);
  });

  it("round-trips PEM", () => {
    const payload = new Uint8Array(100).map((_v, i) => i & 0xff);
    const pem = derToPem(payload, "CERTIFICATE");
    expect(pemToDer(pem, "CERTIFICATE")).toEqual(payload);
  });
});
