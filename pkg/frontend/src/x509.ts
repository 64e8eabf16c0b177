/** Certificate and CSR handling, and construction of the proxy certificate
 * the user signs in the browser.  Only the fields this portal needs are
 * decoded; issuer/subject names and public keys are spliced between
 * structures as raw DER so encodings survive untouched. */

import {
  DerReader,
  TAG,
  concatBytes,
  contextTag,
  der,
  ecdsaDerToRaw,
  ecdsaRawToDer,
  encodeInteger,
  encodeOid,
  encodeUtcTime,
  readOidValue,
  readTime,
  sequenceReader,
} from "./asn1.js";
import { Dn, dnFromNameDer } from "./dn.js";

const OID_ECDSA_WITH_SHA256 = "1.2.840.10045.4.3.2";
const OID_SHA256_WITH_RSA = "1.2.840.113549.1.1.11";
const OID_EC_PUBLIC_KEY = "1.2.840.10045.2.1";
const OID_RSA_ENCRYPTION = "1.2.840.113549.1.1.1";
const OID_CURVE_P256 = "1.2.840.10045.3.1.7";
const OID_PROXY_CERT_INFO = "1.3.6.1.5.5.7.1.14";

/** RFC 3820 proxyCertInfo with the inherit-all policy language. */
const PROXY_POLICY_INHERIT_ALL = new Uint8Array([
  0x30, 0x0c, 0x30, 0x0a, 0x06, 0x08, 0x2b, 0x06, 0x01, 0x05, 0x05, 0x07, 0x15, 0x01,
]);

export type KeyAlgorithm = "ec-p256" | "rsa";

export interface CertificateInfo {
  der: Uint8Array;
  subject: Dn;
  issuer: Dn;
  subjectNameDer: Uint8Array;
  spkiDer: Uint8Array;
  serial: Uint8Array;
  notBefore: Date;
  notAfter: Date;
  keyAlgorithm: KeyAlgorithm;
}

export interface CsrInfo {
  der: Uint8Array;
  infoDer: Uint8Array; // certificationRequestInfo, the signed region
  subject: Dn;
  subjectNameDer: Uint8Array;
  spkiDer: Uint8Array;
  signatureAlgorithmOid: string;
  signature: Uint8Array;
  keyAlgorithm: KeyAlgorithm;
}

function spkiAlgorithm(spkiDer: Uint8Array): KeyAlgorithm {
  const spki = sequenceReader(new DerReader(spkiDer).read(TAG.SEQUENCE));
  const algorithm = sequenceReader(spki.read(TAG.SEQUENCE));
  const oid = readOidValue(algorithm.read(TAG.OID).value);
  if (oid === OID_EC_PUBLIC_KEY) {
    const curve = readOidValue(algorithm.read(TAG.OID).value);
    if (curve !== OID_CURVE_P256) throw new Error(`unsupported curve ${curve}`);
    return "ec-p256";
  }
  if (oid === OID_RSA_ENCRYPTION) return "rsa";
  throw new Error(`unsupported public key algorithm ${oid}`);
}

export function parseCertificate(certDer: Uint8Array): CertificateInfo {
  const certificate = sequenceReader(new DerReader(certDer).read(TAG.SEQUENCE));
  const tbs = sequenceReader(certificate.read(TAG.SEQUENCE));
  tbs.readOptional(contextTag(0)); // version
  const serial = tbs.read(TAG.INTEGER).value;
  tbs.read(TAG.SEQUENCE); // inner signature algorithm
  tbs.read(TAG.SEQUENCE); // issuer (decoded below from the raw)
  const validity = sequenceReader(tbs.read(TAG.SEQUENCE));
  const notBefore = readTime(validity.read());
  const notAfter = readTime(validity.read());
  const subjectTlv = tbs.read(TAG.SEQUENCE);
  const spkiTlv = tbs.read(TAG.SEQUENCE);

  // second pass for the issuer raw (kept simple: re-walk)
  const tbs2 = sequenceReader(sequenceReader(new DerReader(certDer).read(TAG.SEQUENCE)).read(TAG.SEQUENCE));
  tbs2.readOptional(contextTag(0));
  tbs2.read(TAG.INTEGER);
  tbs2.read(TAG.SEQUENCE);
  const issuerTlv = tbs2.read(TAG.SEQUENCE);

  return {
    der: certDer,
    subject: dnFromNameDer(subjectTlv),
    issuer: dnFromNameDer(issuerTlv),
    subjectNameDer: new Uint8Array(subjectTlv.raw),
    spkiDer: new Uint8Array(spkiTlv.raw),
    serial,
    notBefore,
    notAfter,
    keyAlgorithm: spkiAlgorithm(new Uint8Array(spkiTlv.raw)),
  };
}

export function parseCsr(csrDer: Uint8Array): CsrInfo {
  const request = sequenceReader(new DerReader(csrDer).read(TAG.SEQUENCE));
  const info = request.read(TAG.SEQUENCE);
  const algorithm = sequenceReader(request.read(TAG.SEQUENCE));
  const signatureAlgorithmOid = readOidValue(algorithm.read(TAG.OID).value);
  const signatureBits = request.read(TAG.BIT_STRING).value;
  if (signatureBits[0] !== 0) throw new Error("unsupported BIT STRING padding");

  const body = sequenceReader(info);
  body.read(TAG.INTEGER); // version
  const subjectTlv = body.read(TAG.SEQUENCE);
  const spkiTlv = body.read(TAG.SEQUENCE);

  return {
    der: csrDer,
    infoDer: new Uint8Array(info.raw),
    subject: dnFromNameDer(subjectTlv),
    subjectNameDer: new Uint8Array(subjectTlv.raw),
    spkiDer: new Uint8Array(spkiTlv.raw),
    signatureAlgorithmOid,
    signature: signatureBits.subarray(1),
    keyAlgorithm: spkiAlgorithm(new Uint8Array(spkiTlv.raw)),
  };
}

/** Check the CSR's proof of possession: its signature verifies under the
 * public key it carries. */
export async function verifyCsrSignature(csr: CsrInfo): Promise<boolean> {
  const subtle = crypto.subtle;
  if (csr.signatureAlgorithmOid === OID_ECDSA_WITH_SHA256) {
    const key = await subtle.importKey(
      "spki",
      csr.spkiDer as unknown as BufferSource,
      { name: "ECDSA", namedCurve: "P-256" },
      false,
      ["verify"],
    );
    return subtle.verify(
      { name: "ECDSA", hash: "SHA-256" },
      key,
      ecdsaDerToRaw(csr.signature) as unknown as BufferSource,
      csr.infoDer as unknown as BufferSource,
    );
  }
  if (csr.signatureAlgorithmOid === OID_SHA256_WITH_RSA) {
    const key = await subtle.importKey(
      "spki",
      csr.spkiDer as unknown as BufferSource,
      { name: "RSASSA-PKCS1-v1_5", hash: "SHA-256" },
      false,
      ["verify"],
    );
    return subtle.verify(
      "RSASSA-PKCS1-v1_5",
      key,
      csr.signature as unknown as BufferSource,
      csr.infoDer as unknown as BufferSource,
    );
  }
  throw new Error(`unsupported CSR signature algorithm ${csr.signatureAlgorithmOid}`);
}

function signatureAlgorithmIdentifier(algorithm: KeyAlgorithm): Uint8Array {
  if (algorithm === "ec-p256") {
    return der(TAG.SEQUENCE, encodeOid(OID_ECDSA_WITH_SHA256));
  }
  return der(TAG.SEQUENCE, encodeOid(OID_SHA256_WITH_RSA), der(TAG.NULL));
}

/** Build and sign the proxy certificate: subject and public key come from
 * the server's CSR, the issuer is the user certificate's subject, and the
 * user's own key signs.  Validity is clamped to the user certificate's. */
export async function buildProxyCertificate(
  csr: CsrInfo,
  userCert: CertificateInfo,
  userKey: CryptoKey,
  lifetimeSeconds: number,
): Promise<Uint8Array> {
  if (lifetimeSeconds <= 0) throw new Error("lifetime must be positive");
  const now = new Date(Math.floor(Date.now() / 1000) * 1000);
  if (now < userCert.notBefore || now > userCert.notAfter) {
    throw new Error("user certificate is not currently valid");
  }
  const notAfterMs = Math.min(now.getTime() + lifetimeSeconds * 1000, userCert.notAfter.getTime());

  const terminalCn = csr.subject.terminal()[1];
  const serial = /^[0-9]+$/.test(terminalCn)
    ? encodeInteger(parseInt(terminalCn, 10))
    : encodeInteger(Math.floor(Math.random() * 0x7fffffff));

  const extension = der(
    TAG.SEQUENCE,
    encodeOid(OID_PROXY_CERT_INFO),
    der(TAG.BOOLEAN, new Uint8Array([0xff])),
    der(TAG.OCTET_STRING, PROXY_POLICY_INHERIT_ALL),
  );
  const extensions = der(contextTag(3), der(TAG.SEQUENCE, extension));

  const algorithmIdentifier = signatureAlgorithmIdentifier(userCert.keyAlgorithm);
  const tbs = der(
    TAG.SEQUENCE,
    der(contextTag(0), encodeInteger(2)), // v3
    serial,
    algorithmIdentifier,
    userCert.subjectNameDer, // issuer = the user itself
    der(TAG.SEQUENCE, encodeUtcTime(now), encodeUtcTime(new Date(notAfterMs))),
    csr.subjectNameDer,
    csr.spkiDer,
    extensions,
  );

  let signature: Uint8Array;
  if (userCert.keyAlgorithm === "ec-p256") {
    const raw = new Uint8Array(
      await crypto.subtle.sign({ name: "ECDSA", hash: "SHA-256" }, userKey, tbs as unknown as BufferSource),
    );
    signature = ecdsaRawToDer(raw);
  } else {
    signature = new Uint8Array(
      await crypto.subtle.sign("RSASSA-PKCS1-v1_5", userKey, tbs as unknown as BufferSource),
    );
  }

  return der(
    TAG.SEQUENCE,
    tbs,
    algorithmIdentifier,
    der(TAG.BIT_STRING, concatBytes(new Uint8Array([0]), signature)),
  );
}
