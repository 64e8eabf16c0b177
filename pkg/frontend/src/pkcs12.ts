/** PKCS#12 credential import, entirely in memory via WebCrypto.
 *
 * Supports the modern PBES2 profile (PBKDF2 with SHA-1/256/384/512 and
 * AES-CBC) and SHA-1/SHA-256 integrity MACs.  Legacy RC2/3DES containers
 * are rejected with a pointer to re-export; WebCrypto cannot decrypt them.
 * Nothing here ever persists or transmits the key: the caller gets a
 * non-extractable CryptoKey plus display metadata.
 */

import {
  DerReader,
  TAG,
  Tlv,
  bytesEqual,
  concatBytes,
  contextTag,
  readIntegerAsNumber,
  readOidValue,
  sequenceReader,
} from "./asn1.js";
import { CertificateInfo, KeyAlgorithm, parseCertificate } from "./x509.js";

const OID = {
  data: "1.2.840.113549.1.7.1",
  encryptedData: "1.2.840.113549.1.7.6",
  pbes2: "1.2.840.113549.1.5.13",
  pbkdf2: "1.2.840.113549.1.5.12",
  hmacSha1: "1.2.840.113549.2.7",
  hmacSha256: "1.2.840.113549.2.9",
  hmacSha384: "1.2.840.113549.2.10",
  hmacSha512: "1.2.840.113549.2.11",
  aes128cbc: "2.16.840.1.101.3.4.1.2",
  aes192cbc: "2.16.840.1.101.3.4.1.22",
  aes256cbc: "2.16.840.1.101.3.4.1.42",
  keyBag: "1.2.840.113549.1.12.10.1.1",
  shroudedKeyBag: "1.2.840.113549.1.12.10.1.2",
  certBag: "1.2.840.113549.1.12.10.1.3",
  x509Certificate: "1.2.840.113549.1.9.22.1",
  sha1: "1.3.14.3.2.26",
  sha256: "2.16.840.1.101.3.4.2.1",
  ecPublicKey: "1.2.840.10045.2.1",
  rsaEncryption: "1.2.840.113549.1.1.1",
} as const;

export class CredentialImportError extends Error {}

export interface ImportedCredential {
  /** signing key, non-extractable, held only in memory */
  key: CryptoKey;
  keyAlgorithm: KeyAlgorithm;
  certificate: CertificateInfo;
  certificatePem: Uint8Array; // DER actually travels; kept for Init payloads
}

const toBuf = (u8: Uint8Array) => u8 as unknown as BufferSource;

// ---------------------------------------------------------------------------
// PKCS#12 key derivation (RFC 7292 appendix B) for the integrity MAC

function bmpString(password: string): Uint8Array {
  const out = new Uint8Array(password.length * 2 + 2);
  for (let i = 0; i < password.length; i++) {
    const code = password.charCodeAt(i);
    out[2 * i] = code >> 8;
    out[2 * i + 1] = code & 0xff;
  }
  return out;
}

async function pkcs12Kdf(
  hash: "SHA-1" | "SHA-256",
  password: string,
  salt: Uint8Array,
  iterations: number,
  idByte: number,
  length: number,
): Promise<Uint8Array> {
  const u = hash === "SHA-1" ? 20 : 32;
  const v = 64;
  if (length > u) {
    throw new CredentialImportError("unsupported MAC key length for the PKCS#12 KDF");
  }
  const repeatToMultiple = (source: Uint8Array) => {
    if (source.length === 0) return new Uint8Array(0);
    const total = v * Math.ceil(source.length / v);
    const out = new Uint8Array(total);
    for (let i = 0; i < total; i++) out[i] = source[i % source.length];
    return out;
  };
  const d = new Uint8Array(v).fill(idByte);
  const i = concatBytes(repeatToMultiple(salt), repeatToMultiple(bmpString(password)));
  let a = concatBytes(d, i);
  for (let round = 0; round < iterations; round++) {
    a = new Uint8Array(await crypto.subtle.digest(hash, toBuf(a)));
  }
  return a.subarray(0, length);
}

// ---------------------------------------------------------------------------
// PBES2

interface AlgorithmIdentifier {
  oid: string;
  params?: Tlv;
}

function readAlgorithmIdentifier(reader: DerReader): AlgorithmIdentifier {
  const seq = sequenceReader(reader.read(TAG.SEQUENCE));
  const oid = readOidValue(seq.read(TAG.OID).value);
  const params = seq.atEnd() ? undefined : seq.read();
  return { oid, params };
}

function prfHash(oid: string): string {
  switch (oid) {
    case OID.hmacSha1:
      return "SHA-1";
    case OID.hmacSha256:
      return "SHA-256";
    case OID.hmacSha384:
      return "SHA-384";
    case OID.hmacSha512:
      return "SHA-512";
    default:
      throw new CredentialImportError(`unsupported PBKDF2 PRF ${oid}`);
  }
}

function aesKeyLength(oid: string): number {
  switch (oid) {
    case OID.aes128cbc:
      return 16;
    case OID.aes192cbc:
      return 24;
    case OID.aes256cbc:
      return 32;
    default:
      throw new CredentialImportError(
        `container uses a legacy cipher (${oid}); re-export it with AES (PBES2)`,
      );
  }
}

async function decryptPbes2(
  algorithm: AlgorithmIdentifier,
  password: string,
  ciphertext: Uint8Array,
): Promise<Uint8Array> {
  if (algorithm.oid !== OID.pbes2 || !algorithm.params) {
    throw new CredentialImportError(
      `container uses a legacy encryption scheme (${algorithm.oid}); re-export it with AES (PBES2)`,
    );
  }
  const params = sequenceReader(algorithm.params);
  const kdf = readAlgorithmIdentifier(params);
  const scheme = readAlgorithmIdentifier(params);
  if (kdf.oid !== OID.pbkdf2 || !kdf.params) {
    throw new CredentialImportError(`unsupported key derivation ${kdf.oid}`);
  }
  const kdfParams = sequenceReader(kdf.params);
  const salt = kdfParams.read(TAG.OCTET_STRING).value;
  const iterations = readIntegerAsNumber(kdfParams.read(TAG.INTEGER));
  let hash = "SHA-1";
  while (!kdfParams.atEnd()) {
    const next = kdfParams.read();
    if (next.tag === TAG.SEQUENCE) {
      hash = prfHash(readOidValue(sequenceReader(next).read(TAG.OID).value));
    }
    // a bare INTEGER here is an explicit key length; the cipher pins it anyway
  }
  const keyLength = aesKeyLength(scheme.oid);
  if (!scheme.params || scheme.params.tag !== TAG.OCTET_STRING) {
    throw new CredentialImportError("missing AES-CBC IV");
  }
  const iv = scheme.params.value;

  const baseKey = await crypto.subtle.importKey(
    "raw",
    toBuf(new TextEncoder().encode(password)),
    "PBKDF2",
    false,
    ["deriveBits"],
  );
  const keyBits = await crypto.subtle.deriveBits(
    { name: "PBKDF2", salt: toBuf(new Uint8Array(salt)), iterations, hash },
    baseKey,
    keyLength * 8,
  );
  const aesKey = await crypto.subtle.importKey("raw", keyBits, "AES-CBC", false, ["decrypt"]);
  try {
    const plain = await crypto.subtle.decrypt(
      { name: "AES-CBC", iv: toBuf(new Uint8Array(iv)) },
      aesKey,
      toBuf(ciphertext),
    );
    return new Uint8Array(plain);
  } catch {
    throw new CredentialImportError("wrong passphrase (decryption failed)");
  }
}

// ---------------------------------------------------------------------------
// container walking

interface ContentInfo {
  oid: string;
  content?: Tlv;
}

function readContentInfo(reader: DerReader): ContentInfo {
  const seq = sequenceReader(reader.read(TAG.SEQUENCE));
  const oid = readOidValue(seq.read(TAG.OID).value);
  const wrapper = seq.readOptional(contextTag(0));
  if (!wrapper) return { oid };
  const inner = new DerReader(wrapper.value).read();
  return { oid, content: inner };
}

async function verifyMac(
  password: string,
  authSafeContent: Uint8Array,
  macData: Tlv,
): Promise<void> {
  const seq = sequenceReader(macData);
  const digestInfo = sequenceReader(seq.read(TAG.SEQUENCE));
  const digestAlgorithm = readOidValue(sequenceReader(digestInfo.read(TAG.SEQUENCE)).read(TAG.OID).value);
  const expected = digestInfo.read(TAG.OCTET_STRING).value;
  const salt = seq.read(TAG.OCTET_STRING).value;
  const iterations = seq.atEnd() ? 1 : readIntegerAsNumber(seq.read(TAG.INTEGER));

  let hash: "SHA-1" | "SHA-256";
  if (digestAlgorithm === OID.sha1) hash = "SHA-1";
  else if (digestAlgorithm === OID.sha256) hash = "SHA-256";
  else throw new CredentialImportError(`unsupported MAC digest ${digestAlgorithm}`);

  const macKey = await pkcs12Kdf(hash, password, new Uint8Array(salt), iterations, 3, expected.length);
  const hmacKey = await crypto.subtle.importKey("raw", toBuf(macKey), { name: "HMAC", hash }, false, ["sign"]);
  const mac = new Uint8Array(await crypto.subtle.sign("HMAC", hmacKey, toBuf(authSafeContent)));
  if (!bytesEqual(mac, new Uint8Array(expected))) {
    throw new CredentialImportError("wrong passphrase (integrity check failed)");
  }
}

interface CollectedBags {
  keys: Uint8Array[]; // PrivateKeyInfo DER
  certificates: Uint8Array[]; // X.509 DER
}

async function collectSafeContents(
  safeContents: Uint8Array,
  password: string,
  bags: CollectedBags,
): Promise<void> {
  const reader = sequenceReader(new DerReader(safeContents).read(TAG.SEQUENCE));
  while (!reader.atEnd()) {
    const bag = sequenceReader(reader.read(TAG.SEQUENCE));
    const bagOid = readOidValue(bag.read(TAG.OID).value);
    const valueWrapper = bag.read(contextTag(0));
    const value = new DerReader(valueWrapper.value).read();
    if (bagOid === OID.keyBag) {
      bags.keys.push(new Uint8Array(value.raw));
    } else if (bagOid === OID.shroudedKeyBag) {
      const encrypted = sequenceReader(value);
      const algorithm = readAlgorithmIdentifier(encrypted);
      const ciphertext = encrypted.read(TAG.OCTET_STRING).value;
      bags.keys.push(await decryptPbes2(algorithm, password, new Uint8Array(ciphertext)));
    } else if (bagOid === OID.certBag) {
      const certBag = sequenceReader(value);
      const certType = readOidValue(certBag.read(TAG.OID).value);
      if (certType === OID.x509Certificate) {
        const wrapped = certBag.read(contextTag(0));
        const octets = new DerReader(wrapped.value).read(TAG.OCTET_STRING);
        bags.certificates.push(new Uint8Array(octets.value));
      }
    }
  }
}

function privateKeyAlgorithm(pkcs8: Uint8Array): KeyAlgorithm {
  const info = sequenceReader(new DerReader(pkcs8).read(TAG.SEQUENCE));
  info.read(TAG.INTEGER);
  const algorithm = sequenceReader(info.read(TAG.SEQUENCE));
  const oid = readOidValue(algorithm.read(TAG.OID).value);
  if (oid === OID.ecPublicKey) return "ec-p256";
  if (oid === OID.rsaEncryption) return "rsa";
  throw new CredentialImportError(`unsupported private key algorithm ${oid}`);
}

/** Best-effort public-key match between a PKCS#8 key and a certificate SPKI
 * (EC: embedded point; RSA: modulus).  Pure DER comparison, no key export. */
function keyMatchesCertificate(pkcs8: Uint8Array, spkiDer: Uint8Array, algorithm: KeyAlgorithm): boolean {
  try {
    const spki = sequenceReader(new DerReader(spkiDer).read(TAG.SEQUENCE));
    spki.read(TAG.SEQUENCE);
    const spkiBits = spki.read(TAG.BIT_STRING).value.subarray(1);

    const info = sequenceReader(new DerReader(pkcs8).read(TAG.SEQUENCE));
    info.read(TAG.INTEGER);
    info.read(TAG.SEQUENCE);
    const keyOctets = info.read(TAG.OCTET_STRING).value;
    if (algorithm === "ec-p256") {
      const ec = sequenceReader(new DerReader(keyOctets).read(TAG.SEQUENCE));
      ec.read(TAG.INTEGER);
      ec.read(TAG.OCTET_STRING);
      ec.readOptional(contextTag(0));
      const publicWrapper = ec.readOptional(contextTag(1));
      if (!publicWrapper) return true; // no embedded point to compare
      const point = new DerReader(publicWrapper.value).read(TAG.BIT_STRING).value.subarray(1);
      return bytesEqual(new Uint8Array(point), new Uint8Array(spkiBits));
    }
    const rsa = sequenceReader(new DerReader(keyOctets).read(TAG.SEQUENCE));
    rsa.read(TAG.INTEGER);
    const modulus = rsa.read(TAG.INTEGER).value;
    const publicKey = sequenceReader(new DerReader(spkiBits).read(TAG.SEQUENCE));
    const publicModulus = publicKey.read(TAG.INTEGER).value;
    return bytesEqual(new Uint8Array(modulus), new Uint8Array(publicModulus));
  } catch {
    return true; // comparison is advisory; chain validation decides server-side
  }
}

export async function importCredential(
  p12: Uint8Array,
  passphrase: string,
): Promise<ImportedCredential> {
  let pfx: DerReader;
  try {
    pfx = sequenceReader(new DerReader(p12).read(TAG.SEQUENCE));
  } catch {
    throw new CredentialImportError("not a PKCS#12 container");
  }
  const version = readIntegerAsNumber(pfx.read(TAG.INTEGER));
  if (version !== 3) throw new CredentialImportError(`unsupported PFX version ${version}`);
  const authSafe = readContentInfo(pfx);
  if (authSafe.oid !== OID.data || !authSafe.content) {
    throw new CredentialImportError("unsupported authSafe content type");
  }
  const authSafeContent = new Uint8Array(authSafe.content.value);

  if (!pfx.atEnd()) {
    await verifyMac(passphrase, authSafeContent, pfx.read(TAG.SEQUENCE));
  }

  const bags: CollectedBags = { keys: [], certificates: [] };
  const safes = sequenceReader(new DerReader(authSafeContent).read(TAG.SEQUENCE));
  while (!safes.atEnd()) {
    const item = readContentInfo(safes);
    if (item.oid === OID.data && item.content) {
      await collectSafeContents(new Uint8Array(item.content.value), passphrase, bags);
    } else if (item.oid === OID.encryptedData && item.content) {
      const encryptedData = sequenceReader(item.content);
      encryptedData.read(TAG.INTEGER);
      const eci = sequenceReader(encryptedData.read(TAG.SEQUENCE));
      eci.read(TAG.OID);
      const algorithm = readAlgorithmIdentifier(eci);
      const ciphertext = eci.read(contextTag(0, false)).value;
      const plain = await decryptPbes2(algorithm, passphrase, new Uint8Array(ciphertext));
      await collectSafeContents(plain, passphrase, bags);
    }
  }

  if (bags.keys.length === 0) throw new CredentialImportError("container holds no private key");
  if (bags.certificates.length === 0) throw new CredentialImportError("container holds no certificate");
  const pkcs8 = bags.keys[0];
  const keyAlgorithm = privateKeyAlgorithm(pkcs8);
  const certDer =
    bags.certificates.find((c) => keyMatchesCertificate(pkcs8, parseCertificate(c).spkiDer, keyAlgorithm)) ??
    bags.certificates[0];
  const certificate = parseCertificate(certDer);
  if (!keyMatchesCertificate(pkcs8, certificate.spkiDer, keyAlgorithm)) {
    throw new CredentialImportError("certificate and key do not match");
  }

  const key = await crypto.subtle.importKey(
    "pkcs8",
    toBuf(pkcs8),
    keyAlgorithm === "ec-p256"
      ? { name: "ECDSA", namedCurve: "P-256" }
      : { name: "RSASSA-PKCS1-v1_5", hash: "SHA-256" },
    false, // non-extractable: the key can sign but never leave
    ["sign"],
  );
  return { key, keyAlgorithm, certificate, certificatePem: certDer };
}
