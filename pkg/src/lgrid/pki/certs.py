"""Proxy-certificate primitives: CSR creation, signing, bundles, chain validation.

A proxy certificate is a short-lived certificate whose subject is the user
certificate's subject plus one terminal CN, signed by the user's own key.
Bundles follow the Globus proxy-file layout: proxy cert, proxy key, user
cert, concatenated as PEM blocks in that byte order.
"""

from __future__ import annotations

import datetime
import secrets
from dataclasses import dataclass, field

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa
from cryptography.hazmat.primitives.serialization import pkcs12

from lgrid.pki.dn import DistinguishedName
from lgrid.pki.keys import KeyPair, PrivateKey, load_private_key_pem, same_public_key, sign

# RFC 3820 proxyCertInfo extension, with the "inherit all rights" policy
# language; DER is hand-encoded since the value is a fixed 14-byte constant.
PROXY_CERT_INFO_OID = x509.ObjectIdentifier("1.3.6.1.5.5.7.1.14")
PROXY_POLICY_INHERIT_ALL = bytes.fromhex("300c300a06082b06010505071501")

LEGACY_PROXY_CN = "proxy"


class CredentialError(Exception):
    """A credential container or its contents are unusable."""


class BundleError(Exception):
    """A proxy bundle is inconsistent or cannot be parsed."""


@dataclass(frozen=True)
class ProxyCredential:
    """A delegated credential: proxy cert, optional private key, and its chain.

    chain[0] is the end-entity user certificate; deeper entries (CA certs)
    are optional context.  The private key is only present on the party
    that generated it.
    """

    proxy_cert: x509.Certificate
    proxy_key: PrivateKey | None
    chain: tuple[x509.Certificate, ...]

    @property
    def user_cert(self) -> x509.Certificate:
        return self.chain[0]


@dataclass
class TrustStore:
    """Set of trusted CA (or explicitly trusted self-signed) certificates."""

    anchors: list[x509.Certificate] = field(default_factory=list)

    def add(self, cert: x509.Certificate) -> None:
        self.anchors.append(cert)

    def find_issuer(self, cert: x509.Certificate) -> x509.Certificate | None:
        for anchor in self.anchors:
            if anchor.subject == cert.issuer:
                return anchor
        return None


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def has(self, code: str) -> bool:
        return any(v.code == code for v in self.violations)

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(str(v) for v in self.violations)


def subject_dn(cert: x509.Certificate) -> DistinguishedName:
    return DistinguishedName.from_x509_name(cert.subject)


def issuer_dn(cert: x509.Certificate) -> DistinguishedName:
    return DistinguishedName.from_x509_name(cert.issuer)


def csr_subject_dn(csr: x509.CertificateSigningRequest) -> DistinguishedName:
    return DistinguishedName.from_x509_name(csr.subject)


def cert_fingerprint(cert: x509.Certificate) -> str:
    """Hex SHA-256 over the DER encoding."""
    return cert.fingerprint(hashes.SHA256()).hex()


def convert_credential_container(p12_bytes: bytes, passphrase: str) -> tuple[bytes, bytes]:
    """Convert a PKCS#12 container to a (certificate PEM, private key PEM) pair.

    The key PEM is returned unencrypted; callers persisting it must use an
    owner-only path.
    """
    try:
        key, cert, _extra = pkcs12.load_key_and_certificates(
            p12_bytes, passphrase.encode("utf-8")
        )
    except ValueError as exc:
        raise CredentialError(f"cannot open container: {exc}") from exc
    if key is None:
        raise CredentialError("container holds no private key")
    if cert is None:
        raise CredentialError("container holds no certificate")
    if not isinstance(key, (ec.EllipticCurvePrivateKey, rsa.RSAPrivateKey)):
        raise CredentialError(f"unsupported key type: {type(key).__name__}")
    if not same_public_key(key.public_key(), cert.public_key()):
        raise CredentialError("certificate and key do not match")
    cert_pem = cert.public_bytes(serialization.Encoding.PEM)
    key_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    return cert_pem, key_pem


def new_proxy_serial() -> int:
    """Random 31-bit serial used as the proxy's terminal CN value."""
    return secrets.randbits(31)


def create_proxy_csr(user_dn: DistinguishedName, fresh: KeyPair) -> x509.CertificateSigningRequest:
    """Build a CSR whose subject is user_dn plus one fresh terminal CN serial.

    The fresh keypair must have been generated for this delegation only.
    """
    subject = user_dn.with_cn(str(new_proxy_serial()))
    builder = x509.CertificateSigningRequestBuilder().subject_name(subject.to_x509_name())
    return builder.sign(fresh.private_key, hashes.SHA256())


def _utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)


def sign_proxy_csr(
    user_cert: x509.Certificate,
    user_key: PrivateKey,
    csr: x509.CertificateSigningRequest,
    lifetime: int,
    legacy_proxy: bool = False,
    now: datetime.datetime | None = None,
) -> x509.Certificate:
    """Sign a proxy CSR with the user's own key, producing the proxy certificate.

    not-after is min(now + lifetime, user cert's not-after); the subject must
    extend the user cert's subject by exactly one CN.
    """
    if lifetime <= 0:
        raise ValueError("lifetime must be positive")
    if not csr.is_signature_valid:
        raise ValueError("CSR proof-of-possession is invalid")
    user_subject = subject_dn(user_cert)
    proxy_subject = csr_subject_dn(csr)
    if not proxy_subject.extends_by_one_cn(user_subject):
        raise ValueError(
            f"CSR subject {proxy_subject} does not extend {user_subject} by one CN"
        )
    now = now or _utcnow()
    if now < user_cert.not_valid_before_utc or now > user_cert.not_valid_after_utc:
        raise ValueError("user certificate is not currently valid")
    not_after = min(now + datetime.timedelta(seconds=lifetime), user_cert.not_valid_after_utc)

    terminal_cn = proxy_subject.terminal[1]
    serial = int(terminal_cn) if terminal_cn.isdigit() else x509.random_serial_number()

    builder = (
        x509.CertificateBuilder()
        .subject_name(csr.subject)
        .issuer_name(user_cert.subject)
        .public_key(csr.public_key())
        .serial_number(serial)
        .not_valid_before(now)
        .not_valid_after(not_after)
    )
    if not legacy_proxy:
        builder = builder.add_extension(
            x509.UnrecognizedExtension(PROXY_CERT_INFO_OID, PROXY_POLICY_INHERIT_ALL),
            critical=True,
        )
    return builder.sign(user_key, hashes.SHA256())


def assemble_proxy_bundle(
    proxy_cert: x509.Certificate,
    proxy_key: PrivateKey,
    user_cert: x509.Certificate,
) -> bytes:
    """Concatenate proxy cert, proxy key, user cert as PEM, in that byte order."""
    if not same_public_key(proxy_cert.public_key(), proxy_key.public_key()):
        raise BundleError("proxy certificate public key does not match the proxy key")
    if proxy_cert.issuer != user_cert.subject:
        raise BundleError("proxy certificate issuer does not match the user certificate subject")
    parts = [
        proxy_cert.public_bytes(serialization.Encoding.PEM),
        proxy_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ),
        user_cert.public_bytes(serialization.Encoding.PEM),
    ]
    return b"".join(parts)


def _pem_blocks(data: bytes) -> list[tuple[str, bytes]]:
    blocks: list[tuple[str, bytes]] = []
    lines = data.splitlines(keepends=True)
    label = None
    current: list[bytes] = []
    for line in lines:
        stripped = line.strip()
        if stripped.startswith(b"-----BEGIN "):
            label = stripped[len(b"-----BEGIN ") : -len(b"-----")].decode()
            current = [line]
        elif stripped.startswith(b"-----END ") and label is not None:
            current.append(line)
            blocks.append((label, b"".join(current)))
            label = None
        elif label is not None:
            current.append(line)
    return blocks


def parse_proxy_bundle(data: bytes) -> ProxyCredential:
    """Parse a proxy-file byte stream back into its parts.

    Expects the first certificate to be the proxy, an optional private key
    block, then the chain (user certificate first).
    """
    blocks = _pem_blocks(data)
    certs: list[x509.Certificate] = []
    key: PrivateKey | None = None
    try:
        for label, pem in blocks:
            if label == "CERTIFICATE":
                certs.append(x509.load_pem_x509_certificate(pem))
            elif label in ("PRIVATE KEY", "EC PRIVATE KEY", "RSA PRIVATE KEY"):
                if key is not None:
                    raise BundleError("bundle holds more than one private key")
                key = load_private_key_pem(pem)
    except BundleError:
        raise
    except Exception as exc:
        raise BundleError(f"cannot parse bundle: {exc}") from exc
    if len(certs) < 2:
        raise BundleError("bundle needs at least a proxy and a user certificate")
    return ProxyCredential(proxy_cert=certs[0], proxy_key=key, chain=tuple(certs[1:]))


def _verify_signed_by(cert: x509.Certificate, issuer: x509.Certificate) -> bool:
    public_key = issuer.public_key()
    try:
        if isinstance(public_key, ec.EllipticCurvePublicKey):
            public_key.verify(
                cert.signature, cert.tbs_certificate_bytes, ec.ECDSA(cert.signature_hash_algorithm)
            )
        elif isinstance(public_key, rsa.RSAPublicKey):
            public_key.verify(
                cert.signature,
                cert.tbs_certificate_bytes,
                padding.PKCS1v15(),
                cert.signature_hash_algorithm,
            )
        else:
            return False
        return True
    except InvalidSignature:
        return False


def validate_proxy_chain(
    bundle: bytes | ProxyCredential,
    trust: TrustStore,
    at: datetime.datetime | None = None,
    require_proxy_extension: bool = True,
) -> ValidationReport:
    """Check every proxy-credential invariant plus anchoring and temporal validity.

    Returns a report naming each violated rule; raises BundleError only when
    the bundle bytes cannot be parsed at all.
    """
    credential = parse_proxy_bundle(bundle) if isinstance(bundle, (bytes, bytearray)) else bundle
    at = at or _utcnow()
    proxy = credential.proxy_cert
    user = credential.user_cert
    violations: list[Violation] = []

    try:
        proxy_subject = subject_dn(proxy)
        user_subject = subject_dn(user)
        proxy_issuer = issuer_dn(proxy)
    except Exception as exc:
        raise BundleError(f"unsupported name in bundle: {exc}") from exc

    if not proxy_subject.extends_by_one_cn(user_subject):
        violations.append(
            Violation(
                "subject-extension",
                f"proxy subject {proxy_subject} must be {user_subject} plus exactly one CN",
            )
        )
    else:
        terminal_cn = proxy_subject.terminal[1]
        if not (terminal_cn.isdigit() or terminal_cn == LEGACY_PROXY_CN):
            violations.append(
                Violation(
                    "terminal-cn-value",
                    f"terminal CN {terminal_cn!r} is neither a decimal serial nor {LEGACY_PROXY_CN!r}",
                )
            )

    if proxy_issuer != user_subject:
        violations.append(
            Violation("issuer-mismatch", f"proxy issuer {proxy_issuer} is not the user subject")
        )

    if not _verify_signed_by(proxy, user):
        violations.append(
            Violation("signature-invalid", "proxy signature does not verify under the user key")
        )

    if at > proxy.not_valid_after_utc:
        violations.append(Violation("proxy-expired", f"proxy expired {proxy.not_valid_after_utc}"))
    if at < proxy.not_valid_before_utc:
        violations.append(
            Violation("proxy-not-yet-valid", f"proxy valid from {proxy.not_valid_before_utc}")
        )

    if (
        proxy.not_valid_before_utc < user.not_valid_before_utc
        or proxy.not_valid_after_utc > user.not_valid_after_utc
    ):
        violations.append(
            Violation(
                "temporal-containment",
                "proxy validity window is not contained in the user certificate's",
            )
        )

    if at > user.not_valid_after_utc:
        violations.append(Violation("user-cert-expired", f"user cert expired {user.not_valid_after_utc}"))
    if at < user.not_valid_before_utc:
        violations.append(
            Violation("user-cert-not-yet-valid", f"user cert valid from {user.not_valid_before_utc}")
        )

    if require_proxy_extension:
        try:
            proxy.extensions.get_extension_for_oid(PROXY_CERT_INFO_OID)
        except x509.ExtensionNotFound:
            violations.append(
                Violation("missing-proxy-extension", "proxy lacks the proxy-certificate-information extension")
            )

    anchor = trust.find_issuer(user)
    if anchor is None:
        violations.append(
            Violation("untrusted-issuer", f"no trust anchor for issuer {issuer_dn(user)}")
        )
    elif not _verify_signed_by(user, anchor):
        violations.append(
            Violation("user-signature-invalid", "user certificate signature does not verify under its anchor")
        )

    if credential.proxy_key is not None and not same_public_key(
        credential.proxy_key.public_key(), proxy.public_key()
    ):
        violations.append(
            Violation("key-mismatch", "bundled private key does not match the proxy certificate")
        )

    return ValidationReport(tuple(violations))
