"""Throwaway CA and user identities for demos, benchmarks, and test fixtures.

Not CA software: these helpers exist so the system can be exercised without
any external certification authority.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.serialization import pkcs12

from lgrid.pki.dn import DistinguishedName, parse_dn
from lgrid.pki.keys import DEFAULT_ALGORITHM, KeyPair, generate_keypair


@dataclass(frozen=True)
class Identity:
    cert: x509.Certificate
    keypair: KeyPair

    @property
    def dn(self) -> DistinguishedName:
        return DistinguishedName.from_x509_name(self.cert.subject)

    def cert_pem(self) -> bytes:
        return self.cert.public_bytes(serialization.Encoding.PEM)

    def key_pem(self) -> bytes:
        return self.keypair.private_pem()


def _utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)


def _build_cert(
    subject: DistinguishedName,
    issuer: DistinguishedName,
    public_key,
    signing_key,
    days: int,
    ca: bool,
    not_before: datetime.datetime | None = None,
    san_dns: str | None = None,
) -> x509.Certificate:
    not_before = not_before or _utcnow()
    builder = (
        x509.CertificateBuilder()
        .subject_name(subject.to_x509_name())
        .issuer_name(issuer.to_x509_name())
        .public_key(public_key)
        .serial_number(x509.random_serial_number())
        .not_valid_before(not_before)
        .not_valid_after(not_before + datetime.timedelta(days=days))
        .add_extension(x509.BasicConstraints(ca=ca, path_length=None), critical=True)
    )
    if san_dns:
        builder = builder.add_extension(
            x509.SubjectAlternativeName([x509.DNSName(san_dns)]), critical=False
        )
    return builder.sign(signing_key, hashes.SHA256())


def create_ca(
    dn: str | DistinguishedName = "/C=IT/O=LGridTest/CN=Test CA",
    algorithm: str = DEFAULT_ALGORITHM,
    days: int = 3650,
) -> Identity:
    dn = parse_dn(dn) if isinstance(dn, str) else dn
    keypair = generate_keypair(algorithm)
    cert = _build_cert(dn, dn, keypair.public_key, keypair.private_key, days, ca=True)
    return Identity(cert=cert, keypair=keypair)


def issue_user_cert(
    ca: Identity,
    dn: str | DistinguishedName,
    algorithm: str = DEFAULT_ALGORITHM,
    days: int = 365,
    not_before: datetime.datetime | None = None,
) -> Identity:
    dn = parse_dn(dn) if isinstance(dn, str) else dn
    keypair = generate_keypair(algorithm)
    cert = _build_cert(
        dn, ca.dn, keypair.public_key, ca.keypair.private_key, days, ca=False, not_before=not_before
    )
    return Identity(cert=cert, keypair=keypair)


def issue_server_cert(
    ca: Identity,
    dn: str | DistinguishedName,
    hostname: str = "localhost",
    days: int = 365,
) -> Identity:
    dn = parse_dn(dn) if isinstance(dn, str) else dn
    keypair = generate_keypair(DEFAULT_ALGORITHM)
    cert = _build_cert(
        dn, ca.dn, keypair.public_key, ca.keypair.private_key, days, ca=False, san_dns=hostname
    )
    return Identity(cert=cert, keypair=keypair)


def build_p12(identity: Identity, passphrase: str, friendly_name: bytes = b"lgrid user") -> bytes:
    """Package an identity as PKCS#12 using the PBES2/AES-256 profile."""
    encryption = (
        serialization.PrivateFormat.PKCS12.encryption_builder()
        .kdf_rounds(2048)
        .key_cert_algorithm(pkcs12.PBES.PBESv2SHA256AndAES256CBC)
        .hmac_hash(hashes.SHA256())
        .build(passphrase.encode("utf-8"))
    )
    return pkcs12.serialize_key_and_certificates(
        friendly_name, identity.keypair.private_key, identity.cert, None, encryption
    )
