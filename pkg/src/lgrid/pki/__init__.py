"""Certificate, key, DN and proxy-credential primitives shared by client and server."""

from lgrid.pki.dn import DistinguishedName, DnParseError, derive_user_id, format_dn, parse_dn
from lgrid.pki.keys import (
    DEFAULT_ALGORITHM,
    SUPPORTED_ALGORITHMS,
    KeyPair,
    UnsupportedAlgorithmError,
    generate_keypair,
)
from lgrid.pki.certs import (
    BundleError,
    CredentialError,
    ProxyCredential,
    TrustStore,
    ValidationReport,
    Violation,
    assemble_proxy_bundle,
    cert_fingerprint,
    convert_credential_container,
    create_proxy_csr,
    csr_subject_dn,
    parse_proxy_bundle,
    sign_proxy_csr,
    subject_dn,
    validate_proxy_chain,
)

__all__ = [
    "DistinguishedName",
    "DnParseError",
    "parse_dn",
    "format_dn",
    "derive_user_id",
    "KeyPair",
    "generate_keypair",
    "UnsupportedAlgorithmError",
    "DEFAULT_ALGORITHM",
    "SUPPORTED_ALGORITHMS",
    "ProxyCredential",
    "TrustStore",
    "ValidationReport",
    "Violation",
    "CredentialError",
    "BundleError",
    "convert_credential_container",
    "create_proxy_csr",
    "sign_proxy_csr",
    "assemble_proxy_bundle",
    "parse_proxy_bundle",
    "validate_proxy_chain",
    "cert_fingerprint",
    "subject_dn",
    "csr_subject_dn",
]
