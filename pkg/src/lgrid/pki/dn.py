"""Distinguished names in the slash-separated one-line form, e.g. "/C=IT/O=Test/CN=Alice".

The canonical grammar is a sequence of "/TYPE=value" segments.  Literal '/'
and '\\' inside values are backslash-escaped, so parse and format are exact
inverses on canonical text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography import x509
from cryptography.x509.oid import NameOID

KNOWN_ATTRIBUTE_TYPES = ("C", "O", "OU", "CN", "L", "ST", "DC", "emailAddress")

_ATTR_OID = {
    "C": NameOID.COUNTRY_NAME,
    "O": NameOID.ORGANIZATION_NAME,
    "OU": NameOID.ORGANIZATIONAL_UNIT_NAME,
    "CN": NameOID.COMMON_NAME,
    "L": NameOID.LOCALITY_NAME,
    "ST": NameOID.STATE_OR_PROVINCE_NAME,
    "DC": NameOID.DOMAIN_COMPONENT,
    "emailAddress": NameOID.EMAIL_ADDRESS,
}
_OID_ATTR = {oid: attr for attr, oid in _ATTR_OID.items()}


class DnParseError(ValueError):
    """Raised for text that does not match the DN grammar; names the bad segment."""


@dataclass(frozen=True)
class DistinguishedName:
    """Ordered list of (attribute-type, value) RDNs."""

    rdns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.rdns:
            raise ValueError("a DN needs at least one RDN")
        for attr, value in self.rdns:
            if attr not in KNOWN_ATTRIBUTE_TYPES:
                raise ValueError(f"unknown attribute type: {attr!r}")
            if not value:
                raise ValueError(f"empty value for attribute {attr}")

    def __str__(self) -> str:
        return format_dn(self)

    @property
    def terminal(self) -> tuple[str, str]:
        return self.rdns[-1]

    def with_cn(self, value: str) -> "DistinguishedName":
        """Return this DN extended with one terminal CN RDN."""
        return DistinguishedName(self.rdns + (("CN", value),))

    def parent(self) -> "DistinguishedName":
        """Return this DN with the terminal RDN stripped."""
        if len(self.rdns) < 2:
            raise ValueError("cannot strip the only RDN")
        return DistinguishedName(self.rdns[:-1])

    def extends_by_one_cn(self, base: "DistinguishedName") -> bool:
        """True iff self is base plus exactly one additional terminal CN."""
        return (
            len(self.rdns) == len(base.rdns) + 1
            and self.rdns[: len(base.rdns)] == base.rdns
            and self.terminal[0] == "CN"
        )

    def to_x509_name(self) -> x509.Name:
        return x509.Name([x509.NameAttribute(_ATTR_OID[a], v) for a, v in self.rdns])

    @classmethod
    def from_x509_name(cls, name: x509.Name) -> "DistinguishedName":
        rdns = []
        for attribute in name:
            attr = _OID_ATTR.get(attribute.oid)
            if attr is None:
                raise DnParseError(f"unsupported attribute OID in name: {attribute.oid.dotted_string}")
            value = attribute.value
            if isinstance(value, bytes):
                value = value.decode()
            rdns.append((attr, value))
        return cls(tuple(rdns))


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("/", "\\/")


def format_dn(dn: DistinguishedName) -> str:
    return "".join(f"/{attr}={_escape(value)}" for attr, value in dn.rdns)


def _split_segments(text: str) -> list[str]:
    # split on '/' except when backslash-escaped
    segments: list[str] = []
    current: list[str] = []
    escaped = False
    for ch in text:
        if escaped:
            current.append(ch)
            escaped = False
        elif ch == "\\":
            current.append(ch)
            escaped = True
        elif ch == "/":
            segments.append("".join(current))
            current = []
        else:
            current.append(ch)
    segments.append("".join(current))
    return segments


def _unescape(value: str) -> str:
    out: list[str] = []
    escaped = False
    for ch in value:
        if escaped:
            out.append(ch)
            escaped = False
        elif ch == "\\":
            escaped = True
        else:
            out.append(ch)
    if escaped:
        out.append("\\")
    return "".join(out)


def parse_dn(text: str) -> DistinguishedName:
    """Parse canonical "/TYPE=value/..." text into a DistinguishedName."""
    if not text:
        raise DnParseError("empty DN")
    if not text.startswith("/"):
        raise DnParseError(f"DN must start with '/': {text!r}")
    segments = _split_segments(text)
    if segments[0] != "":
        raise DnParseError(f"DN must start with '/': {text!r}")
    rdns: list[tuple[str, str]] = []
    for segment in segments[1:]:
        if "=" not in segment:
            raise DnParseError(f"segment without '=': {segment!r}")
        attr, _, raw_value = segment.partition("=")
        if attr not in KNOWN_ATTRIBUTE_TYPES:
            raise DnParseError(f"unknown attribute type in segment: {segment!r}")
        value = _unescape(raw_value)
        if not value:
            raise DnParseError(f"empty value in segment: {segment!r}")
        rdns.append((attr, value))
    if not rdns:
        raise DnParseError("DN has no RDNs")
    return DistinguishedName(tuple(rdns))


def derive_user_id(dn: DistinguishedName) -> str:
    """Map a DN to its filesystem-safe user id.

    First 128 bits (32 hex chars) of SHA-256 over the canonical DN text.
    """
    return hashlib.sha256(format_dn(dn).encode("utf-8")).hexdigest()[:32]
