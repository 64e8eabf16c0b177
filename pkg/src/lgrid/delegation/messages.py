"""Delegation wire messages: a 4-byte big-endian length prefix followed by a
UTF-8 JSON document whose "type" field names the variant.

No variant has a field that can carry private-key material; certificate and
CSR payloads are PEM text.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Union

MAX_FRAME_BYTES = 1 << 20


class MessageError(ValueError):
    """A frame or message does not follow the wire schema."""


@dataclass(frozen=True)
class Init:
    subject_dn: str
    user_cert_pem: str | None = None


@dataclass(frozen=True)
class CsrReply:
    session_id: str
    csr_pem: str


@dataclass(frozen=True)
class SignedProxy:
    session_id: str
    proxy_cert_pem: str


@dataclass(frozen=True)
class Ack:
    session_id: str
    proxy_fingerprint: str
    not_after: str


@dataclass(frozen=True)
class Fault:
    code: str
    detail: str


DelegationMessage = Union[Init, CsrReply, SignedProxy, Ack, Fault]

_TYPE_TAG = {
    Init: "init",
    CsrReply: "csr-reply",
    SignedProxy: "signed-proxy",
    Ack: "ack",
    Fault: "fault",
}
_TAG_TYPE = {tag: cls for cls, tag in _TYPE_TAG.items()}


def encode_message(msg: DelegationMessage) -> bytes:
    doc = {"type": _TYPE_TAG[type(msg)], **msg.__dict__}
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def decode_message(payload: bytes) -> DelegationMessage:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageError(f"payload is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MessageError("payload is not a JSON object")
    tag = doc.pop("type", None)
    cls = _TAG_TYPE.get(tag)
    if cls is None:
        raise MessageError(f"unknown message type: {tag!r}")
    try:
        msg = cls(**doc)
    except TypeError as exc:
        raise MessageError(f"bad fields for {tag!r}: {exc}") from exc
    for name, value in msg.__dict__.items():
        if value is not None and not isinstance(value, str):
            raise MessageError(f"field {name!r} must be a string")
    return msg


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_BYTES:
        raise MessageError(f"frame too large: {len(payload)} bytes")
    return struct.pack(">I", len(payload)) + payload


def decode_frame(data: bytes) -> bytes:
    if len(data) < 4:
        raise MessageError("frame shorter than its length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if length > MAX_FRAME_BYTES:
        raise MessageError(f"frame too large: {length} bytes")
    if len(data) != 4 + length:
        raise MessageError(f"frame length mismatch: prefix says {length}, got {len(data) - 4}")
    return data[4:]


def read_frame(sock) -> bytes:
    """Read one length-prefixed frame from a socket-like object."""
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise MessageError(f"frame too large: {length} bytes")
    return _read_exact(sock, length)


def _read_exact(sock, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed the connection mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)
