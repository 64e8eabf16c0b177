"""Transcript recording for protocol exchanges, plus the key-material scan.

Every byte that crosses a recorded channel lands here, so "the private key
never went over the wire" is checkable as a substring property instead of
being taken on faith.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass, field

from cryptography.hazmat.primitives import serialization


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str  # "sent" or "received", from the recorder's point of view
    message_type: str
    length: int
    payload: bytes
    timestamp: float


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    connection_count: int = 0
    round_trip_count: int = 0

    def record_connection(self) -> None:
        self.connection_count += 1

    def record_sent(self, payload: bytes, message_type: str = "") -> None:
        self._record("sent", payload, message_type)

    def record_received(self, payload: bytes, message_type: str = "") -> None:
        self._record("received", payload, message_type)

    def record_round_trip(self) -> None:
        self.round_trip_count += 1

    def _record(self, direction: str, payload: bytes, message_type: str) -> None:
        self.entries.append(
            TranscriptEntry(
                direction=direction,
                message_type=message_type,
                length=len(payload),
                payload=bytes(payload),
                timestamp=time.time(),
            )
        )

    @property
    def total_bytes(self) -> int:
        return sum(entry.length for entry in self.entries)

    def payload_blob(self) -> bytes:
        return b"".join(entry.payload for entry in self.entries)

    def absorb(self, other: "Transcript") -> None:
        self.entries.extend(other.entries)
        self.connection_count += other.connection_count
        self.round_trip_count += other.round_trip_count


def private_key_needles(private_key) -> list[bytes]:
    """Byte strings whose presence in a transcript would betray the key.

    Covers both serialization formats, the raw DER, and the base64 body with
    line breaks removed, so re-wrapped or JSON-embedded copies still match.
    """
    needles: list[bytes] = []
    for fmt in (serialization.PrivateFormat.PKCS8, serialization.PrivateFormat.TraditionalOpenSSL):
        try:
            pem = private_key.private_bytes(
                serialization.Encoding.PEM, fmt, serialization.NoEncryption()
            )
        except ValueError:
            continue
        needles.append(pem)
        body = b"".join(
            line for line in pem.splitlines() if not line.startswith(b"-----")
        )
        needles.append(body)
        needles.append(base64.b64decode(body))
    return needles


def scan_for_key_material(transcript: Transcript, private_keys) -> list[str]:
    """Return a description of every key-material hit found in the transcript."""
    blob = transcript.payload_blob()
    haystacks = [
        blob,
        blob.replace(b"\\n", b"\n"),
        b"".join(blob.split()),
    ]
    hits: list[str] = []
    for index, key in enumerate(private_keys):
        for needle in private_key_needles(key):
            stripped = b"".join(needle.split())
            for haystack in haystacks:
                if needle in haystack or (stripped and stripped in haystack):
                    hits.append(f"key #{index}: {len(needle)}-byte needle found")
                    break
    return hits
