"""Small multipart/form-data helpers shared by the gateway and its client."""

from __future__ import annotations

import email.parser
import email.policy
import secrets


def build_multipart(fields: dict[str, tuple[bytes, str]]) -> tuple[bytes, str]:
    """Encode fields as multipart/form-data.

    Each field maps name -> (payload bytes, content type).  Returns the body
    and the full Content-Type header value.
    """
    boundary = "lgrid" + secrets.token_hex(16)
    chunks: list[bytes] = []
    for name, (payload, content_type) in fields.items():
        chunks.append(f"--{boundary}\r\n".encode())
        disposition = f'Content-Disposition: form-data; name="{name}"'
        if content_type != "text/plain":
            disposition += f'; filename="{name}"'
        chunks.append(f"{disposition}\r\n".encode())
        chunks.append(f"Content-Type: {content_type}\r\n\r\n".encode())
        chunks.append(payload)
        chunks.append(b"\r\n")
    chunks.append(f"--{boundary}--\r\n".encode())
    return b"".join(chunks), f"multipart/form-data; boundary={boundary}"


def parse_multipart(body: bytes, content_type: str) -> dict[str, bytes]:
    """Decode a multipart/form-data body into name -> payload bytes."""
    header = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n".encode()
    message = email.parser.BytesParser(policy=email.policy.default).parsebytes(header + body)
    if not message.is_multipart():
        raise ValueError("request body is not multipart/form-data")
    fields: dict[str, bytes] = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if not name:
            continue
        payload = part.get_payload(decode=True)
        fields[str(name)] = payload if payload is not None else b""
    return fields
