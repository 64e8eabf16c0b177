"""HTTP client for the gateway: delegation, job operations, transcripts.

Round-trip latency can be injected per request to reproduce the protocol
cost comparison under controlled network conditions.
"""

from __future__ import annotations

import http.client
import json
import ssl
import time
from pathlib import Path
from urllib.parse import urlparse

from cryptography import x509

from lgrid.delegation import Transcript
from lgrid.delegation.client import DelegationFault, client_delegate
from lgrid.delegation.messages import (
    DelegationMessage,
    decode_frame,
    decode_message,
    encode_frame,
    encode_message,
)
from lgrid.httputil import build_multipart
from lgrid.pki.keys import PrivateKey


class GatewayError(Exception):
    def __init__(self, status: int, reason: str, detail: str = "") -> None:
        super().__init__(f"{status} {reason}: {detail}" if detail else f"{status} {reason}")
        self.status = status
        self.reason = reason
        self.detail = detail


def job_uuid(job_id: str) -> str:
    return job_id.rsplit("/", 1)[-1]


class GatewayClient:
    def __init__(
        self,
        base_url: str,
        ca_file: Path | str | None = None,
        client_cert_file: Path | str | None = None,
        client_key_file: Path | str | None = None,
        token: str | None = None,
        rtt_seconds: float = 0.0,
        timeout: float = 60.0,
    ) -> None:
        parsed = urlparse(base_url)
        if parsed.scheme not in ("http", "https"):
            raise ValueError(f"unsupported scheme in {base_url!r}")
        self.scheme = parsed.scheme
        self.host = parsed.hostname or "localhost"
        self.port = parsed.port or (443 if self.scheme == "https" else 80)
        self.token = token
        self.rtt_seconds = rtt_seconds
        self.timeout = timeout
        self._context: ssl.SSLContext | None = None
        if self.scheme == "https":
            self._context = ssl.create_default_context(
                cafile=str(ca_file) if ca_file else None
            )
            if client_cert_file:
                self._context.load_cert_chain(str(client_cert_file), str(client_key_file) if client_key_file else None)
        self._connection: http.client.HTTPConnection | None = None

    # -- transport -------------------------------------------------------------

    def _ensure_connection(self) -> http.client.HTTPConnection:
        if self._connection is None:
            if self.scheme == "https":
                self._connection = http.client.HTTPSConnection(
                    self.host, self.port, timeout=self.timeout, context=self._context
                )
            else:
                self._connection = http.client.HTTPConnection(
                    self.host, self.port, timeout=self.timeout
                )
            self._connection.connect()
        return self._connection

    def close(self) -> None:
        if self._connection is not None:
            self._connection.close()
            self._connection = None

    def request(
        self,
        method: str,
        path: str,
        body: bytes | None = None,
        content_type: str | None = None,
        authorized: bool = True,
    ) -> tuple[int, dict, bytes]:
        headers: dict[str, str] = {}
        if content_type:
            headers["Content-Type"] = content_type
        if authorized and self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        if self.rtt_seconds > 0:
            time.sleep(self.rtt_seconds)
        for attempt in (1, 2):
            connection = self._ensure_connection()
            try:
                connection.request(method, path, body=body, headers=headers)
                response = connection.getresponse()
                payload = response.read()
                return response.status, dict(response.getheaders()), payload
            except (http.client.CannotSendRequest, http.client.RemoteDisconnected, BrokenPipeError, ConnectionResetError):
                self.close()
                if attempt == 2:
                    raise
        raise RuntimeError("unreachable")

    def _json_request(self, method: str, path: str, **kwargs) -> dict | list:
        status, _headers, payload = self.request(method, path, **kwargs)
        doc = json.loads(payload) if payload else {}
        if status >= 400:
            raise GatewayError(status, doc.get("error", "error"), doc.get("detail", ""))
        return doc

    # -- delegation --------------------------------------------------------------

    def delegate(
        self,
        user_cert: x509.Certificate,
        user_key: PrivateKey,
        lifetime: int = 12 * 3600,
        legacy_proxy: bool = False,
    ) -> tuple[object, str | None, Transcript]:
        """Run the embedded handshake; on success the received token becomes
        this client's bearer token."""
        channel = _HttpDelegationChannel(self)
        ack, transcript = client_delegate(
            channel, user_cert, user_key, lifetime, legacy_proxy=legacy_proxy
        )
        if channel.token:
            self.token = channel.token
        return ack, channel.token, transcript

    # -- job operations ------------------------------------------------------------

    def ping(self) -> dict:
        doc = self._json_request("GET", "/ping", authorized=False)
        assert isinstance(doc, dict)
        return doc

    def submit(
        self,
        jdl: str,
        input_archive: bytes | None = None,
        myproxy: dict | None = None,
    ) -> dict:
        fields: dict[str, tuple[bytes, str]] = {"jdl": (jdl.encode(), "text/plain")}
        if input_archive is not None:
            fields["input"] = (input_archive, "application/gzip")
        if myproxy is not None:
            fields["myproxy_user"] = (myproxy["username"].encode(), "text/plain")
            fields["myproxy_pass"] = (myproxy["passphrase"].encode(), "text/plain")
            if "lifetime" in myproxy:
                fields["myproxy_lifetime"] = (str(myproxy["lifetime"]).encode(), "text/plain")
        body, content_type = build_multipart(fields)
        doc = self._json_request("POST", "/jobs", body=body, content_type=content_type)
        assert isinstance(doc, dict)
        if "token" in doc:
            self.token = doc["token"]
        return doc

    def jobs(self) -> list[dict]:
        doc = self._json_request("GET", "/jobs")
        assert isinstance(doc, list)
        return doc

    def job_status(self, job_id: str) -> dict:
        doc = self._json_request("GET", f"/jobs/{job_uuid(job_id)}")
        assert isinstance(doc, dict)
        return doc

    def job_output(self, job_id: str) -> bytes:
        status, _headers, payload = self.request("GET", f"/jobs/{job_uuid(job_id)}/output")
        if status >= 400:
            doc = json.loads(payload) if payload else {}
            raise GatewayError(status, doc.get("error", "error"), doc.get("detail", ""))
        return payload

    def cancel(self, job_id: str) -> dict:
        doc = self._json_request("DELETE", f"/jobs/{job_uuid(job_id)}")
        assert isinstance(doc, dict)
        return doc

    def wait_terminal(self, job_id: str, interval: float = 1.0, timeout: float = 300.0) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            status = self.job_status(job_id)
            if status["state"] in ("DONE_OK", "DONE_FAILED", "ABORTED", "CANCELLED", "CLEARED"):
                return status
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {status['state']} after {timeout}s")
            time.sleep(interval)


class _HttpDelegationChannel:
    """Adapts the gateway's POST /delegate endpoint to the delegation channel
    interface; captures the token issued alongside the Ack."""

    def __init__(self, client: GatewayClient) -> None:
        self.client = client
        self.token: str | None = None

    def connect(self, transcript: Transcript) -> None:
        self.client._ensure_connection()
        transcript.record_connection()

    def exchange(self, msg: DelegationMessage, transcript: Transcript) -> DelegationMessage:
        frame = encode_frame(encode_message(msg))
        transcript.record_sent(frame, type(msg).__name__)
        status, headers, payload = self.client.request(
            "POST", "/delegate", body=frame, content_type="application/octet-stream",
            authorized=False,
        )
        transcript.record_received(payload, "reply")
        transcript.record_round_trip()
        token = headers.get("X-LGRID-Token")
        if token:
            self.token = token
        try:
            return decode_message(decode_frame(payload))
        except Exception as exc:
            raise DelegationFault("protocol-error", f"bad reply frame (HTTP {status}): {exc}") from exc
