"""Minimal external-MyProxy simulator: the legacy baseline the embedded
handshake is measured against.

The client uploads its credential (certificate plus private key) with a
username and passphrase; retrieval mints a fresh short-lived proxy signed by
the stored key.  Each operation opens its own connection and takes two
round trips (authenticate, then the command), which is exactly the
connection economics the benchmark contrasts with the embedded flow.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import secrets
import socket
import socketserver
import threading
import time
from dataclasses import dataclass

from cryptography import x509
from cryptography.hazmat.primitives import serialization

from lgrid.delegation.messages import MessageError, encode_frame, read_frame
from lgrid.delegation.transcript import Transcript
from lgrid.pki import assemble_proxy_bundle, create_proxy_csr, generate_keypair, subject_dn
from lgrid.pki.keys import load_private_key_pem

DEFAULT_PORT = 7513
DEFAULT_RETENTION = 7 * 24 * 3600


class MyProxyError(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass
class _StoredCredential:
    salt: bytes
    passphrase_digest: bytes
    cert: x509.Certificate
    key_pem: bytes
    not_after: datetime.datetime


def _digest(passphrase: str, salt: bytes) -> bytes:
    return hashlib.sha256(salt + passphrase.encode("utf-8")).digest()


class MyProxySimulator:
    """In-memory credential repository behind a framed-JSON TCP protocol."""

    def __init__(self) -> None:
        self._credentials: dict[str, _StoredCredential] = {}
        self._lock = threading.Lock()

    # -- command handling (transport-independent) ----------------------------

    def handle_hello(self, doc: dict) -> tuple[dict, str | None]:
        """Returns (reply, authenticated-username-or-None)."""
        username = doc.get("username")
        passphrase = doc.get("passphrase")
        if not isinstance(username, str) or not isinstance(passphrase, str):
            return {"type": "error", "code": "bad-request", "detail": "hello needs username and passphrase"}, None
        with self._lock:
            stored = self._credentials.get(username)
        if stored is not None and _digest(passphrase, stored.salt) != stored.passphrase_digest:
            return {"type": "error", "code": "bad-passphrase", "detail": "wrong passphrase"}, None
        return {"type": "hello-ok"}, username

    def handle_command(self, doc: dict, username: str, passphrase: str) -> dict:
        kind = doc.get("type")
        if kind == "put":
            return self._handle_put(doc, username, passphrase)
        if kind == "get":
            return self._handle_get(doc, username)
        return {"type": "error", "code": "bad-request", "detail": f"unknown command {kind!r}"}

    def _handle_put(self, doc: dict, username: str, passphrase: str) -> dict:
        credential_pem = doc.get("credential_pem")
        retention = doc.get("retention", DEFAULT_RETENTION)
        if not isinstance(credential_pem, str) or not isinstance(retention, int) or retention <= 0:
            return {"type": "error", "code": "bad-request", "detail": "put needs credential_pem and retention"}
        try:
            cert = x509.load_pem_x509_certificate(credential_pem.encode())
            key = load_private_key_pem(credential_pem.encode())
        except Exception as exc:
            return {"type": "error", "code": "bad-credential", "detail": str(exc)}
        not_after = min(
            datetime.datetime.now(datetime.timezone.utc) + datetime.timedelta(seconds=retention),
            cert.not_valid_after_utc,
        )
        salt = secrets.token_bytes(16)
        with self._lock:
            self._credentials[username] = _StoredCredential(
                salt=salt,
                passphrase_digest=_digest(passphrase, salt),
                cert=cert,
                key_pem=key.private_bytes(
                    serialization.Encoding.PEM,
                    serialization.PrivateFormat.PKCS8,
                    serialization.NoEncryption(),
                ),
                not_after=not_after,
            )
        return {"type": "put-ok", "not_after": not_after.isoformat()}

    def _handle_get(self, doc: dict, username: str) -> dict:
        lifetime = doc.get("lifetime", 12 * 3600)
        if not isinstance(lifetime, int) or lifetime <= 0:
            return {"type": "error", "code": "bad-request", "detail": "get needs a positive lifetime"}
        with self._lock:
            stored = self._credentials.get(username)
        if stored is None:
            return {"type": "error", "code": "unknown-user", "detail": f"no credential for {username!r}"}
        if datetime.datetime.now(datetime.timezone.utc) > stored.not_after:
            return {"type": "error", "code": "credential-expired", "detail": "stored credential retention passed"}
        try:
            user_key = load_private_key_pem(stored.key_pem)
            fresh = generate_keypair()
            csr = create_proxy_csr(subject_dn(stored.cert), fresh)
            from lgrid.pki import sign_proxy_csr

            proxy_cert = sign_proxy_csr(stored.cert, user_key, csr, lifetime)
            bundle = assemble_proxy_bundle(proxy_cert, fresh.private_key, stored.cert)
        except Exception as exc:
            return {"type": "error", "code": "derivation-failed", "detail": str(exc)}
        return {"type": "proxy", "bundle_pem": bundle.decode()}


class _MyProxyHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        simulator: MyProxySimulator = self.server.simulator  # type: ignore[attr-defined]
        try:
            hello = json.loads(read_frame(self.request).decode())
            reply, username = simulator.handle_hello(hello)
            self.request.sendall(encode_frame(json.dumps(reply).encode()))
            if username is None:
                return
            command = json.loads(read_frame(self.request).decode())
            result = simulator.handle_command(command, username, hello.get("passphrase", ""))
            self.request.sendall(encode_frame(json.dumps(result).encode()))
        except (ConnectionError, MessageError, json.JSONDecodeError):
            pass


class MyProxyServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
        super().__init__((host, port), _MyProxyHandler)
        self.simulator = MyProxySimulator()

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


# -- client operations --------------------------------------------------------


def _exchange(sock: socket.socket, doc: dict, transcript: Transcript, rtt_seconds: float) -> dict:
    frame = encode_frame(json.dumps(doc, separators=(",", ":")).encode())
    if rtt_seconds > 0:
        time.sleep(rtt_seconds)
    transcript.record_sent(frame, doc.get("type", ""))
    sock.sendall(frame)
    payload = read_frame(sock)
    reply = json.loads(payload.decode())
    transcript.record_received(encode_frame(payload), reply.get("type", ""))
    transcript.record_round_trip()
    if reply.get("type") == "error":
        raise MyProxyError(reply.get("code", "error"), reply.get("detail", ""))
    return reply


def _session(endpoint: tuple[str, int], username: str, passphrase: str, command: dict,
             transcript: Transcript, rtt_seconds: float) -> dict:
    with socket.create_connection(endpoint, timeout=30) as sock:
        transcript.record_connection()
        _exchange(sock, {"type": "hello", "username": username, "passphrase": passphrase},
                  transcript, rtt_seconds)
        return _exchange(sock, command, transcript, rtt_seconds)


def myproxy_put(
    endpoint: tuple[str, int],
    username: str,
    passphrase: str,
    credential_pem: bytes,
    retention: int = DEFAULT_RETENTION,
    rtt_seconds: float = 0.0,
) -> tuple[dict, Transcript]:
    """Upload a credential (cert + key PEM) for later retrieval.

    This is the step the embedded flow eliminates: the private key crosses
    the network and rests with the repository.
    """
    transcript = Transcript()
    reply = _session(
        endpoint, username, passphrase,
        {"type": "put", "credential_pem": credential_pem.decode(), "retention": retention},
        transcript, rtt_seconds,
    )
    return reply, transcript


def myproxy_get(
    endpoint: tuple[str, int],
    username: str,
    passphrase: str,
    lifetime: int = 12 * 3600,
    rtt_seconds: float = 0.0,
) -> tuple[bytes, Transcript]:
    """Retrieve a fresh short-lived proxy minted from the stored credential."""
    transcript = Transcript()
    reply = _session(
        endpoint, username, passphrase,
        {"type": "get", "lifetime": lifetime},
        transcript, rtt_seconds,
    )
    return reply["bundle_pem"].encode(), transcript
