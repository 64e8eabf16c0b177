"""Client side of the delegation handshake.

The client never sends key material: it receives a CSR, checks that the
requested subject really extends its own DN (rejecting substitution
attempts), signs the proxy certificate locally, and returns only the signed
certificate.
"""

from __future__ import annotations

from typing import Protocol

from cryptography import x509

from lgrid.delegation.messages import (
    Ack,
    CsrReply,
    DelegationMessage,
    Fault,
    Init,
    SignedProxy,
    decode_message,
    encode_frame,
    encode_message,
    decode_frame,
)
from lgrid.delegation.session import DelegationServer, PeerIdentity
from lgrid.delegation.transcript import Transcript
from lgrid.pki import cert_fingerprint, csr_subject_dn, sign_proxy_csr, subject_dn
from lgrid.pki.keys import PrivateKey
from cryptography.hazmat.primitives import serialization


class DelegationFault(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class DelegationChannel(Protocol):
    """One authenticated connection able to exchange delegation messages."""

    def connect(self, transcript: Transcript) -> None: ...

    def exchange(self, msg: DelegationMessage, transcript: Transcript) -> DelegationMessage: ...


class InProcessChannel:
    """Simulated secure channel: the harness injects the authenticated peer
    identity and messages go straight to a DelegationServer instance."""

    def __init__(self, server: DelegationServer, peer: PeerIdentity) -> None:
        self.server = server
        self.peer = peer

    def connect(self, transcript: Transcript) -> None:
        transcript.record_connection()

    def exchange(self, msg: DelegationMessage, transcript: Transcript) -> DelegationMessage:
        frame = encode_frame(encode_message(msg))
        transcript.record_sent(frame, type(msg).__name__)
        reply = self.server.handle_message(decode_message(decode_frame(frame)), self.peer)
        reply_frame = encode_frame(encode_message(reply))
        transcript.record_received(reply_frame, type(reply).__name__)
        transcript.record_round_trip()
        return reply


def client_delegate(
    channel: DelegationChannel,
    user_cert: x509.Certificate,
    user_key: PrivateKey,
    lifetime: int,
    legacy_proxy: bool = False,
    send_user_cert: bool = True,
) -> tuple[Ack, Transcript]:
    """Run the full handshake over `channel`, returning the server Ack and the
    transcript of every byte exchanged."""
    transcript = Transcript()
    channel.connect(transcript)
    own_dn = subject_dn(user_cert)

    init = Init(
        subject_dn=str(own_dn),
        user_cert_pem=user_cert.public_bytes(serialization.Encoding.PEM).decode()
        if send_user_cert
        else None,
    )
    reply = channel.exchange(init, transcript)
    if isinstance(reply, Fault):
        raise DelegationFault(reply.code, reply.detail)
    if not isinstance(reply, CsrReply):
        raise DelegationFault("protocol-error", f"expected CsrReply, got {type(reply).__name__}")

    try:
        csr = x509.load_pem_x509_csr(reply.csr_pem.encode())
    except ValueError as exc:
        raise DelegationFault("protocol-error", f"unparseable CSR: {exc}") from exc
    if not csr.is_signature_valid:
        raise DelegationFault("bad-csr", "CSR proof-of-possession does not verify")
    if not csr_subject_dn(csr).extends_by_one_cn(own_dn):
        raise DelegationFault(
            "substitution-attack",
            f"server asked to sign {csr_subject_dn(csr)}, which does not extend {own_dn}",
        )

    proxy_cert = sign_proxy_csr(user_cert, user_key, csr, lifetime, legacy_proxy=legacy_proxy)

    signed = SignedProxy(
        session_id=reply.session_id,
        proxy_cert_pem=proxy_cert.public_bytes(serialization.Encoding.PEM).decode(),
    )
    final = channel.exchange(signed, transcript)
    if isinstance(final, Fault):
        raise DelegationFault(final.code, final.detail)
    if not isinstance(final, Ack):
        raise DelegationFault("protocol-error", f"expected Ack, got {type(final).__name__}")
    if final.proxy_fingerprint != cert_fingerprint(proxy_cert):
        raise DelegationFault(
            "fingerprint-mismatch", "server acknowledged a different certificate"
        )
    return final, transcript
