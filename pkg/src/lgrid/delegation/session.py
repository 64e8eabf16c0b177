"""Server side of the delegation handshake.

One DelegationSession tracks one in-flight delegation: the server receives
the client's DN, answers with a CSR over a keypair it generated for this
exchange only, and accepts back the proxy certificate the client signed.
The session walks AWAIT_INIT -> AWAIT_SIGNED -> DONE, or FAILED from
anywhere; no other transitions exist.
"""

from __future__ import annotations

import enum
import secrets
import threading
import time
from dataclasses import dataclass, field

from cryptography import x509

from lgrid.delegation.messages import (
    Ack,
    CsrReply,
    DelegationMessage,
    Fault,
    Init,
    SignedProxy,
)
from lgrid.delegation.store import ProxyStore, StoreError
from lgrid.pki import (
    DistinguishedName,
    assemble_proxy_bundle,
    cert_fingerprint,
    create_proxy_csr,
    generate_keypair,
    parse_dn,
    subject_dn,
)
from lgrid.pki.certs import BundleError
from lgrid.pki.keys import KeyPair, same_public_key

DEFAULT_SESSION_TIMEOUT = 60.0


class SessionState(enum.Enum):
    AWAIT_INIT = "AWAIT_INIT"
    AWAIT_SIGNED = "AWAIT_SIGNED"
    DONE = "DONE"
    FAILED = "FAILED"


_ALLOWED_TRANSITIONS = {
    (SessionState.AWAIT_INIT, SessionState.AWAIT_SIGNED),
    (SessionState.AWAIT_INIT, SessionState.FAILED),
    (SessionState.AWAIT_SIGNED, SessionState.DONE),
    (SessionState.AWAIT_SIGNED, SessionState.FAILED),
    (SessionState.DONE, SessionState.FAILED),
}


@dataclass(frozen=True)
class PeerIdentity:
    """Identity the channel authenticated, if any.

    A mutually-authenticated channel supplies both DN and certificate; a
    server-auth-only channel (e.g. a browser client) supplies neither and
    the Init message must carry the user certificate instead.
    """

    dn: DistinguishedName | None = None
    cert: x509.Certificate | None = None


@dataclass
class DelegationSession:
    session_id: str
    peer: PeerIdentity
    deadline: float
    state: SessionState = SessionState.AWAIT_INIT
    fresh_keypair: KeyPair | None = None
    csr: x509.CertificateSigningRequest | None = None
    user_cert: x509.Certificate | None = None
    user_dn: DistinguishedName | None = None
    history: list[SessionState] = field(default_factory=list)

    def transition(self, to: SessionState) -> None:
        if (self.state, to) not in _ALLOWED_TRANSITIONS:
            raise RuntimeError(f"illegal session transition {self.state.value} -> {to.value}")
        self.state = to
        self.history.append(to)

    def expired(self, now: float | None = None) -> bool:
        return (now if now is not None else time.monotonic()) > self.deadline


class DelegationServer:
    """Holds delegation sessions and the proxy store they feed.

    `require_channel_identity` demands a channel-authenticated peer DN for
    every session (the mutual-TLS deployment posture); when off, Init must
    carry the user certificate and trust is established by the final chain
    validation instead.
    """

    def __init__(
        self,
        store: ProxyStore,
        session_timeout: float = DEFAULT_SESSION_TIMEOUT,
        require_channel_identity: bool = False,
    ) -> None:
        self.store = store
        self.session_timeout = session_timeout
        self.require_channel_identity = require_channel_identity
        self._sessions: dict[str, DelegationSession] = {}
        self._lock = threading.Lock()

    # -- session bookkeeping ------------------------------------------------

    def new_session(self, peer: PeerIdentity) -> DelegationSession:
        session = DelegationSession(
            session_id=secrets.token_hex(16),
            peer=peer,
            deadline=time.monotonic() + self.session_timeout,
        )
        with self._lock:
            self._prune_locked()
            self._sessions[session.session_id] = session
        return session

    def find_session(self, session_id: str) -> DelegationSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def _prune_locked(self) -> None:
        now = time.monotonic()
        dead = [sid for sid, s in self._sessions.items() if s.expired(now)]
        for sid in dead:
            del self._sessions[sid]

    # -- message handling ---------------------------------------------------

    def handle_message(self, msg: DelegationMessage, peer: PeerIdentity) -> DelegationMessage:
        """Route one client message, creating the session on Init."""
        if isinstance(msg, Init):
            session = self.new_session(peer)
            return self.handle_init(session, msg)
        if isinstance(msg, SignedProxy):
            session = self.find_session(msg.session_id)
            if session is None:
                return Fault(code="unknown-session", detail="no such delegation session")
            if session.peer.dn is not None and peer.dn != session.peer.dn:
                return self._fail(session, "peer-mismatch", "message from a different channel identity")
            return self.handle_signed_proxy(session, msg)
        return Fault(code="bad-message", detail=f"unexpected client message {type(msg).__name__}")

    def handle_init(self, session: DelegationSession, msg: Init) -> DelegationMessage:
        if session.state is not SessionState.AWAIT_INIT:
            return self._fail(session, "bad-state", f"Init in state {session.state.value}")
        if session.expired():
            return self._fail(session, "session-expired", "session deadline passed")

        try:
            claimed_dn = parse_dn(msg.subject_dn)
        except ValueError as exc:
            return self._fail(session, "bad-dn", str(exc))

        user_cert = session.peer.cert
        if msg.user_cert_pem:
            try:
                init_cert = x509.load_pem_x509_certificate(msg.user_cert_pem.encode())
            except ValueError as exc:
                return self._fail(session, "bad-cert", f"unparseable user certificate: {exc}")
            if user_cert is not None and init_cert != user_cert:
                return self._fail(session, "dn-mismatch", "Init certificate differs from the channel certificate")
            user_cert = init_cert

        if session.peer.dn is not None:
            if claimed_dn != session.peer.dn:
                return self._fail(
                    session,
                    "dn-mismatch",
                    f"Init claims {claimed_dn} but the channel authenticated {session.peer.dn}",
                )
        elif self.require_channel_identity:
            return self._fail(session, "channel-unauthenticated", "mutual authentication required")

        if user_cert is None:
            return self._fail(session, "missing-cert", "no user certificate from channel or Init")
        if subject_dn(user_cert) != claimed_dn:
            return self._fail(session, "dn-mismatch", "Init DN differs from the user certificate subject")

        session.user_cert = user_cert
        session.user_dn = claimed_dn
        session.fresh_keypair = generate_keypair()
        session.csr = create_proxy_csr(claimed_dn, session.fresh_keypair)
        session.transition(SessionState.AWAIT_SIGNED)
        from cryptography.hazmat.primitives import serialization

        return CsrReply(
            session_id=session.session_id,
            csr_pem=session.csr.public_bytes(serialization.Encoding.PEM).decode(),
        )

    def handle_signed_proxy(self, session: DelegationSession, msg: SignedProxy) -> DelegationMessage:
        if session.state is not SessionState.AWAIT_SIGNED:
            return self._fail(session, "bad-state", f"SignedProxy in state {session.state.value}")
        if session.expired():
            return self._fail(session, "session-expired", "session deadline passed")

        try:
            proxy_cert = x509.load_pem_x509_certificate(msg.proxy_cert_pem.encode())
        except ValueError as exc:
            return self._fail(session, "bad-cert", f"unparseable proxy certificate: {exc}")

        assert session.fresh_keypair is not None and session.user_cert is not None
        if not same_public_key(proxy_cert.public_key(), session.fresh_keypair.public_key):
            return self._fail(session, "key-mismatch", "proxy is not signed over this session's public key")

        try:
            bundle = assemble_proxy_bundle(
                proxy_cert, session.fresh_keypair.private_key, session.user_cert
            )
            stored = self.store.put(session.user_dn, bundle)
        except (BundleError, StoreError) as exc:
            return self._fail(session, "validation-failed", str(exc))

        session.transition(SessionState.DONE)
        return Ack(
            session_id=session.session_id,
            proxy_fingerprint=stored.fingerprint,
            not_after=stored.not_after.isoformat(),
        )

    def _fail(self, session: DelegationSession, code: str, detail: str) -> Fault:
        if session.state is not SessionState.FAILED:
            session.transition(SessionState.FAILED)
        return Fault(code=code, detail=detail)


def fingerprint_of_pem(cert_pem: str) -> str:
    return cert_fingerprint(x509.load_pem_x509_certificate(cert_pem.encode()))
