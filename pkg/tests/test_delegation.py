import itertools

import pytest

from lgrid.delegation import (
    Ack,
    CsrReply,
    DelegationFault,
    DelegationServer,
    Fault,
    Init,
    InProcessChannel,
    MessageError,
    PeerIdentity,
    ProxyStore,
    SessionState,
    SignedProxy,
    client_delegate,
    decode_frame,
    decode_message,
    encode_frame,
    encode_message,
    scan_for_key_material,
)
from lgrid.pki import (
    derive_user_id,
    generate_keypair,
    parse_proxy_bundle,
    validate_proxy_chain,
)
from lgrid.pki.identity import issue_user_cert

HOUR = 3600


@pytest.fixture()
def store(trust):
    return ProxyStore(trust)


@pytest.fixture()
def server(store):
    return DelegationServer(store)


def peer_for(identity):
    return PeerIdentity(dn=identity.dn, cert=identity.cert)


class TestMessages:
    def test_frame_roundtrip(self):
        msg = Init(subject_dn="/CN=Alice")
        frame = encode_frame(encode_message(msg))
        assert decode_message(decode_frame(frame)) == msg

    def test_all_variants_roundtrip(self):
        msgs = [
            Init(subject_dn="/CN=A", user_cert_pem="PEM"),
            CsrReply(session_id="s", csr_pem="PEM"),
            SignedProxy(session_id="s", proxy_cert_pem="PEM"),
            Ack(session_id="s", proxy_fingerprint="ff", not_after="2030-01-01T00:00:00+00:00"),
            Fault(code="x", detail="y"),
        ]
        for msg in msgs:
            assert decode_message(encode_message(msg)) == msg

    def test_unknown_type_rejected(self):
        with pytest.raises(MessageError, match="unknown message type"):
            decode_message(b'{"type":"steal-key"}')

    def test_extra_fields_rejected(self):
        with pytest.raises(MessageError, match="bad fields"):
            decode_message(b'{"type":"init","subject_dn":"/CN=A","private_key":"oops"}')

    def test_truncated_frame_rejected(self):
        frame = encode_frame(b"hello")
        with pytest.raises(MessageError, match="length mismatch"):
            decode_frame(frame[:-2])

    def test_no_variant_has_key_like_field(self):
        from lgrid.delegation import messages

        for cls in (messages.Init, messages.CsrReply, messages.SignedProxy, messages.Ack, messages.Fault):
            for field_name in cls.__dataclass_fields__:
                assert "key" not in field_name.lower()


class TestHappyPath:
    def test_delegation_stores_validating_bundle(self, server, store, trust, alice):
        channel = InProcessChannel(server, peer_for(alice))
        ack, transcript = client_delegate(channel, alice.cert, alice.keypair.private_key, 12 * HOUR)
        entry = store.get(derive_user_id(alice.dn))
        assert entry is not None
        assert entry.fingerprint == ack.proxy_fingerprint
        assert validate_proxy_chain(entry.bundle, trust).ok
        assert transcript.connection_count == 1
        assert transcript.round_trip_count == 2

    def test_transcript_never_carries_private_keys(self, server, alice):
        channel = InProcessChannel(server, peer_for(alice))
        _, transcript = client_delegate(channel, alice.cert, alice.keypair.private_key, HOUR)
        hits = scan_for_key_material(transcript, [alice.keypair.private_key])
        assert hits == []

    def test_second_delegation_replaces_bundle(self, server, store, alice):
        first, _ = client_delegate(
            InProcessChannel(server, peer_for(alice)), alice.cert, alice.keypair.private_key, HOUR
        )
        second, _ = client_delegate(
            InProcessChannel(server, peer_for(alice)), alice.cert, alice.keypair.private_key, HOUR
        )
        entry = store.get(derive_user_id(alice.dn))
        assert entry.fingerprint == second.proxy_fingerprint != first.proxy_fingerprint


class TestServerInit:
    def test_csr_subject_extends_peer_dn(self, server, alice):
        session = server.new_session(peer_for(alice))
        reply = server.handle_init(session, Init(subject_dn=str(alice.dn)))
        assert isinstance(reply, CsrReply)
        from cryptography import x509

        csr = x509.load_pem_x509_csr(reply.csr_pem.encode())
        from lgrid.pki import csr_subject_dn

        got = csr_subject_dn(csr)
        assert got.extends_by_one_cn(alice.dn)
        assert session.state is SessionState.AWAIT_SIGNED

    def test_dn_mismatch_faults(self, server, alice):
        session = server.new_session(peer_for(alice))
        reply = server.handle_init(session, Init(subject_dn="/CN=Bob"))
        assert isinstance(reply, Fault)
        assert reply.code == "dn-mismatch"
        assert session.state is SessionState.FAILED

    def test_second_init_faults_bad_state(self, server, alice):
        session = server.new_session(peer_for(alice))
        server.handle_init(session, Init(subject_dn=str(alice.dn)))
        reply = server.handle_init(session, Init(subject_dn=str(alice.dn)))
        assert isinstance(reply, Fault)
        assert reply.code == "bad-state"

    def test_expired_session_faults(self, store, alice):
        server = DelegationServer(store, session_timeout=-1)
        session = server.new_session(peer_for(alice))
        reply = server.handle_init(session, Init(subject_dn=str(alice.dn)))
        assert isinstance(reply, Fault)
        assert reply.code == "session-expired"


class TestServerSignedProxy:
    def _run_init(self, server, identity):
        session = server.new_session(peer_for(identity))
        reply = server.handle_init(session, Init(subject_dn=str(identity.dn)))
        assert isinstance(reply, CsrReply)
        return session, reply

    def _sign(self, identity, reply, lifetime=HOUR):
        from cryptography import x509

        from lgrid.pki import sign_proxy_csr

        csr = x509.load_pem_x509_csr(reply.csr_pem.encode())
        return sign_proxy_csr(identity.cert, identity.keypair.private_key, csr, lifetime)

    def test_ack_and_store(self, server, store, alice):
        session, reply = self._run_init(server, alice)
        cert = self._sign(alice, reply)
        from cryptography.hazmat.primitives import serialization

        msg = SignedProxy(session_id=session.session_id, proxy_cert_pem=cert.public_bytes(serialization.Encoding.PEM).decode())
        ack = server.handle_signed_proxy(session, msg)
        assert isinstance(ack, Ack)
        assert store.get(derive_user_id(alice.dn)) is not None
        assert session.state is SessionState.DONE

    def test_cert_over_wrong_key_faults(self, server, alice):
        session, _reply = self._run_init(server, alice)
        # sign a *different* session's CSR: public key won't match this session
        session2, reply2 = self._run_init(server, alice)
        cert = self._sign(alice, reply2)
        from cryptography.hazmat.primitives import serialization

        msg = SignedProxy(session_id=session.session_id, proxy_cert_pem=cert.public_bytes(serialization.Encoding.PEM).decode())
        fault = server.handle_signed_proxy(session, msg)
        assert isinstance(fault, Fault)
        assert fault.code == "key-mismatch"

    def test_replay_after_done_faults(self, server, alice):
        session, reply = self._run_init(server, alice)
        cert = self._sign(alice, reply)
        from cryptography.hazmat.primitives import serialization

        msg = SignedProxy(session_id=session.session_id, proxy_cert_pem=cert.public_bytes(serialization.Encoding.PEM).decode())
        assert isinstance(server.handle_signed_proxy(session, msg), Ack)
        replay = server.handle_signed_proxy(session, msg)
        assert isinstance(replay, Fault)
        assert replay.code == "bad-state"


class TestSubstitutionDefense:
    def test_client_aborts_on_foreign_csr(self, store, alice, bob):
        class SwappingServer(DelegationServer):
            # a malicious service asking the client to sign Bob's delegation
            def handle_init(self, session, msg):
                reply = super().handle_init(session, Init(subject_dn=msg.subject_dn, user_cert_pem=msg.user_cert_pem))
                assert isinstance(reply, CsrReply)
                from lgrid.pki import create_proxy_csr

                foreign = create_proxy_csr(bob.dn, generate_keypair())
                from cryptography.hazmat.primitives import serialization

                return CsrReply(
                    session_id=reply.session_id,
                    csr_pem=foreign.public_bytes(serialization.Encoding.PEM).decode(),
                )

        channel = InProcessChannel(SwappingServer(store), peer_for(alice))
        with pytest.raises(DelegationFault) as err:
            client_delegate(channel, alice.cert, alice.keypair.private_key, HOUR)
        assert err.value.code == "substitution-attack"


class TestSessionSafety:
    def test_no_undeclared_transition_over_short_sequences(self, store, alice):
        """Exhaustively drive sessions with message sequences of length <= 4."""
        vocabulary = ["init", "init-bad-dn", "signed-garbage", "signed-valid"]
        declared = {
            (SessionState.AWAIT_INIT, SessionState.AWAIT_SIGNED),
            (SessionState.AWAIT_INIT, SessionState.FAILED),
            (SessionState.AWAIT_SIGNED, SessionState.DONE),
            (SessionState.AWAIT_SIGNED, SessionState.FAILED),
            (SessionState.DONE, SessionState.FAILED),
        }
        for length in range(1, 5):
            for sequence in itertools.product(vocabulary, repeat=length):
                server = DelegationServer(store)
                session = server.new_session(peer_for(alice))
                last_csr_reply = None
                for step in sequence:
                    if step == "init":
                        reply = server.handle_init(session, Init(subject_dn=str(alice.dn)))
                        if isinstance(reply, CsrReply):
                            last_csr_reply = reply
                    elif step == "init-bad-dn":
                        server.handle_init(session, Init(subject_dn="/CN=Nobody"))
                    elif step == "signed-garbage":
                        server.handle_signed_proxy(
                            session, SignedProxy(session_id=session.session_id, proxy_cert_pem="junk")
                        )
                    elif step == "signed-valid" and last_csr_reply is not None:
                        from cryptography import x509
                        from cryptography.hazmat.primitives import serialization

                        from lgrid.pki import sign_proxy_csr

                        csr = x509.load_pem_x509_csr(last_csr_reply.csr_pem.encode())
                        cert = sign_proxy_csr(alice.cert, alice.keypair.private_key, csr, HOUR)
                        server.handle_signed_proxy(
                            session,
                            SignedProxy(
                                session_id=session.session_id,
                                proxy_cert_pem=cert.public_bytes(serialization.Encoding.PEM).decode(),
                            ),
                        )
                observed = [SessionState.AWAIT_INIT] + session.history
                for frm, to in zip(observed, observed[1:]):
                    assert (frm, to) in declared, f"undeclared {frm} -> {to} via {sequence}"


class TestUnauthenticatedChannel:
    def test_init_cert_establishes_identity(self, store, trust, alice):
        server = DelegationServer(store)
        channel = InProcessChannel(server, PeerIdentity())
        ack, _ = client_delegate(channel, alice.cert, alice.keypair.private_key, HOUR)
        assert store.get(derive_user_id(alice.dn)).fingerprint == ack.proxy_fingerprint

    def test_forged_cert_cannot_store_under_victim_dn(self, store, ca, alice):
        # self-issued certificate claiming Alice's DN, not signed by the CA
        from lgrid.pki.identity import create_ca

        fake_ca = create_ca("/C=XX/O=Evil/CN=Fake CA")
        imposter = issue_user_cert(fake_ca, alice.dn)
        server = DelegationServer(store)
        channel = InProcessChannel(server, PeerIdentity())
        with pytest.raises(DelegationFault) as err:
            client_delegate(channel, imposter.cert, imposter.keypair.private_key, HOUR)
        assert err.value.code == "validation-failed"
        assert store.get(derive_user_id(alice.dn)) is None

    def test_required_channel_identity_rejects_bare_init(self, store, alice):
        server = DelegationServer(store, require_channel_identity=True)
        channel = InProcessChannel(server, PeerIdentity())
        with pytest.raises(DelegationFault) as err:
            client_delegate(channel, alice.cert, alice.keypair.private_key, HOUR)
        assert err.value.code == "channel-unauthenticated"


class TestKeyLeakProperty:
    def test_randomized_delegations_never_leak_keys(self, trust, ca):
        import random

        rng = random.Random(20260809)
        store = ProxyStore(trust)
        server = DelegationServer(store)
        for i in range(25):
            algorithm = "rsa-2048" if rng.random() < 0.1 else "ec-p256"
            user = issue_user_cert(ca, f"/C=IT/O=Rand/CN=user{i}", algorithm=algorithm)
            lifetime = rng.randint(600, 24 * HOUR)
            channel = InProcessChannel(server, peer_for(user))
            _, transcript = client_delegate(channel, user.cert, user.keypair.private_key, lifetime)
            entry = store.get(derive_user_id(user.dn))
            proxy_key = parse_proxy_bundle(entry.bundle).proxy_key
            hits = scan_for_key_material(transcript, [user.keypair.private_key, proxy_key])
            assert hits == []
