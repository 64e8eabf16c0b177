import datetime
from dataclasses import dataclass

import pytest

from lgrid.delegation import ProxyStore, RenewalPolicy, renew_if_needed, scan_for_key_material
from lgrid.delegation.myproxy import MyProxyError, MyProxyServer, myproxy_get, myproxy_put
from lgrid.pki import derive_user_id, parse_proxy_bundle, subject_dn, validate_proxy_chain


@pytest.fixture()
def myproxy():
    server = MyProxyServer(port=0)
    server.start()
    yield server
    server.shutdown()
    server.server_close()


def credential_pem(identity) -> bytes:
    return identity.cert_pem() + identity.key_pem()


class TestPutGet:
    def test_put_then_get_yields_validating_bundle(self, myproxy, alice, trust):
        receipt, _ = myproxy_put(myproxy.endpoint, "alice", "s3cret", credential_pem(alice))
        assert receipt["type"] == "put-ok"
        bundle, _ = myproxy_get(myproxy.endpoint, "alice", "s3cret", lifetime=3600)
        report = validate_proxy_chain(bundle, trust)
        assert report.ok, str(report)
        # chain roots in the stored credential
        assert parse_proxy_bundle(bundle).user_cert == alice.cert

    def test_get_with_wrong_passphrase(self, myproxy, alice):
        myproxy_put(myproxy.endpoint, "alice", "s3cret", credential_pem(alice))
        with pytest.raises(MyProxyError) as err:
            myproxy_get(myproxy.endpoint, "alice", "wrong")
        assert err.value.code == "bad-passphrase"

    def test_get_unknown_user(self, myproxy):
        with pytest.raises(MyProxyError) as err:
            myproxy_get(myproxy.endpoint, "nobody", "x")
        assert err.value.code == "unknown-user"

    def test_get_after_retention_expiry(self, myproxy, alice):
        import time

        myproxy_put(myproxy.endpoint, "alice", "pw", credential_pem(alice), retention=1)
        time.sleep(1.2)
        with pytest.raises(MyProxyError) as err:
            myproxy_get(myproxy.endpoint, "alice", "pw")
        assert err.value.code == "credential-expired"

    def test_each_operation_is_one_connection_two_round_trips(self, myproxy, alice):
        _, put_transcript = myproxy_put(myproxy.endpoint, "alice", "pw", credential_pem(alice))
        _, get_transcript = myproxy_get(myproxy.endpoint, "alice", "pw")
        for transcript in (put_transcript, get_transcript):
            assert transcript.connection_count == 1
            assert transcript.round_trip_count == 2

    def test_legacy_flow_ships_the_private_key(self, myproxy, alice):
        # the baseline's defining weakness, visible in its own transcript
        _, transcript = myproxy_put(myproxy.endpoint, "alice", "pw", credential_pem(alice))
        hits = scan_for_key_material(transcript, [alice.keypair.private_key])
        assert hits != []


@dataclass
class FakeJob:
    id: str
    owner_user_id: str


def put_bundle_in_store(store, myproxy_server, identity, username, passphrase, lifetime):
    myproxy_put(myproxy_server.endpoint, username, passphrase, credential_pem(identity))
    bundle, _ = myproxy_get(myproxy_server.endpoint, username, passphrase, lifetime=lifetime)
    entry = store.put(identity.dn, bundle)
    store.set_renewal_credentials(entry.user_id, username, passphrase)
    return entry


class TestRenewal:
    def test_expiring_proxy_renewed_via_endpoint(self, myproxy, trust, alice):
        store = ProxyStore(trust)
        entry = put_bundle_in_store(store, myproxy, alice, "alice", "pw", lifetime=20 * 60)
        policy = RenewalPolicy(threshold=30 * 60, endpoint=myproxy.endpoint, lifetime=12 * 3600)
        jobs = [FakeJob(id="j1", owner_user_id=entry.user_id)]
        actions = renew_if_needed(store, jobs, policy)
        assert [a.kind for a in actions] == ["renewed"]
        assert store.get(entry.user_id).not_after > entry.not_after

    def test_far_future_proxy_untouched(self, myproxy, trust, alice):
        store = ProxyStore(trust)
        entry = put_bundle_in_store(store, myproxy, alice, "alice", "pw", lifetime=2 * 3600)
        policy = RenewalPolicy(threshold=30 * 60, endpoint=myproxy.endpoint)
        actions = renew_if_needed(store, [FakeJob("j1", entry.user_id)], policy)
        assert actions == []

    def test_endpoint_down_keeps_old_bundle(self, myproxy, trust, alice):
        store = ProxyStore(trust)
        entry = put_bundle_in_store(store, myproxy, alice, "alice", "pw", lifetime=20 * 60)
        dead_endpoint = ("127.0.0.1", 1)
        policy = RenewalPolicy(threshold=30 * 60, endpoint=dead_endpoint)
        actions = renew_if_needed(store, [FakeJob("j1", entry.user_id)], policy)
        assert [a.kind for a in actions] == ["renewal-failed"]
        assert store.get(entry.user_id).fingerprint == entry.fingerprint

    def test_no_endpoint_emits_unrenewable(self, myproxy, trust, alice):
        store = ProxyStore(trust)
        entry = put_bundle_in_store(store, myproxy, alice, "alice", "pw", lifetime=20 * 60)
        policy = RenewalPolicy(threshold=30 * 60, endpoint=None)
        actions = renew_if_needed(store, [FakeJob("j1", entry.user_id)], policy)
        assert [a.kind for a in actions] == ["expiring-unrenewable"]

    def test_lapsed_proxy_reported_expired(self, myproxy, trust, alice):
        store = ProxyStore(trust)
        entry = put_bundle_in_store(store, myproxy, alice, "alice", "pw", lifetime=10 * 60)
        after_expiry = entry.not_after + datetime.timedelta(seconds=1)
        policy = RenewalPolicy(threshold=5 * 60, endpoint=myproxy.endpoint)
        actions = renew_if_needed(store, [FakeJob("j1", entry.user_id)], policy, now=after_expiry)
        assert [a.kind for a in actions] == ["proxy-expired"]

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            RenewalPolicy(threshold=0)


class TestEconomicsByConstruction:
    def test_external_flow_doubles_connections_and_round_trips(self, myproxy, trust, alice):
        from lgrid.delegation import DelegationServer, InProcessChannel, PeerIdentity, client_delegate

        store = ProxyStore(trust)
        server = DelegationServer(store)
        channel = InProcessChannel(server, PeerIdentity(dn=alice.dn, cert=alice.cert))
        _, embedded = client_delegate(channel, alice.cert, alice.keypair.private_key, 3600)

        _, put_t = myproxy_put(myproxy.endpoint, "alice", "pw", credential_pem(alice))
        _, get_t = myproxy_get(myproxy.endpoint, "alice", "pw")
        external_connections = put_t.connection_count + get_t.connection_count
        external_round_trips = put_t.round_trip_count + get_t.round_trip_count

        assert external_connections == 2
        assert external_round_trips == 4
        assert embedded.connection_count < external_connections
        assert embedded.round_trip_count < external_round_trips
