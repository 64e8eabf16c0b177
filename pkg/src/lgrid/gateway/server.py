"""The portal HTTP service.

One port carries both the delegation handshake (POST /delegate, framed
messages) and the job API (JSON + multipart).  Job sandboxes travel as
compressed tar streams with content type application/gzip.
"""

from __future__ import annotations

import json
import logging
import ssl
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from cryptography import x509

from lgrid.delegation import (
    Ack,
    DelegationServer,
    Fault,
    MessageError,
    PeerIdentity,
    ProxyStore,
    RenewalPolicy,
    decode_frame,
    decode_message,
    encode_frame,
    encode_message,
    renew_if_needed,
)
from lgrid.delegation.myproxy import MyProxyError, myproxy_get
from lgrid.gateway.auth import Authorizer, TokenTable, VoPolicy
from lgrid.gateway.config import GatewayConfig
from lgrid.httputil import parse_multipart
from lgrid.jobs import (
    JdlError,
    JobManager,
    JobRecord,
    LocalExecutor,
    NotAuthorizedError,
    NotOwnerError,
    SandboxError,
    ScriptedExecutor,
    UnknownJobError,
    WrongStateError,
    state_color,
)
from lgrid.pki import TrustStore, parse_proxy_bundle, subject_dn

logger = logging.getLogger(__name__)

_FAULT_STATUS = {
    "dn-mismatch": 403,
    "peer-mismatch": 403,
    "channel-unauthenticated": 403,
    "bad-state": 409,
    "unknown-session": 404,
}


def _job_view(record: JobRecord) -> dict:
    return {
        "id": record.id,
        "state": record.state.value,
        "color": state_color(record.state),
        "submitted_at": record.history[0].at.isoformat(),
        "last_update": record.history[-1].at.isoformat(),
    }


def _job_detail(record: JobRecord) -> dict:
    view = _job_view(record)
    view.update(
        {
            "history": [
                {"state": e.state.value, "at": e.at.isoformat(), "reason": e.reason}
                for e in record.history
            ],
            "exit_code": record.exit_code,
            "batch_tag": record.batch_tag,
            "owner_dn": record.owner_dn,
        }
    )
    return view


class Gateway:
    """Wires the proxy store, delegation server, job manager and authorization
    behind one HTTP(S) listener."""

    def __init__(self, config: GatewayConfig, trust: TrustStore | None = None) -> None:
        self.config = config
        state_root = Path(config.state_root)
        state_root.mkdir(parents=True, exist_ok=True)

        if trust is None:
            trust = TrustStore()
            if config.ca_file:
                pem = Path(config.ca_file).read_bytes()
                for cert in x509.load_pem_x509_certificates(pem):
                    trust.add(cert)
        self.trust = trust

        self.proxy_store = ProxyStore(
            trust,
            root=state_root / "proxies",
            require_proxy_extension=not config.legacy_proxy,
        )
        self.delegation = DelegationServer(
            self.proxy_store,
            session_timeout=config.session_timeout,
            require_channel_identity=config.require_client_cert,
        )
        if config.executor_kind == "scripted":
            executor = ScriptedExecutor(stage_delay=config.executor_stage_delay)
        else:
            executor = LocalExecutor()
        self.manager = JobManager(
            state_root,
            host=config.hostname,
            executor=executor,
            proxy_store=self.proxy_store,
        )
        self.tokens = TokenTable(state_root / "journal.log")
        self.policy = VoPolicy(config.vo_rules)
        self.authorizer = Authorizer(self.tokens, self.proxy_store, self.policy)

        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._renewal_stop = threading.Event()
        self._renewal_thread: threading.Thread | None = None

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        handler = type("BoundHandler", (_Handler,), {"gateway": self})
        self._httpd = ThreadingHTTPServer((self.config.host, self.config.port), handler)
        if self.config.tls_cert:
            context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            context.load_cert_chain(str(self.config.tls_cert), str(self.config.tls_key))
            if self.config.ca_file:
                context.load_verify_locations(str(self.config.ca_file))
                context.verify_mode = (
                    ssl.CERT_REQUIRED if self.config.require_client_cert else ssl.CERT_OPTIONAL
                )
            self._httpd.socket = context.wrap_socket(self._httpd.socket, server_side=True)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        if self.config.renewal_enabled:
            self._renewal_thread = threading.Thread(target=self._renewal_loop, daemon=True)
            self._renewal_thread.start()
        logger.info("gateway listening on %s", self.base_url)

    def shutdown(self) -> None:
        self._renewal_stop.set()
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    @property
    def port(self) -> int:
        assert self._httpd is not None, "gateway not started"
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        scheme = "https" if self.config.tls_cert else "http"
        return f"{scheme}://{self.config.host}:{self.port}"

    # -- renewal sweep ----------------------------------------------------------

    def _renewal_loop(self) -> None:
        policy = RenewalPolicy(
            threshold=self.config.renewal_threshold,
            check_interval=self.config.renewal_check_interval,
            endpoint=self.config.myproxy_endpoint,
            lifetime=self.config.renewal_lifetime,
        )
        while not self._renewal_stop.wait(policy.check_interval):
            self.renewal_sweep(policy)

    def renewal_sweep(self, policy: RenewalPolicy) -> list:
        actions = renew_if_needed(self.proxy_store, self.manager.active_jobs(), policy)
        for action in actions:
            logger.info("renewal: %s for %s (%s)", action.kind, action.user_id, action.detail)
            if action.kind == "proxy-expired":
                for job_id in action.job_ids:
                    self.manager.abort(job_id, "proxy-expired")
        return actions

    # -- request-level operations ----------------------------------------------

    def delegate_frame(self, frame: bytes, peer: PeerIdentity) -> tuple[int, bytes, str | None]:
        """Handle one delegation frame; returns (status, reply frame, token)."""
        try:
            message = decode_message(decode_frame(frame))
        except MessageError as exc:
            reply = Fault(code="bad-frame", detail=str(exc))
            return 400, encode_frame(encode_message(reply)), None
        reply = self.delegation.handle_message(message, peer)
        token = None
        status = 200
        if isinstance(reply, Fault):
            status = _FAULT_STATUS.get(reply.code, 400)
        elif isinstance(reply, Ack):
            session = self.delegation.find_session(reply.session_id)
            if session is not None and session.user_dn is not None:
                from lgrid.pki import derive_user_id

                api_session = self.tokens.issue(
                    derive_user_id(session.user_dn), str(session.user_dn)
                )
                token = api_session.token
        return status, encode_frame(encode_message(reply)), token

    def fetch_external_credential(
        self, username: str, passphrase: str, lifetime: int
    ) -> tuple[dict, dict]:
        """Legacy route: pull a proxy from the external repository, store it,
        and issue a token.  Returns (session info, transcript stats)."""
        endpoint = self.config.myproxy_endpoint
        if endpoint is None:
            raise MyProxyError("myproxy-not-configured", "no external repository configured")
        bundle, transcript = myproxy_get(
            endpoint,
            username,
            passphrase,
            lifetime=lifetime,
            rtt_seconds=self.config.myproxy_rtt_ms / 1000.0,
        )
        dn = subject_dn(parse_proxy_bundle(bundle).user_cert)
        entry = self.proxy_store.put(dn, bundle)
        self.proxy_store.set_renewal_credentials(entry.user_id, username, passphrase)
        session = self.tokens.issue(entry.user_id, str(dn))
        stats = {
            "connections": transcript.connection_count,
            "round_trips": transcript.round_trip_count,
            "bytes": transcript.total_bytes,
        }
        return {"token": session.token, "dn": str(dn), "user_id": entry.user_id}, stats


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "lgrid-gateway"
    gateway: Gateway  # injected by Gateway.start()

    # -- plumbing ---------------------------------------------------------------

    def log_message(self, format: str, *args) -> None:
        logger.debug("%s - %s", self.address_string(), format % args)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _reply(self, status: int, body: bytes, content_type: str, headers: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Expose-Headers", "X-LGRID-Token")
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, doc: dict | list, headers: dict | None = None) -> None:
        self._reply(status, json.dumps(doc).encode(), "application/json", headers)

    def _error(self, status: int, reason: str, detail: str = "") -> None:
        self._json(status, {"error": reason, "detail": detail})

    def _peer_identity(self) -> PeerIdentity:
        connection = self.connection
        if isinstance(connection, ssl.SSLSocket):
            der = connection.getpeercert(binary_form=True)
            if der:
                cert = x509.load_der_x509_certificate(der)
                return PeerIdentity(dn=subject_dn(cert), cert=cert)
        return PeerIdentity()

    def _bearer_token(self) -> str | None:
        header = self.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            return header[len("Bearer ") :].strip()
        return None

    def _authorized(self, operation: str):
        decision = self.gateway.authorizer.authorize(self._bearer_token(), operation)
        if decision.allow:
            return decision.session
        if decision.reason in ("missing-token", "invalid-token"):
            self._error(401, decision.reason)
        else:
            self._error(403, decision.reason)
        return None

    # -- routes -------------------------------------------------------------------

    def do_OPTIONS(self) -> None:  # CORS preflight for the browser client
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.send_header("Access-Control-Expose-Headers", "X-LGRID-Token")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["ping"]:
            self._json(200, {"service": "lgrid-gateway", "version": 1})
        elif parts == ["jobs"]:
            self._list_jobs()
        elif len(parts) == 2 and parts[0] == "jobs":
            self._job_status(parts[1])
        elif len(parts) == 3 and parts[0] == "jobs" and parts[2] == "output":
            self._job_output(parts[1])
        else:
            self._error(404, "no-such-endpoint", self.path)

    def do_POST(self) -> None:
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["delegate"]:
            self._delegate()
        elif parts == ["jobs"]:
            self._submit()
        else:
            self._error(404, "no-such-endpoint", self.path)

    def do_DELETE(self) -> None:
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) == 2 and parts[0] == "jobs":
            self._cancel(parts[1])
        else:
            self._error(404, "no-such-endpoint", self.path)

    # -- handlers -------------------------------------------------------------------

    def _delegate(self) -> None:
        status, reply_frame, token = self.gateway.delegate_frame(self._body(), self._peer_identity())
        headers = {"X-LGRID-Token": token} if token else None
        self._reply(status, reply_frame, "application/octet-stream", headers)

    def _submit(self) -> None:
        content_type = self.headers.get("Content-Type", "")
        if not content_type.startswith("multipart/form-data"):
            self._error(400, "bad-content-type", "expected multipart/form-data")
            return
        try:
            fields = parse_multipart(self._body(), content_type)
        except ValueError as exc:
            self._error(400, "bad-multipart", str(exc))
            return
        jdl = fields.get("jdl", b"").decode("utf-8", errors="replace")
        input_archive = fields.get("input")

        issued = None
        credential_fetch = None
        if "myproxy_user" in fields:
            try:
                issued, credential_fetch = self.gateway.fetch_external_credential(
                    fields["myproxy_user"].decode(),
                    fields.get("myproxy_pass", b"").decode(),
                    int(fields.get("myproxy_lifetime", b"43200").decode() or 43200),
                )
            except MyProxyError as exc:
                self._error(403, exc.code, exc.detail)
                return
            except Exception as exc:
                self._error(403, "credential-fetch-failed", str(exc))
                return
            session = self.gateway.tokens.lookup(issued["token"])
            allowed, reason, _vo = self.gateway.policy.check(session.dn, None, "submit")
            if not allowed:
                self._error(403, reason)
                return
        else:
            session = self._authorized("submit")
            if session is None:
                return

        try:
            records = self.gateway.manager.submit(jdl, session.dn, input_archive)
        except NotAuthorizedError as exc:
            self._error(403, "not-authorized", str(exc))
            return
        except (JdlError, SandboxError) as exc:
            self._error(400, "bad-request", str(exc))
            return
        body = {"job_ids": [r.id for r in records]}
        if issued is not None:
            body["token"] = issued["token"]
            body["credential_fetch"] = credential_fetch
        self._json(201, body)

    def _list_jobs(self) -> None:
        session = self._authorized("status")
        if session is None:
            return
        records = self.gateway.manager.list_for_user(session.user_id)
        self._json(200, [_job_view(r) for r in records])

    def _with_job(self, uuid_part: str, session):
        job_id = f"lgrid://{self.gateway.config.hostname}/{uuid_part}"
        try:
            record = self.gateway.manager.get(job_id)
        except UnknownJobError:
            self._error(404, "unknown-job", job_id)
            return None
        if record.owner_user_id != session.user_id:
            self._error(403, "not-owner")
            return None
        return record

    def _job_status(self, uuid_part: str) -> None:
        session = self._authorized("status")
        if session is None:
            return
        record = self._with_job(uuid_part, session)
        if record is None:
            return
        self._json(200, _job_detail(record))

    def _job_output(self, uuid_part: str) -> None:
        session = self._authorized("output")
        if session is None:
            return
        record = self._with_job(uuid_part, session)
        if record is None:
            return
        try:
            archive = self.gateway.manager.fetch_output(record.id, session.dn)
        except WrongStateError as exc:
            self._error(409, "wrong-state", str(exc))
            return
        except NotOwnerError:
            self._error(403, "not-owner")
            return
        self._reply(200, archive, "application/gzip")

    def _cancel(self, uuid_part: str) -> None:
        session = self._authorized("cancel")
        if session is None:
            return
        record = self._with_job(uuid_part, session)
        if record is None:
            return
        try:
            cancelled = self.gateway.manager.cancel(record.id, session.dn)
        except WrongStateError as exc:
            self._error(409, "wrong-state", str(exc))
            return
        except NotOwnerError:
            self._error(403, "not-owner")
            return
        self._json(200, _job_detail(cancelled))
