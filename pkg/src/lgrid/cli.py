"""Command-line client for the portal, plus server entry points.

Exit codes: 0 success, 1 missing file or I/O failure, 2 authentication
failure (wrong passphrase, rejected credentials), 3 gateway unreachable,
4 delegation security fault, 5 unknown job, 6 illegal job state,
7 invalid input (bad JDL or sandbox).
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import socket
import sys
import time
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import serialization

from lgrid.client import GatewayClient, GatewayError
from lgrid.delegation.client import DelegationFault
from lgrid.pki import CredentialError, convert_credential_container

EXIT_OK = 0
EXIT_IO = 1
EXIT_AUTH = 2
EXIT_UNREACHABLE = 3
EXIT_SECURITY = 4
EXIT_UNKNOWN_JOB = 5
EXIT_STATE = 6
EXIT_BAD_INPUT = 7

DEFAULT_GATEWAY = "http://127.0.0.1:8443"


def token_cache_path() -> Path:
    return Path.home() / ".lgrid" / "token"


class CliFailure(Exception):
    def __init__(self, exit_code: int, message: str) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def _gateway_url(args: argparse.Namespace) -> str:
    return args.gateway or os.environ.get("LGRID_GATEWAY") or DEFAULT_GATEWAY


def _cache_token(token: str) -> None:
    cache = token_cache_path()
    cache.parent.mkdir(parents=True, exist_ok=True)
    cache.touch(exist_ok=True)
    cache.chmod(0o600)
    cache.write_text(token + "\n")


def _cached_token() -> str | None:
    cache = token_cache_path()
    if cache.exists():
        token = cache.read_text().strip()
        return token or None
    return None


def _client(args: argparse.Namespace) -> GatewayClient:
    return GatewayClient(
        _gateway_url(args),
        ca_file=getattr(args, "ca", None),
        token=getattr(args, "token", None) or _cached_token(),
    )


def _map_gateway_error(error: GatewayError) -> CliFailure:
    if error.status == 401 or error.reason in ("bad-passphrase", "unknown-user"):
        return CliFailure(EXIT_AUTH, str(error))
    if error.status == 403:
        return CliFailure(EXIT_AUTH, str(error))
    if error.status == 404:
        return CliFailure(EXIT_UNKNOWN_JOB, str(error))
    if error.status == 409:
        return CliFailure(EXIT_STATE, str(error))
    if error.status == 400:
        return CliFailure(EXIT_BAD_INPUT, str(error))
    return CliFailure(EXIT_IO, str(error))


# -- commands -------------------------------------------------------------------


def cmd_convert(args: argparse.Namespace) -> int:
    p12_path = Path(args.p12)
    if not p12_path.is_file():
        raise CliFailure(EXIT_IO, f"no such file: {p12_path}")
    passphrase = args.passphrase if args.passphrase is not None else getpass.getpass("container passphrase: ")
    try:
        cert_pem, key_pem = convert_credential_container(p12_path.read_bytes(), passphrase)
    except CredentialError as exc:
        raise CliFailure(EXIT_AUTH, str(exc)) from exc
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cert_file = out_dir / "usercert.pem"
    key_file = out_dir / "userkey.pem"
    cert_file.write_bytes(cert_pem)
    cert_file.chmod(0o644)
    fd = os.open(key_file, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as stream:
        stream.write(key_pem)
    print(f"wrote {cert_file}")
    print(f"wrote {key_file} (owner-only)")
    return EXIT_OK


def cmd_delegate(args: argparse.Namespace) -> int:
    cert_path, key_path = Path(args.cert), Path(args.key)
    for path in (cert_path, key_path):
        if not path.is_file():
            raise CliFailure(EXIT_IO, f"no such file: {path}")
    user_cert = x509.load_pem_x509_certificate(cert_path.read_bytes())
    user_key = serialization.load_pem_private_key(key_path.read_bytes(), password=None)
    client = _client(args)
    try:
        ack, token, transcript = client.delegate(user_cert, user_key, args.lifetime)
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    except DelegationFault as exc:
        if exc.code == "substitution-attack":
            raise CliFailure(
                EXIT_SECURITY,
                "delegation aborted: the service asked this client to sign a foreign subject "
                f"({exc.detail})",
            ) from exc
        raise CliFailure(EXIT_SECURITY, f"delegation fault: {exc}") from exc
    finally:
        client.close()
    print(f"proxy fingerprint: {ack.proxy_fingerprint}")
    print(f"valid until:       {ack.not_after}")
    if token:
        _cache_token(token)
        print(f"token cached at {token_cache_path()}")
    print(f"round trips: {transcript.round_trip_count}, bytes: {transcript.total_bytes}")
    return EXIT_OK


def cmd_submit(args: argparse.Namespace) -> int:
    jdl_path = Path(args.jdl)
    if not jdl_path.is_file():
        raise CliFailure(EXIT_IO, f"no such file: {jdl_path}")
    archive = None
    if args.input:
        from lgrid.jobs import SandboxError, pack_paths

        try:
            archive = pack_paths(args.input)
        except SandboxError as exc:
            raise CliFailure(EXIT_BAD_INPUT, str(exc)) from exc
    client = _client(args)
    try:
        doc = client.submit(jdl_path.read_text(), archive)
    except GatewayError as exc:
        raise _map_gateway_error(exc) from exc
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    finally:
        client.close()
    for job_id in doc["job_ids"]:
        print(job_id)
    return EXIT_OK


def _print_job_line(job: dict) -> None:
    print(f"{job['id']}  {job['state']}  [{job['color']}]")


def cmd_status(args: argparse.Namespace) -> int:
    client = _client(args)
    try:
        if args.all:
            for job in client.jobs():
                _print_job_line(job)
        else:
            job = client.job_status(args.id)
            _print_job_line(job)
            if args.verbose:
                for entry in job.get("history", []):
                    print(f"  {entry['at']}  {entry['state']}  {entry['reason']}")
    except GatewayError as exc:
        raise _map_gateway_error(exc) from exc
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    finally:
        client.close()
    return EXIT_OK


def cmd_watch(args: argparse.Namespace) -> int:
    client = _client(args)
    try:
        while True:
            job = client.job_status(args.id)
            _print_job_line(job)
            if job["state"] in ("DONE_OK", "DONE_FAILED", "ABORTED", "CANCELLED", "CLEARED"):
                return EXIT_OK
            time.sleep(args.interval)
    except GatewayError as exc:
        raise _map_gateway_error(exc) from exc
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    finally:
        client.close()


def cmd_output(args: argparse.Namespace) -> int:
    from lgrid.jobs import unpack_into

    client = _client(args)
    try:
        archive = client.job_output(args.id)
    except GatewayError as exc:
        raise _map_gateway_error(exc) from exc
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    finally:
        client.close()
    written = unpack_into(archive, args.dest)
    for name in written:
        print(f"{args.dest}/{name}")
    return EXIT_OK


def cmd_cancel(args: argparse.Namespace) -> int:
    client = _client(args)
    try:
        job = client.cancel(args.id)
    except GatewayError as exc:
        raise _map_gateway_error(exc) from exc
    except (ConnectionError, socket.error, OSError) as exc:
        raise CliFailure(EXIT_UNREACHABLE, f"cannot reach gateway: {exc}") from exc
    finally:
        client.close()
    _print_job_line(job)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    from lgrid.bench import run_bench

    report = run_bench(rtt_ms=args.rtt, iterations=args.iterations, mode=args.mode)
    print(report.to_table())
    csv_text = report.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv_text)
        print(f"csv written to {args.csv}")
    else:
        print()
        print(csv_text, end="")
    return EXIT_OK


def cmd_gateway(args: argparse.Namespace) -> int:
    from lgrid.gateway import Gateway, load_config

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    gateway = Gateway(config)
    gateway.start()
    print(f"gateway listening on {gateway.base_url} (state root {config.state_root})")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        gateway.shutdown()
    return EXIT_OK


def cmd_myproxy_server(args: argparse.Namespace) -> int:
    from lgrid.delegation.myproxy import MyProxyServer

    server = MyProxyServer(host=args.host, port=args.port)
    server.start()
    print(f"external repository simulator on {server.endpoint[0]}:{server.endpoint[1]}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgrid", description="desk-scale grid portal client")
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser("convert", help="convert a .p12 container to PEM pair")
    convert.add_argument("--p12", required=True)
    convert.add_argument("--out", required=True)
    convert.add_argument("--passphrase", default=None, help="omit to be prompted")
    convert.set_defaults(handler=cmd_convert)

    def add_gateway_options(p):
        p.add_argument("--gateway", default=None, help="gateway URL (or LGRID_GATEWAY)")
        p.add_argument("--ca", default=None, help="CA bundle for TLS verification")
        p.add_argument("--token", default=None, help="bearer token (default: cached)")

    delegate = sub.add_parser("delegate", help="delegate a proxy to the gateway")
    delegate.add_argument("--cert", required=True)
    delegate.add_argument("--key", required=True)
    delegate.add_argument("--lifetime", type=int, default=12 * 3600)
    add_gateway_options(delegate)
    delegate.set_defaults(handler=cmd_delegate)

    submit = sub.add_parser("submit", help="submit a job description")
    submit.add_argument("--jdl", required=True)
    submit.add_argument("--input", nargs="*", default=[], help="input sandbox files/dirs")
    add_gateway_options(submit)
    submit.set_defaults(handler=cmd_submit)

    status = sub.add_parser("status", help="show job state")
    group = status.add_mutually_exclusive_group(required=True)
    group.add_argument("--id")
    group.add_argument("--all", action="store_true")
    status.add_argument("--verbose", action="store_true")
    add_gateway_options(status)
    status.set_defaults(handler=cmd_status)

    watch = sub.add_parser("watch", help="poll a job until it is terminal")
    watch.add_argument("--id", required=True)
    watch.add_argument("--interval", type=float, default=1.0)
    add_gateway_options(watch)
    watch.set_defaults(handler=cmd_watch)

    output = sub.add_parser("output", help="retrieve and unpack job output")
    output.add_argument("--id", required=True)
    output.add_argument("--dest", required=True)
    add_gateway_options(output)
    output.set_defaults(handler=cmd_output)

    cancel = sub.add_parser("cancel", help="cancel a job")
    cancel.add_argument("--id", required=True)
    add_gateway_options(cancel)
    cancel.set_defaults(handler=cmd_cancel)

    bench = sub.add_parser("bench", help="compare embedded vs external delegation")
    bench.add_argument("--rtt", type=float, default=250.0, help="injected ms per round trip")
    bench.add_argument("--iterations", type=int, default=20)
    bench.add_argument("--mode", choices=("embedded", "external", "both"), default="both")
    bench.add_argument("--csv", default=None, help="write per-iteration CSV here")
    bench.set_defaults(handler=cmd_bench)

    gateway = sub.add_parser("gateway", help="run the portal gateway")
    gateway.add_argument("--config", default=None)
    gateway.add_argument("--port", type=int, default=None)
    gateway.set_defaults(handler=cmd_gateway)

    myproxy = sub.add_parser("myproxy-server", help="run the external repository simulator")
    myproxy.add_argument("--host", default="127.0.0.1")
    myproxy.add_argument("--port", type=int, default=7513)
    myproxy.set_defaults(handler=cmd_myproxy_server)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return failure.exit_code


if __name__ == "__main__":
    sys.exit(main())
