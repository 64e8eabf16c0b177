"""Test support for the browser portal: throwaway fixtures and a live gateway.

Usage:
    python3 support.py fixtures <dir>        write p12/PEM/CSR fixtures, print JSON
    python3 support.py serve <dir>           fixtures + gateway; prints JSON, runs
                                             until stdin closes
    python3 support.py validate-proxy <dir>  validate proxy-cert.der built by the
                                             TypeScript side; prints the report
"""

import json
import sys
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import serialization

from lgrid.pki import TrustStore, create_proxy_csr, generate_keypair, validate_proxy_chain
from lgrid.pki.certs import ProxyCredential
from lgrid.pki.identity import build_p12, create_ca, issue_user_cert

PASSPHRASE = "secret"


def make_fixtures(directory: Path) -> dict:
    directory.mkdir(parents=True, exist_ok=True)
    ca = create_ca("/C=IT/O=WebTest/CN=Web CA")
    alice = issue_user_cert(ca, "/C=IT/O=WebTest/CN=Alice Browser")
    (directory / "alice.p12").write_bytes(build_p12(alice, PASSPHRASE))
    (directory / "alice-cert.pem").write_bytes(alice.cert_pem())
    (directory / "alice-key.pem").write_bytes(alice.key_pem())
    (directory / "ca.pem").write_bytes(ca.cert_pem())
    # a CSR of the shape the delegation service would send, plus a foreign
    # one for substitution-defense tests
    csr = create_proxy_csr(alice.dn, generate_keypair())
    (directory / "proxy-csr.pem").write_bytes(csr.public_bytes(serialization.Encoding.PEM))
    mallory = issue_user_cert(ca, "/C=IT/O=WebTest/CN=Mallory")
    foreign = create_proxy_csr(mallory.dn, generate_keypair())
    (directory / "foreign-csr.pem").write_bytes(foreign.public_bytes(serialization.Encoding.PEM))
    return {
        "dir": str(directory),
        "p12": str(directory / "alice.p12"),
        "passphrase": PASSPHRASE,
        "subject_dn": str(alice.dn),
        "csr": str(directory / "proxy-csr.pem"),
        "foreign_csr": str(directory / "foreign-csr.pem"),
    }


def serve(directory: Path) -> None:
    from lgrid.gateway import Gateway, GatewayConfig, VoRule

    info = make_fixtures(directory)
    ca_cert = x509.load_pem_x509_certificates((directory / "ca.pem").read_bytes())[0]
    config = GatewayConfig(
        port=0,
        state_root=directory / "state",
        vo_rules=[
            VoRule(name="web", patterns=("*",), operations=("delegate", "submit", "status", "output", "cancel"))
        ],
    )
    gateway = Gateway(config, trust=TrustStore(anchors=[ca_cert]))
    gateway.start()
    info["gateway_url"] = gateway.base_url
    print(json.dumps(info), flush=True)
    sys.stdin.read()  # parent closes stdin to stop us
    gateway.shutdown()


def validate_proxy(directory: Path) -> None:
    proxy = x509.load_der_x509_certificate((directory / "proxy-cert.der").read_bytes())
    user = x509.load_pem_x509_certificate((directory / "alice-cert.pem").read_bytes())
    ca_cert = x509.load_pem_x509_certificates((directory / "ca.pem").read_bytes())[0]
    credential = ProxyCredential(proxy_cert=proxy, proxy_key=None, chain=(user,))
    report = validate_proxy_chain(credential, TrustStore(anchors=[ca_cert]))
    print(json.dumps({"ok": report.ok, "violations": [str(v) for v in report.violations]}))


def main() -> None:
    command, directory = sys.argv[1], Path(sys.argv[2])
    if command == "fixtures":
        print(json.dumps(make_fixtures(directory)))
    elif command == "serve":
        serve(directory)
    elif command == "validate-proxy":
        validate_proxy(directory)
    else:
        raise SystemExit(f"unknown command {command}")


if __name__ == "__main__":
    main()
