"""Gateway configuration: INI-style key=value sections.

    [gateway]
    host = 127.0.0.1
    port = 8443
    hostname = localhost
    state_root = ./lgrid-state        # LGRID_STATE_ROOT overrides
    tls_cert = server.pem             # enable TLS when set
    tls_key = server.key
    ca_file = ca.pem                  # trust anchors for users and client certs
    require_client_cert = false
    legacy_proxy = false

    [delegation]
    session_timeout = 60

    [myproxy]
    host = 127.0.0.1                  # external repository for the legacy flow
    port = 7513
    rtt_ms = 0                        # injected latency per round trip (benchmarks)

    [renewal]
    enabled = false
    threshold = 1800
    check_interval = 60
    lifetime = 43200

    [executor]
    kind = local                      # local | scripted
    stage_delay = 0.2

    [vo.<name>]
    members = /C=IT/O=Test/CN=*, /C=IT/O=Lab/*
    operations = delegate, submit, status, output, cancel
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_PORT = 8443
ALL_OPERATIONS = ("delegate", "submit", "status", "output", "cancel")


@dataclass(frozen=True)
class VoRule:
    name: str
    patterns: tuple[str, ...]
    operations: tuple[str, ...]


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    hostname: str = "localhost"
    state_root: Path = Path("lgrid-state")
    tls_cert: Path | None = None
    tls_key: Path | None = None
    ca_file: Path | None = None
    require_client_cert: bool = False
    legacy_proxy: bool = False
    session_timeout: float = 60.0
    myproxy_host: str | None = None
    myproxy_port: int = 7513
    myproxy_rtt_ms: float = 0.0
    renewal_enabled: bool = False
    renewal_threshold: int = 1800
    renewal_check_interval: int = 60
    renewal_lifetime: int = 43200
    executor_kind: str = "local"
    executor_stage_delay: float = 0.2
    vo_rules: list[VoRule] = field(default_factory=list)

    @property
    def myproxy_endpoint(self) -> tuple[str, int] | None:
        if self.myproxy_host is None:
            return None
        return (self.myproxy_host, self.myproxy_port)


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in raw.split(",") if item.strip())


def load_config(path: Path | str | None = None) -> GatewayConfig:
    """Load configuration, applying the LGRID_STATE_ROOT override."""
    parser = configparser.ConfigParser()
    if path is not None:
        with open(path) as stream:
            parser.read_file(stream)

    config = GatewayConfig()
    if parser.has_section("gateway"):
        section = parser["gateway"]
        config.host = section.get("host", config.host)
        config.port = section.getint("port", config.port)
        config.hostname = section.get("hostname", config.hostname)
        config.state_root = Path(section.get("state_root", str(config.state_root)))
        for key in ("tls_cert", "tls_key", "ca_file"):
            if section.get(key):
                setattr(config, key, Path(section[key]))
        config.require_client_cert = section.getboolean("require_client_cert", False)
        config.legacy_proxy = section.getboolean("legacy_proxy", False)
    if parser.has_section("delegation"):
        config.session_timeout = parser["delegation"].getfloat("session_timeout", 60.0)
    if parser.has_section("myproxy"):
        section = parser["myproxy"]
        config.myproxy_host = section.get("host", None)
        config.myproxy_port = section.getint("port", 7513)
        config.myproxy_rtt_ms = section.getfloat("rtt_ms", 0.0)
    if parser.has_section("renewal"):
        section = parser["renewal"]
        config.renewal_enabled = section.getboolean("enabled", False)
        config.renewal_threshold = section.getint("threshold", 1800)
        config.renewal_check_interval = section.getint("check_interval", 60)
        config.renewal_lifetime = section.getint("lifetime", 43200)
    if parser.has_section("executor"):
        section = parser["executor"]
        config.executor_kind = section.get("kind", "local")
        config.executor_stage_delay = section.getfloat("stage_delay", 0.2)

    for name in parser.sections():
        if name.startswith("vo."):
            section = parser[name]
            operations = _split_list(section.get("operations", ", ".join(ALL_OPERATIONS)))
            unknown = set(operations) - set(ALL_OPERATIONS)
            if unknown:
                raise ValueError(f"unknown operations in [{name}]: {sorted(unknown)}")
            config.vo_rules.append(
                VoRule(
                    name=name[3:],
                    patterns=_split_list(section.get("members", "")),
                    operations=operations,
                )
            )

    env_root = os.environ.get("LGRID_STATE_ROOT")
    if env_root:
        config.state_root = Path(env_root)
    return config
