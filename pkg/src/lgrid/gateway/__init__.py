"""The portal server: HTTP endpoints binding delegation, jobs, and authorization."""

from lgrid.gateway.config import GatewayConfig, VoRule, load_config
from lgrid.gateway.auth import ApiSession, Decision, TokenTable, VoPolicy
from lgrid.gateway.server import Gateway

__all__ = [
    "GatewayConfig",
    "VoRule",
    "load_config",
    "ApiSession",
    "TokenTable",
    "VoPolicy",
    "Decision",
    "Gateway",
]
