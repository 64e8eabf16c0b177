"""Bearer tokens bound to delegated proxies, and the VO authorization table.

A token is only as alive as the proxy behind it; authorization is
deny-by-default: a DN matching no VO pattern may do nothing.
"""

from __future__ import annotations

import datetime
import fnmatch
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path

from lgrid.delegation.store import ProxyStore
from lgrid.gateway.config import VoRule


@dataclass(frozen=True)
class ApiSession:
    token: str
    user_id: str
    dn: str
    issued_at: datetime.datetime


@dataclass(frozen=True)
class Decision:
    allow: bool
    reason: str = ""
    session: ApiSession | None = None
    vo: str | None = None


class TokenTable:
    """Token to identity map with an append-only issuance journal."""

    def __init__(self, journal_path: Path | str | None = None) -> None:
        self.journal_path = Path(journal_path) if journal_path else None
        self._sessions: dict[str, ApiSession] = {}
        self._lock = threading.Lock()
        if self.journal_path is not None and self.journal_path.exists():
            self._replay()

    def issue(self, user_id: str, dn: str) -> ApiSession:
        session = ApiSession(
            token=secrets.token_hex(16),
            user_id=user_id,
            dn=dn,
            issued_at=datetime.datetime.now(datetime.timezone.utc),
        )
        with self._lock:
            self._sessions[session.token] = session
            self._journal(session)
        return session

    def lookup(self, token: str) -> ApiSession | None:
        with self._lock:
            return self._sessions.get(token)

    def _journal(self, session: ApiSession) -> None:
        if self.journal_path is None:
            return
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        line = f"{session.issued_at.isoformat()}\t{session.token}\t{session.user_id}\t{session.dn}\n"
        with open(self.journal_path, "a", encoding="utf-8") as stream:
            stream.write(line)
        self.journal_path.chmod(0o600)

    def _replay(self) -> None:
        assert self.journal_path is not None
        for line in self.journal_path.read_text().splitlines():
            parts = line.split("\t")
            if len(parts) != 4:
                continue
            issued_at, token, user_id, dn = parts
            self._sessions[token] = ApiSession(
                token=token,
                user_id=user_id,
                dn=dn,
                issued_at=datetime.datetime.fromisoformat(issued_at),
            )


class VoPolicy:
    def __init__(self, rules: list[VoRule]) -> None:
        self.rules = list(rules)

    def vos_for(self, dn: str) -> list[str]:
        return [
            rule.name
            for rule in self.rules
            if any(fnmatch.fnmatchcase(dn, pattern) for pattern in rule.patterns)
        ]

    def check(self, dn: str, vo: str | None, operation: str) -> tuple[bool, str, str | None]:
        """Allow iff some VO (or the named one) both matches the DN and
        enables the operation."""
        matching = [rule for rule in self.rules if rule.name in self.vos_for(dn)]
        if vo is not None:
            matching = [rule for rule in matching if rule.name == vo]
        if not matching:
            return False, "no-vo", None
        for rule in matching:
            if operation in rule.operations:
                return True, "", rule.name
        return False, "operation-not-enabled", None


class Authorizer:
    def __init__(self, tokens: TokenTable, store: ProxyStore, policy: VoPolicy) -> None:
        self.tokens = tokens
        self.store = store
        self.policy = policy

    def authorize(self, token: str | None, operation: str, vo: str | None = None) -> Decision:
        if not token:
            return Decision(allow=False, reason="missing-token")
        session = self.tokens.lookup(token)
        if session is None:
            return Decision(allow=False, reason="invalid-token")
        if not self.store.is_valid_now(session.user_id):
            return Decision(allow=False, reason="proxy-expired", session=session)
        allowed, reason, matched_vo = self.policy.check(session.dn, vo, operation)
        if not allowed:
            return Decision(allow=False, reason=reason, session=session)
        return Decision(allow=True, session=session, vo=matched_vo)
