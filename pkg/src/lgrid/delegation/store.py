"""Per-user proxy credential store, optionally file-backed.

Every bundle is validated at the instant of storage; at most one active
bundle exists per user id.
"""

from __future__ import annotations

import datetime
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from lgrid.pki import (
    DistinguishedName,
    TrustStore,
    cert_fingerprint,
    derive_user_id,
    parse_proxy_bundle,
    validate_proxy_chain,
)


class StoreError(Exception):
    pass


@dataclass(frozen=True)
class StoredProxy:
    user_id: str
    bundle: bytes
    not_after: datetime.datetime
    fingerprint: str
    renewal_username: str | None = None
    renewal_passphrase: str | None = None


class ProxyStore:
    def __init__(
        self,
        trust: TrustStore,
        root: Path | str | None = None,
        require_proxy_extension: bool = True,
    ) -> None:
        self.trust = trust
        self.require_proxy_extension = require_proxy_extension
        self.root = Path(root) if root is not None else None
        self._entries: dict[str, StoredProxy] = {}
        self._lock = threading.RLock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    def put(self, dn: DistinguishedName, bundle: bytes) -> StoredProxy:
        """Validate and store a bundle under the DN's user id, replacing any
        previous bundle for that user."""
        report = validate_proxy_chain(
            bundle, self.trust, require_proxy_extension=self.require_proxy_extension
        )
        if not report.ok:
            raise StoreError(f"bundle rejected: {report}")
        credential = parse_proxy_bundle(bundle)
        user_id = derive_user_id(dn)
        with self._lock:
            previous = self._entries.get(user_id)
            entry = StoredProxy(
                user_id=user_id,
                bundle=bytes(bundle),
                not_after=credential.proxy_cert.not_valid_after_utc,
                fingerprint=cert_fingerprint(credential.proxy_cert),
                renewal_username=previous.renewal_username if previous else None,
                renewal_passphrase=previous.renewal_passphrase if previous else None,
            )
            self._entries[user_id] = entry
            self._persist(entry)
        return entry

    def get(self, user_id: str) -> StoredProxy | None:
        with self._lock:
            return self._entries.get(user_id)

    def get_by_dn(self, dn: DistinguishedName) -> StoredProxy | None:
        return self.get(derive_user_id(dn))

    def user_ids(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def set_renewal_credentials(self, user_id: str, username: str, passphrase: str) -> None:
        with self._lock:
            entry = self._entries.get(user_id)
            if entry is None:
                raise StoreError(f"no stored proxy for {user_id}")
            updated = StoredProxy(
                user_id=entry.user_id,
                bundle=entry.bundle,
                not_after=entry.not_after,
                fingerprint=entry.fingerprint,
                renewal_username=username,
                renewal_passphrase=passphrase,
            )
            self._entries[user_id] = updated
            self._persist(updated)

    def is_valid_now(self, user_id: str, now: datetime.datetime | None = None) -> bool:
        entry = self.get(user_id)
        if entry is None:
            return False
        now = now or datetime.datetime.now(datetime.timezone.utc)
        return now <= entry.not_after

    # -- persistence ---------------------------------------------------------

    def _persist(self, entry: StoredProxy) -> None:
        if self.root is None:
            return
        bundle_path = self.root / f"{entry.user_id}.pem"
        meta_path = self.root / f"{entry.user_id}.json"
        fd = os.open(bundle_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as f:
            f.write(entry.bundle)
        meta = {
            "not_after": entry.not_after.isoformat(),
            "fingerprint": entry.fingerprint,
            "renewal_username": entry.renewal_username,
            "renewal_passphrase": entry.renewal_passphrase,
        }
        fd = os.open(meta_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as f:
            json.dump(meta, f)

    def _load(self) -> None:
        assert self.root is not None
        for bundle_path in sorted(self.root.glob("*.pem")):
            user_id = bundle_path.stem
            meta_path = self.root / f"{user_id}.json"
            if not meta_path.exists():
                continue
            bundle = bundle_path.read_bytes()
            meta = json.loads(meta_path.read_text())
            self._entries[user_id] = StoredProxy(
                user_id=user_id,
                bundle=bundle,
                not_after=datetime.datetime.fromisoformat(meta["not_after"]),
                fingerprint=meta["fingerprint"],
                renewal_username=meta.get("renewal_username"),
                renewal_passphrase=meta.get("renewal_passphrase"),
            )
