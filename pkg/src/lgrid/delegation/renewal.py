"""Automatic proxy renewal for long-running jobs.

A sweep inspects every active job's stored proxy; proxies inside the
threshold are re-fetched from the external repository when one is
configured and renewal credentials are on file, otherwise the expiry is
flagged so the job can be aborted when the proxy actually lapses.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

from lgrid.delegation.myproxy import MyProxyError, myproxy_get
from lgrid.delegation.store import ProxyStore, StoreError
from lgrid.pki import parse_proxy_bundle, subject_dn

DEFAULT_THRESHOLD = 30 * 60
DEFAULT_CHECK_INTERVAL = 60


@dataclass(frozen=True)
class RenewalPolicy:
    threshold: int = DEFAULT_THRESHOLD
    check_interval: int = DEFAULT_CHECK_INTERVAL
    endpoint: tuple[str, int] | None = None
    lifetime: int = 12 * 3600

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("renewal threshold must be positive")


@dataclass(frozen=True)
class RenewalAction:
    kind: str  # renewed | renewal-failed | expiring-unrenewable | proxy-expired
    user_id: str
    job_ids: tuple[str, ...]
    detail: str = ""
    not_after: datetime.datetime | None = None


def renew_if_needed(
    store: ProxyStore,
    jobs,
    policy: RenewalPolicy,
    now: datetime.datetime | None = None,
) -> list[RenewalAction]:
    """One renewal sweep over the active jobs.

    `jobs` is any iterable of objects exposing `id` and `owner_user_id`;
    the caller applies job-side consequences (aborting on proxy-expired).
    """
    now = now or datetime.datetime.now(datetime.timezone.utc)
    by_user: dict[str, list[str]] = {}
    for job in jobs:
        by_user.setdefault(job.owner_user_id, []).append(job.id)

    actions: list[RenewalAction] = []
    for user_id, job_ids in sorted(by_user.items()):
        entry = store.get(user_id)
        if entry is None:
            continue
        remaining = (entry.not_after - now).total_seconds()
        if remaining <= 0:
            actions.append(
                RenewalAction(
                    kind="proxy-expired",
                    user_id=user_id,
                    job_ids=tuple(job_ids),
                    detail=f"proxy expired {entry.not_after.isoformat()}",
                    not_after=entry.not_after,
                )
            )
            continue
        if remaining > policy.threshold:
            continue
        if policy.endpoint is None or entry.renewal_username is None:
            actions.append(
                RenewalAction(
                    kind="expiring-unrenewable",
                    user_id=user_id,
                    job_ids=tuple(job_ids),
                    detail="no renewal route configured",
                    not_after=entry.not_after,
                )
            )
            continue
        try:
            bundle, _transcript = myproxy_get(
                policy.endpoint,
                entry.renewal_username,
                entry.renewal_passphrase or "",
                lifetime=policy.lifetime,
            )
            credential = parse_proxy_bundle(bundle)
            refreshed = store.put(subject_dn(credential.user_cert), bundle)
            actions.append(
                RenewalAction(
                    kind="renewed",
                    user_id=user_id,
                    job_ids=tuple(job_ids),
                    detail=f"proxy renewed until {refreshed.not_after.isoformat()}",
                    not_after=refreshed.not_after,
                )
            )
        except (MyProxyError, StoreError, ConnectionError, OSError) as exc:
            actions.append(
                RenewalAction(
                    kind="renewal-failed",
                    user_id=user_id,
                    job_ids=tuple(job_ids),
                    detail=str(exc),
                    not_after=entry.not_after,
                )
            )
    return actions
