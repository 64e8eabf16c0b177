"""Job records, per-user virtual homes, and the lifecycle engine.

On-disk layout under the state root:

    homes/<user-id>/jobs/<uuid>/descriptor.jdl
    homes/<user-id>/jobs/<uuid>/input/   work/   output/
    homes/<user-id>/jobs/<uuid>/record.json
    homes/<user-id>/jobs/<uuid>/status.log      # ISO8601<TAB>STATE<TAB>reason

record.json is written atomically, so a crash at any point leaves every job
reloadable with an intact, legal history.
"""

from __future__ import annotations

import datetime
import json
import os
import shutil
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from lgrid.delegation.store import ProxyStore
from lgrid.jobs.executors import DEFAULT_STDERR, DEFAULT_STDOUT, LocalExecutor, Transition
from lgrid.jobs.jdl import JobDescriptor, expand, format_jdl, parse_jdl
from lgrid.jobs.sandbox import pack, unpack_into
from lgrid.jobs.states import JobState, can_transition, is_terminal
from lgrid.pki import DistinguishedName, derive_user_id, parse_dn


class JobError(Exception):
    pass


class NotAuthorizedError(JobError):
    pass


class NotOwnerError(JobError):
    pass


class UnknownJobError(JobError):
    pass


class WrongStateError(JobError):
    pass


class IllegalTransitionError(JobError):
    pass


@dataclass(frozen=True)
class HistoryEntry:
    state: JobState
    at: datetime.datetime
    reason: str


@dataclass
class JobRecord:
    id: str
    owner_dn: str
    owner_user_id: str
    descriptor: JobDescriptor
    state: JobState
    history: list[HistoryEntry] = field(default_factory=list)
    proxy_fingerprint: str | None = None
    exit_code: int | None = None
    batch_tag: str = ""

    @property
    def uuid(self) -> str:
        return self.id.rsplit("/", 1)[-1]


@dataclass(frozen=True)
class JobPaths:
    home: Path

    @property
    def descriptor_file(self) -> Path:
        return self.home / "descriptor.jdl"

    @property
    def input(self) -> Path:
        return self.home / "input"

    @property
    def work(self) -> Path:
        return self.home / "work"

    @property
    def output(self) -> Path:
        return self.home / "output"

    @property
    def record_file(self) -> Path:
        return self.home / "record.json"

    @property
    def status_log(self) -> Path:
        return self.home / "status.log"


def _now() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


def replay_history(history: list[HistoryEntry]) -> None:
    """Raise IllegalTransitionError unless consecutive entries form legal edges."""
    if not history:
        raise IllegalTransitionError("empty history")
    if history[0].state is not JobState.SUBMITTED:
        raise IllegalTransitionError(f"history starts at {history[0].state.value}")
    for previous, current in zip(history, history[1:]):
        if not can_transition(previous.state, current.state):
            raise IllegalTransitionError(
                f"illegal transition {previous.state.value} -> {current.state.value}"
            )


class JobManager:
    """Submits, advances, cancels and clears jobs under a state root."""

    def __init__(
        self,
        state_root: Path | str,
        host: str = "localhost",
        executor=None,
        proxy_store: ProxyStore | None = None,
        auto_run: bool = True,
    ) -> None:
        self.state_root = Path(state_root)
        self.homes_dir = self.state_root / "homes"
        self.homes_dir.mkdir(parents=True, exist_ok=True)
        self.host = host
        self.executor = executor if executor is not None else LocalExecutor()
        self.proxy_store = proxy_store
        self.auto_run = auto_run
        self._records: dict[str, JobRecord] = {}
        self._job_locks: dict[str, threading.RLock] = {}
        self._table_lock = threading.Lock()
        self._drivers: dict[str, threading.Thread] = {}
        self._load()

    # -- paths ----------------------------------------------------------------

    def paths_for(self, record: JobRecord) -> JobPaths:
        return JobPaths(self.homes_dir / record.owner_user_id / "jobs" / record.uuid)

    def _lock_for(self, job_id: str) -> threading.RLock:
        with self._table_lock:
            return self._job_locks.setdefault(job_id, threading.RLock())

    # -- submission -----------------------------------------------------------

    def submit(
        self,
        descriptor: JobDescriptor | str,
        owner_dn: DistinguishedName | str,
        input_archive: bytes | None = None,
        require_proxy: bool | None = None,
    ) -> list[JobRecord]:
        """Expand the descriptor and persist one SUBMITTED record per job."""
        if isinstance(descriptor, str):
            descriptor = parse_jdl(descriptor)
        dn = parse_dn(owner_dn) if isinstance(owner_dn, str) else owner_dn
        user_id = derive_user_id(dn)

        check_proxy = self.proxy_store is not None if require_proxy is None else require_proxy
        fingerprint = None
        if check_proxy:
            if self.proxy_store is None:
                raise NotAuthorizedError("no proxy store configured")
            entry = self.proxy_store.get(user_id)
            if entry is None:
                raise NotAuthorizedError(f"no delegated proxy for {dn}")
            if not self.proxy_store.is_valid_now(user_id):
                raise NotAuthorizedError(f"delegated proxy for {dn} has expired")
            fingerprint = entry.fingerprint

        expanded = expand(descriptor)
        batch_tag = _now().isoformat()
        records: list[JobRecord] = []
        for job_descriptor in expanded:
            job_uuid = str(uuid.uuid4())
            record = JobRecord(
                id=f"lgrid://{self.host}/{job_uuid}",
                owner_dn=str(dn),
                owner_user_id=user_id,
                descriptor=job_descriptor,
                state=JobState.SUBMITTED,
                history=[HistoryEntry(JobState.SUBMITTED, _now(), "submitted")],
                proxy_fingerprint=fingerprint,
                batch_tag=batch_tag,
            )
            paths = self.paths_for(record)
            try:
                for directory in (paths.input, paths.work, paths.output):
                    directory.mkdir(parents=True, exist_ok=True)
                paths.descriptor_file.write_text(format_jdl(job_descriptor))
                if input_archive is not None:
                    unpack_into(input_archive, paths.input)
            except Exception:
                shutil.rmtree(paths.home, ignore_errors=True)
                for created in records:
                    shutil.rmtree(self.paths_for(created).home, ignore_errors=True)
                raise
            self._persist(record)
            self._append_status(record, record.history[0])
            records.append(record)

        with self._table_lock:
            for record in records:
                self._records[record.id] = record
        if self.auto_run:
            for record in records:
                self.start_driver(record.id)
        return records

    # -- lifecycle ------------------------------------------------------------

    def advance(self, record: JobRecord, executor=None, timeout: float = 30.0) -> JobRecord:
        """Apply exactly one legal transition, waiting for the executor if needed."""
        executor = executor or self.executor
        if is_terminal(record.state):
            raise WrongStateError(f"job {record.id} is terminal ({record.state.value})")
        deadline = time.monotonic() + timeout
        while True:
            if self._step(record, executor):
                return record
            if is_terminal(record.state):
                return record
            if time.monotonic() > deadline:
                raise TimeoutError(f"no transition became available for {record.id}")
            time.sleep(0.01)

    def _step(self, record: JobRecord, executor) -> bool:
        lock = self._lock_for(record.id)
        with lock:
            if is_terminal(record.state):
                return False
            transition = executor.propose(record, self.paths_for(record))
            if transition is None:
                return False
            self._apply(record, transition)
            return True

    def _apply(self, record: JobRecord, transition: Transition) -> None:
        if not can_transition(record.state, transition.to):
            raise IllegalTransitionError(
                f"illegal transition {record.state.value} -> {transition.to.value}"
            )
        entry = HistoryEntry(transition.to, _now(), transition.reason)
        record.state = transition.to
        record.history.append(entry)
        if transition.exit_code is not None:
            record.exit_code = transition.exit_code
        if transition.to in (JobState.DONE_OK, JobState.DONE_FAILED):
            self._collect_outputs(record)
        self._persist(record)
        self._append_status(record, entry)

    def run_to_completion(self, record: JobRecord, executor=None, timeout: float = 60.0) -> JobRecord:
        deadline = time.monotonic() + timeout
        while not is_terminal(record.state):
            self.advance(record, executor, timeout=max(0.1, deadline - time.monotonic()))
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {record.id} did not finish in {timeout}s")
        return record

    def start_driver(self, job_id: str) -> None:
        record = self.get(job_id)

        def drive() -> None:
            try:
                while not is_terminal(record.state):
                    if not self._step(record, self.executor):
                        time.sleep(0.02)
            except Exception:
                lock = self._lock_for(record.id)
                with lock:
                    if not is_terminal(record.state):
                        self._apply(record, Transition(JobState.ABORTED, "driver failure"))

        with self._table_lock:
            existing = self._drivers.get(job_id)
            if existing is not None and existing.is_alive():
                return
            thread = threading.Thread(target=drive, name=f"job-{record.uuid[:8]}", daemon=True)
            self._drivers[job_id] = thread
        thread.start()

    def wait(self, job_id: str, timeout: float = 60.0) -> JobRecord:
        record = self.get(job_id)
        deadline = time.monotonic() + timeout
        while not is_terminal(record.state):
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {record.state.value} after {timeout}s")
            time.sleep(0.02)
        return record

    def cancel(self, job_id: str, requester_dn: DistinguishedName | str) -> JobRecord:
        record = self._owned(job_id, requester_dn)
        lock = self._lock_for(record.id)
        with lock:
            if is_terminal(record.state):
                raise WrongStateError(f"job is already terminal ({record.state.value})")
            self.executor.cancel(record.id)
            self._apply(record, Transition(JobState.CANCELLED, "cancelled by owner"))
        return record

    def abort(self, job_id: str, reason: str) -> JobRecord:
        """System-side abort; no-op when the job is already terminal."""
        record = self.get(job_id)
        lock = self._lock_for(record.id)
        with lock:
            if not is_terminal(record.state):
                self.executor.cancel(record.id)
                self._apply(record, Transition(JobState.ABORTED, reason))
        return record

    # -- output ---------------------------------------------------------------

    def _declared_outputs(self, record: JobRecord) -> list[str]:
        declared = record.descriptor.get("OutputSandbox", [])
        names = [str(name) for name in declared] if isinstance(declared, list) else [str(declared)]
        names.append(str(record.descriptor.get("StdOutput", DEFAULT_STDOUT)))
        names.append(str(record.descriptor.get("StdError", DEFAULT_STDERR)))
        seen: list[str] = []
        for name in names:
            if name and name not in seen:
                seen.append(name)
        return seen

    def _collect_outputs(self, record: JobRecord) -> None:
        paths = self.paths_for(record)
        for name in self._declared_outputs(record):
            source = paths.work / name
            if source.is_file():
                destination = paths.output / name
                destination.parent.mkdir(parents=True, exist_ok=True)
                shutil.copy2(source, destination)

    def fetch_output(self, job_id: str, requester_dn: DistinguishedName | str) -> bytes:
        """Pack the declared outputs, mark the job CLEARED, purge its files."""
        record = self._owned(job_id, requester_dn)
        lock = self._lock_for(record.id)
        with lock:
            if record.state not in (JobState.DONE_OK, JobState.DONE_FAILED):
                raise WrongStateError(
                    f"output available only for finished jobs, not {record.state.value}"
                )
            paths = self.paths_for(record)
            entries: list[tuple[str, bytes]] = []
            included: list[str] = []
            missing: list[str] = []
            for name in self._declared_outputs(record):
                source = paths.output / name
                if source.is_file():
                    entries.append((name, source.read_bytes()))
                    included.append(name)
                else:
                    missing.append(name)
            manifest = {
                "job_id": record.id,
                "state": record.state.value,
                "exit_code": record.exit_code,
                "included": included,
                "missing": missing,
            }
            entries.append((".lgrid/manifest.json", json.dumps(manifest, indent=2).encode()))
            archive = pack(entries)
            self._apply(record, Transition(JobState.CLEARED, "output retrieved"))
            for directory in (paths.input, paths.work, paths.output):
                shutil.rmtree(directory, ignore_errors=True)
        return archive

    # -- queries --------------------------------------------------------------

    def get(self, job_id: str) -> JobRecord:
        with self._table_lock:
            record = self._records.get(job_id)
        if record is None:
            raise UnknownJobError(f"unknown job {job_id}")
        return record

    def _owned(self, job_id: str, requester_dn: DistinguishedName | str) -> JobRecord:
        record = self.get(job_id)
        dn = parse_dn(requester_dn) if isinstance(requester_dn, str) else requester_dn
        if record.owner_dn != str(dn):
            raise NotOwnerError(f"job {job_id} is not owned by {dn}")
        return record

    def get_owned(self, job_id: str, requester_dn: DistinguishedName | str) -> JobRecord:
        return self._owned(job_id, requester_dn)

    def list_for_user(self, user_id: str) -> list[JobRecord]:
        with self._table_lock:
            records = [r for r in self._records.values() if r.owner_user_id == user_id]
        return sorted(records, key=lambda r: (r.history[0].at, r.id))

    def list_all(self) -> list[JobRecord]:
        with self._table_lock:
            records = list(self._records.values())
        return sorted(records, key=lambda r: (r.history[0].at, r.id))

    def active_jobs(self) -> list[JobRecord]:
        return [r for r in self.list_all() if not is_terminal(r.state)]

    # -- persistence ----------------------------------------------------------

    def _persist(self, record: JobRecord) -> None:
        paths = self.paths_for(record)
        paths.home.mkdir(parents=True, exist_ok=True)
        doc = {
            "id": record.id,
            "owner_dn": record.owner_dn,
            "owner_user_id": record.owner_user_id,
            "state": record.state.value,
            "history": [[e.state.value, e.at.isoformat(), e.reason] for e in record.history],
            "proxy_fingerprint": record.proxy_fingerprint,
            "exit_code": record.exit_code,
            "batch_tag": record.batch_tag,
        }
        temp = paths.record_file.with_suffix(".json.tmp")
        temp.write_text(json.dumps(doc, indent=2))
        os.replace(temp, paths.record_file)

    def _append_status(self, record: JobRecord, entry: HistoryEntry) -> None:
        paths = self.paths_for(record)
        with open(paths.status_log, "a", encoding="utf-8") as stream:
            stream.write(f"{entry.at.isoformat()}\t{entry.state.value}\t{entry.reason}\n")

    def _load(self) -> None:
        for record_file in sorted(self.homes_dir.glob("*/jobs/*/record.json")):
            doc = json.loads(record_file.read_text())
            descriptor_file = record_file.parent / "descriptor.jdl"
            descriptor = parse_jdl(descriptor_file.read_text())
            history = [
                HistoryEntry(JobState(state), datetime.datetime.fromisoformat(at), reason)
                for state, at, reason in doc["history"]
            ]
            replay_history(history)
            record = JobRecord(
                id=doc["id"],
                owner_dn=doc["owner_dn"],
                owner_user_id=doc["owner_user_id"],
                descriptor=descriptor,
                state=JobState(doc["state"]),
                history=history,
                proxy_fingerprint=doc.get("proxy_fingerprint"),
                exit_code=doc.get("exit_code"),
                batch_tag=doc.get("batch_tag", ""),
            )
            if record.state is not history[-1].state:
                raise IllegalTransitionError(f"state/history divergence in {record.id}")
            self._records[record.id] = record

    def recover(self) -> list[JobRecord]:
        """Abort jobs left non-terminal by a previous process."""
        recovered = []
        for record in self.active_jobs():
            self.abort(record.id, "interrupted by gateway restart")
            recovered.append(record)
        return recovered
