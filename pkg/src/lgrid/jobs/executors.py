"""Executors drive job records through their lifecycle.

The scripted executor walks the pipeline on a per-stage delay schedule and
never runs anything; the local executor actually launches the Executable in
the job's work directory, standing in for the Grid.
"""

from __future__ import annotations

import datetime
import os
import shlex
import shutil
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

from lgrid.jobs.states import JobState

_PIPELINE_NEXT = {
    JobState.SUBMITTED: JobState.WAITING,
    JobState.WAITING: JobState.READY,
    JobState.READY: JobState.SCHEDULED,
    JobState.SCHEDULED: JobState.RUNNING,
}

DEFAULT_STDOUT = "std.out"
DEFAULT_STDERR = "std.err"


@dataclass(frozen=True)
class Transition:
    to: JobState
    reason: str
    exit_code: int | None = None


def _now() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


class ScriptedExecutor:
    """Advances jobs on a timetable without running anything."""

    def __init__(
        self,
        stage_delay: float = 0.2,
        final_state: JobState = JobState.DONE_OK,
        exit_code: int = 0,
    ) -> None:
        if final_state not in (JobState.DONE_OK, JobState.DONE_FAILED):
            raise ValueError("final_state must be DONE_OK or DONE_FAILED")
        self.stage_delay = stage_delay
        self.final_state = final_state
        self.exit_code = exit_code

    def propose(self, record, paths) -> Transition | None:
        elapsed = (_now() - record.history[-1].at).total_seconds()
        if elapsed < self.stage_delay:
            return None
        if record.state in _PIPELINE_NEXT:
            return Transition(_PIPELINE_NEXT[record.state], "scripted stage")
        if record.state is JobState.RUNNING:
            return Transition(self.final_state, "scripted completion", exit_code=self.exit_code)
        return None

    def cancel(self, job_id: str) -> None:
        pass


class LocalExecutor:
    """Runs the Executable as a subprocess inside the job's work directory."""

    def __init__(self) -> None:
        self._processes: dict[str, subprocess.Popen] = {}
        self._lock = threading.Lock()

    def propose(self, record, paths) -> Transition | None:
        state = record.state
        if state in (JobState.SUBMITTED, JobState.WAITING, JobState.READY):
            return Transition(_PIPELINE_NEXT[state], "local queue")
        if state is JobState.SCHEDULED:
            return self._launch(record, paths)
        if state is JobState.RUNNING:
            return self._poll(record)
        return None

    def _launch(self, record, paths) -> Transition:
        work: Path = paths.work
        if paths.input.is_dir():
            shutil.copytree(paths.input, work, dirs_exist_ok=True)

        executable = record.descriptor.get("Executable")
        arguments = record.descriptor.get("Arguments", "")
        try:
            argv = [self._resolve_executable(str(executable), work)]
            if arguments is not None and str(arguments) != "":
                argv += shlex.split(str(arguments))
            stdout_name = str(record.descriptor.get("StdOutput", DEFAULT_STDOUT))
            stderr_name = str(record.descriptor.get("StdError", DEFAULT_STDERR))
            stdout = open(work / stdout_name, "wb")
            stderr = open(work / stderr_name, "wb")
            process = subprocess.Popen(argv, cwd=work, stdout=stdout, stderr=stderr)
        except (OSError, ValueError, FileNotFoundError) as exc:
            return Transition(JobState.ABORTED, f"launch failure: {exc}")
        with self._lock:
            self._processes[record.id] = process
        return Transition(JobState.RUNNING, f"pid {process.pid}")

    def _resolve_executable(self, executable: str, work: Path) -> str:
        if os.path.isabs(executable):
            return executable
        candidate = (work / executable).resolve()
        if not str(candidate).startswith(str(work.resolve()) + os.sep) and candidate != work.resolve():
            raise ValueError(f"executable path escapes the work directory: {executable!r}")
        if candidate.is_file():
            candidate.chmod(candidate.stat().st_mode | 0o700)
            return str(candidate)
        if "/" not in executable:
            found = shutil.which(executable)
            if found:
                return found
        raise FileNotFoundError(f"executable not found: {executable!r}")

    def _poll(self, record) -> Transition | None:
        with self._lock:
            process = self._processes.get(record.id)
        if process is None:
            return Transition(JobState.ABORTED, "runner lost the process")
        code = process.poll()
        if code is None:
            return None
        with self._lock:
            self._processes.pop(record.id, None)
        if code == 0:
            return Transition(JobState.DONE_OK, "exit code 0", exit_code=0)
        return Transition(JobState.DONE_FAILED, f"exit code {code}", exit_code=code)

    def cancel(self, job_id: str) -> None:
        with self._lock:
            process = self._processes.pop(job_id, None)
        if process is not None and process.poll() is None:
            process.terminate()
            try:
                process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                process.kill()
