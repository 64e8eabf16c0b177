"""Job lifecycle states, the legal transition relation, and display colors."""

from __future__ import annotations

import enum


class JobState(enum.Enum):
    SUBMITTED = "SUBMITTED"
    WAITING = "WAITING"
    READY = "READY"
    SCHEDULED = "SCHEDULED"
    RUNNING = "RUNNING"
    DONE_OK = "DONE_OK"
    DONE_FAILED = "DONE_FAILED"
    ABORTED = "ABORTED"
    CANCELLED = "CANCELLED"
    CLEARED = "CLEARED"


_PIPELINE = [
    JobState.SUBMITTED,
    JobState.WAITING,
    JobState.READY,
    JobState.SCHEDULED,
    JobState.RUNNING,
]

NON_TERMINAL = frozenset(_PIPELINE)

TRANSITIONS: frozenset[tuple[JobState, JobState]] = frozenset(
    list(zip(_PIPELINE, _PIPELINE[1:]))
    + [(JobState.RUNNING, JobState.DONE_OK), (JobState.RUNNING, JobState.DONE_FAILED)]
    + [(state, JobState.ABORTED) for state in NON_TERMINAL]
    + [(state, JobState.CANCELLED) for state in NON_TERMINAL]
    + [(JobState.DONE_OK, JobState.CLEARED), (JobState.DONE_FAILED, JobState.CLEARED)]
)


def is_terminal(state: JobState) -> bool:
    return state not in NON_TERMINAL


def can_transition(frm: JobState, to: JobState) -> bool:
    return (frm, to) in TRANSITIONS


# one fixed lookup, shared verbatim with the web monitor
COLOR_BY_STATE = {
    JobState.SUBMITTED: "neutral",
    JobState.WAITING: "neutral",
    JobState.READY: "neutral",
    JobState.SCHEDULED: "neutral",
    JobState.RUNNING: "blue",
    JobState.DONE_OK: "green",
    JobState.DONE_FAILED: "neutral",
    JobState.ABORTED: "red",
    JobState.CANCELLED: "orange",
    JobState.CLEARED: "gray",
}


def state_color(state: JobState) -> str:
    return COLOR_BY_STATE[state]
