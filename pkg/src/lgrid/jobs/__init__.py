"""JDL parsing and expansion, sandbox archives, and the job lifecycle engine."""

from lgrid.jobs.states import COLOR_BY_STATE, TRANSITIONS, JobState, is_terminal, state_color
from lgrid.jobs.jdl import (
    JdlError,
    JdlSyntaxError,
    JobDescriptor,
    JobKind,
    ParameterRange,
    VerbatimExpression,
    expand,
    format_jdl,
    parse_jdl,
)
from lgrid.jobs.sandbox import SandboxError, pack, pack_paths, unpack, unpack_into
from lgrid.jobs.manager import (
    IllegalTransitionError,
    JobError,
    JobManager,
    JobRecord,
    NotAuthorizedError,
    NotOwnerError,
    UnknownJobError,
    WrongStateError,
)
from lgrid.jobs.executors import LocalExecutor, ScriptedExecutor

__all__ = [
    "JobState",
    "TRANSITIONS",
    "COLOR_BY_STATE",
    "state_color",
    "is_terminal",
    "JobKind",
    "JobDescriptor",
    "ParameterRange",
    "VerbatimExpression",
    "JdlError",
    "JdlSyntaxError",
    "parse_jdl",
    "format_jdl",
    "expand",
    "SandboxError",
    "pack",
    "unpack",
    "pack_paths",
    "unpack_into",
    "JobManager",
    "JobRecord",
    "JobError",
    "NotAuthorizedError",
    "NotOwnerError",
    "UnknownJobError",
    "WrongStateError",
    "IllegalTransitionError",
    "ScriptedExecutor",
    "LocalExecutor",
]
