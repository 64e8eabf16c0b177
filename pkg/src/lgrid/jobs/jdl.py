"""Job description language: `Attribute = value ;` statements.

Values are double-quoted strings, integers, booleans, brace-delimited lists,
bracket-delimited sub-descriptors (collection nodes), or verbatim
expressions kept unevaluated (Requirements, Rank and friends are stored,
never interpreted).  Unknown attributes are preserved as written.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class JdlError(ValueError):
    """Structurally valid JDL that violates a descriptor rule."""


class JdlSyntaxError(JdlError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class VerbatimExpression:
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class ParameterRange:
    start: int
    step: int
    bound: int

    def values(self) -> list[int]:
        if self.step <= 0:
            raise JdlError(f"ParameterStep must be positive, got {self.step}")
        if self.bound <= self.start:
            raise JdlError(f"Parameters bound {self.bound} must exceed ParameterStart {self.start}")
        return list(range(self.start, self.bound, self.step))


class JobKind(enum.Enum):
    NORMAL = "Normal"
    PARAMETRIC = "Parametric"
    COLLECTION = "Collection"


JdlValue = object  # str | int | bool | list | VerbatimExpression | JobDescriptor


@dataclass
class JobDescriptor:
    kind: JobKind
    attributes: dict[str, JdlValue] = field(default_factory=dict)
    nodes: list["JobDescriptor"] = field(default_factory=list)
    parameters: ParameterRange | list | None = None

    def get(self, name: str, default=None):
        lowered = name.lower()
        for key, value in self.attributes.items():
            if key.lower() == lowered:
                return value
        return default

    def has(self, name: str) -> bool:
        sentinel = object()
        return self.get(name, sentinel) is not sentinel

    def without(self, *names: str) -> dict[str, JdlValue]:
        dropped = {n.lower() for n in names}
        return {k: v for k, v in self.attributes.items() if k.lower() not in dropped}


# -- tokenizer-free scanner ----------------------------------------------------
#
# Statements are scanned as  IDENT '=' <raw value text> ';'  with strings,
# braces and brackets respected; the raw text is then interpreted, falling
# back to a verbatim expression when it is none of the simple forms.


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def error(self, message: str, at: int | None = None) -> JdlSyntaxError:
        at = self.pos if at is None else at
        line = self.text.count("\n", 0, at) + 1
        column = at - (self.text.rfind("\n", 0, at) + 1) + 1
        return JdlSyntaxError(message, line, column)

    def skip_blank(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#" or self.text.startswith("//", self.pos):
                newline = self.text.find("\n", self.pos)
                self.pos = len(self.text) if newline < 0 else newline + 1
            else:
                return

    def at_end(self) -> bool:
        self.skip_blank()
        return self.pos >= len(self.text)

    def read_identifier(self) -> str:
        self.skip_blank()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] in "_."):
            self.pos += 1
        if self.pos == start:
            raise self.error(f"expected an attribute name, found {self.text[self.pos:self.pos+1]!r}")
        return self.text[start : self.pos]

    def expect(self, ch: str) -> None:
        self.skip_blank()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos : self.pos + 1] or "end of input"
            raise self.error(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def read_raw_until(self, terminators: str, allow_end: bool = False) -> tuple[str, int]:
        """Capture raw text up to an unnested terminator, respecting strings,
        comments, braces and brackets.  Returns (text, position of terminator)."""
        self.skip_blank()
        start = self.pos
        depth = 0
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == '"':
                self._skip_string()
                continue
            if ch == "#" or self.text.startswith("//", self.pos):
                newline = self.text.find("\n", self.pos)
                self.pos = len(self.text) if newline < 0 else newline + 1
                continue
            if ch in "{[(":
                depth += 1
            elif ch in "}])":
                if depth == 0 and ch in terminators:
                    return self.text[start : self.pos], self.pos
                depth -= 1
                if depth < 0:
                    raise self.error(f"unbalanced {ch!r}")
            elif depth == 0 and ch in terminators:
                return self.text[start : self.pos], self.pos
            self.pos += 1
        if allow_end and depth == 0:
            return self.text[start : self.pos], self.pos
        raise self.error(f"unterminated statement (missing one of {terminators!r})", start)

    def _skip_string(self) -> None:
        opening = self.pos
        self.pos += 1
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\":
                self.pos += 2
                continue
            if ch == '"':
                self.pos += 1
                return
            self.pos += 1
        raise self.error("unterminated string", opening)


def _interpret_string(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body) and body[i + 1] in '"\\':
            out.append(body[i + 1])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _interpret_value(raw: str, scanner: _Scanner, at: int):
    """Turn captured raw value text into a typed value, or a verbatim expression."""
    text = raw.strip()
    if not text:
        raise scanner.error("empty value", at)
    if text.startswith('"'):
        inner = _Scanner(text)
        inner._skip_string()
        if inner.pos == len(text):
            return _interpret_string(text)
        return VerbatimExpression(text)
    if text.startswith("{"):
        if not text.endswith("}"):
            return VerbatimExpression(text)
        return _interpret_list(text[1:-1], scanner, at)
    if text.startswith("["):
        if not text.endswith("]"):
            return VerbatimExpression(text)
        return _parse_descriptor_body(text[1:-1])
    lowered = text.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    try:
        return int(text)
    except ValueError:
        return VerbatimExpression(text)


def _interpret_list(body: str, scanner: _Scanner, at: int) -> list:
    items: list = []
    inner = _Scanner(body)
    while not inner.at_end():
        raw, _ = inner.read_raw_until(",", allow_end=True)
        items.append(_interpret_value(raw, scanner, at))
        inner.skip_blank()
        if inner.pos < len(inner.text) and inner.text[inner.pos] == ",":
            inner.pos += 1
            if inner.at_end():
                raise scanner.error("trailing comma in list", at)
    if not items:
        return []
    return items


def _parse_statements(text: str) -> dict[str, JdlValue]:
    scanner = _Scanner(text)
    attributes: dict[str, JdlValue] = {}
    while not scanner.at_end():
        name = scanner.read_identifier()
        scanner.expect("=")
        value_at = scanner.pos
        raw, _ = scanner.read_raw_until(";")
        scanner.expect(";")
        attributes[name] = _interpret_value(raw, scanner, value_at)
    return attributes


def _parse_descriptor_body(text: str) -> "JobDescriptor":
    return _descriptor_from_attributes(_parse_statements(text))


def _descriptor_from_attributes(attributes: dict[str, JdlValue]) -> JobDescriptor:
    descriptor = JobDescriptor(kind=JobKind.NORMAL, attributes=attributes)

    declared_type = descriptor.get("Type")
    job_type = descriptor.get("JobType")
    if isinstance(declared_type, str) and declared_type.lower() == "collection":
        descriptor.kind = JobKind.COLLECTION
    elif isinstance(job_type, str) and job_type.lower() == "parametric":
        descriptor.kind = JobKind.PARAMETRIC

    if descriptor.kind is JobKind.COLLECTION:
        nodes = descriptor.get("Nodes")
        if not isinstance(nodes, list) or not nodes:
            raise JdlError("a collection needs a non-empty Nodes list")
        if not all(isinstance(node, JobDescriptor) for node in nodes):
            raise JdlError("Nodes entries must be bracketed sub-descriptors")
        if descriptor.has("Executable"):
            raise JdlError("a collection must not carry a top-level Executable")
        descriptor.nodes = list(nodes)
        return descriptor

    executable = descriptor.get("Executable")
    if executable is None:
        raise JdlError("missing mandatory Executable attribute")
    if not isinstance(executable, str) or not executable:
        raise JdlError("Executable must be a non-empty string")

    if descriptor.kind is JobKind.PARAMETRIC:
        descriptor.parameters = _parameter_spec(descriptor)
    return descriptor


def _parameter_spec(descriptor: JobDescriptor) -> ParameterRange | list:
    parameters = descriptor.get("Parameters")
    if parameters is None:
        raise JdlError("a parametric job needs a Parameters attribute")
    if isinstance(parameters, list):
        if not parameters:
            raise JdlError("empty Parameters list")
        return parameters
    if isinstance(parameters, int):
        start = descriptor.get("ParameterStart", 0)
        step = descriptor.get("ParameterStep", 1)
        if not isinstance(start, int) or not isinstance(step, int):
            raise JdlError("ParameterStart and ParameterStep must be integers")
        spec = ParameterRange(start=start, step=step, bound=parameters)
        spec.values()  # validate eagerly
        return spec
    raise JdlError("Parameters must be an integer bound or an explicit list")


def parse_jdl(text: str) -> JobDescriptor:
    """Parse JDL text into a descriptor; raises JdlSyntaxError with position
    info for malformed text and JdlError for rule violations."""
    if not text or not text.strip():
        raise JdlError("empty job description")
    return _descriptor_from_attributes(_parse_statements(text))


# -- formatting ----------------------------------------------------------------


def _format_value(value: JdlValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return _quote(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, VerbatimExpression):
        return value.text
    if isinstance(value, list):
        return "{" + ", ".join(_format_value(v) for v in value) + "}"
    if isinstance(value, JobDescriptor):
        inner = format_jdl(value).replace("\n", "\n  ").rstrip()
        return "[\n  " + inner + "\n]"
    raise TypeError(f"cannot format value of type {type(value).__name__}")


def format_jdl(descriptor: JobDescriptor) -> str:
    lines = [f"{name} = {_format_value(value)};" for name, value in descriptor.attributes.items()]
    return "\n".join(lines) + "\n"


# -- expansion -----------------------------------------------------------------

_PLACEHOLDER = "_PARAM_"
_PARAMETRIC_CONTROL = ("JobType", "Parameters", "ParameterStart", "ParameterStep")


def _substitute(value: JdlValue, replacement: str) -> JdlValue:
    if isinstance(value, str):
        return value.replace(_PLACEHOLDER, replacement)
    if isinstance(value, list):
        return [_substitute(item, replacement) for item in value]
    return value


def expand(descriptor: JobDescriptor) -> list[JobDescriptor]:
    """Flatten a descriptor into concrete Normal jobs, deterministically.

    Parametric jobs yield one job per parameter value with _PARAM_ replaced
    in every string attribute; collections concatenate their nodes'
    expansions in node order.
    """
    if descriptor.kind is JobKind.NORMAL:
        return [descriptor]

    if descriptor.kind is JobKind.PARAMETRIC:
        spec = descriptor.parameters
        if spec is None:
            raise JdlError("a parametric job needs a parameter specification")
        values = spec.values() if isinstance(spec, ParameterRange) else list(spec)
        if not values:
            raise JdlError("empty parameter list")
        jobs = []
        for value in values:
            rendered = str(value) if not isinstance(value, bool) else ("true" if value else "false")
            attributes = {
                name: _substitute(attr, rendered)
                for name, attr in descriptor.without(*_PARAMETRIC_CONTROL).items()
            }
            jobs.append(JobDescriptor(kind=JobKind.NORMAL, attributes=attributes))
        return jobs

    if not descriptor.nodes:
        raise JdlError("empty collection")
    jobs = []
    for node in descriptor.nodes:
        jobs.extend(expand(node))
    return jobs
