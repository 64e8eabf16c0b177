"""Sandbox archives: gzip-compressed tar streams with path containment.

No entry may escape the sandbox root: absolute paths, drive letters and
".." segments are rejected on both pack and unpack.
"""

from __future__ import annotations

import gzip
import io
import posixpath
import tarfile
from pathlib import Path
from typing import Iterable


class SandboxError(Exception):
    pass


def _check_entry_path(name: str) -> str:
    if not name:
        raise SandboxError("empty entry path")
    normalized = posixpath.normpath(name.replace("\\", "/"))
    if normalized.startswith("/") or normalized.startswith("../") or normalized == ".." or ":" in normalized.split("/")[0]:
        raise SandboxError(f"entry path escapes the sandbox root: {name!r}")
    if normalized in (".", ""):
        raise SandboxError(f"entry path is not a file name: {name!r}")
    return normalized


def pack(entries: Iterable[tuple[str, bytes]]) -> bytes:
    """Pack (relative path, bytes) entries into a tar.gz stream."""
    buffer = io.BytesIO()
    with tarfile.open(fileobj=buffer, mode="w:gz") as tar:
        for name, data in entries:
            safe = _check_entry_path(name)
            info = tarfile.TarInfo(name=safe)
            info.size = len(data)
            info.mode = 0o644
            tar.addfile(info, io.BytesIO(data))
    return buffer.getvalue()


def unpack(data: bytes) -> list[tuple[str, bytes]]:
    """Unpack a tar.gz stream, refusing links, devices and escaping paths."""
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tar:
            entries: list[tuple[str, bytes]] = []
            for member in tar:
                if member.isdir():
                    _check_entry_path(member.name)
                    continue
                if not member.isfile():
                    raise SandboxError(f"refusing non-regular entry: {member.name!r}")
                safe = _check_entry_path(member.name)
                stream = tar.extractfile(member)
                entries.append((safe, stream.read() if stream else b""))
            return entries
    except (tarfile.TarError, gzip.BadGzipFile, EOFError) as exc:
        raise SandboxError(f"corrupt archive: {exc}") from exc


def pack_paths(paths: Iterable[Path | str]) -> bytes:
    """Pack files from disk under their base names (directories recursively)."""
    entries: list[tuple[str, bytes]] = []
    for item in paths:
        path = Path(item)
        if path.is_dir():
            for child in sorted(path.rglob("*")):
                if child.is_file():
                    entries.append((str(child.relative_to(path.parent)), child.read_bytes()))
        elif path.is_file():
            entries.append((path.name, path.read_bytes()))
        else:
            raise SandboxError(f"no such file: {path}")
    return pack(entries)


def unpack_into(data: bytes, dest: Path | str) -> list[str]:
    """Unpack an archive under dest; returns the written relative paths."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    root = dest.resolve()
    for name, content in unpack(data):
        target = (dest / name).resolve()
        if not target.is_relative_to(root):
            raise SandboxError(f"entry path escapes the sandbox root: {name!r}")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(content)
        written.append(name)
    return written
