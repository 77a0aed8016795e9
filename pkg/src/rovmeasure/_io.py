"""File helpers: transparent gzip input and atomic output."""
from __future__ import annotations

import contextlib
import gzip
import hashlib
import io
import os
import tempfile
from pathlib import Path
from typing import IO, Iterator

DATA_DIR_ENV = "ROVMEASURE_DATA_DIR"


def resolve_input(path: str | os.PathLike) -> Path:
    """Resolve relative paths against $ROVMEASURE_DATA_DIR when not found locally."""
    p = Path(path)
    if not p.is_absolute() and not p.exists():
        base = os.environ.get(DATA_DIR_ENV)
        if base and (Path(base) / p).exists():
            return Path(base) / p
    return p


def open_text(path: str | os.PathLike) -> IO[str]:
    """Open a plain or gzip-compressed text file for reading."""
    p = resolve_input(path)
    with open(p, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(p, "rb"), encoding="utf-8")
    return open(p, encoding="utf-8")


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(resolve_input(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@contextlib.contextmanager
def atomic_write(path: str | os.PathLike) -> Iterator[IO[str]]:
    """Write to a temp file beside ``path`` and rename it into place on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
