"""Small file helpers: atomic writes, input digests, model-file headers."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from .errors import InputError


def atomic_write(path: str | Path, text: str) -> None:
    """Write text to path via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def csv_field(value: str) -> str:
    """Quote a CSV field by hand; keeps model files free of csv.writer quirks."""
    if any(c in value for c in ',"\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def parse_model_header(
    path: Path, lines: list[str], tag: str, keys: tuple[str, ...]
) -> dict[str, str]:
    """Parse the '# key=value' header block shared by model CSV files."""
    if not lines or lines[0] != f"# {tag}":
        raise InputError(f"{path}: expected '# {tag}' on the first line")
    header: dict[str, str] = {}
    for line in lines[1:]:
        if not line.startswith("# "):
            break
        key, sep, value = line[2:].partition("=")
        if sep:
            header[key] = value
    missing = [k for k in keys if k not in header]
    if missing:
        raise InputError(f"{path}: header missing {', '.join(missing)}")
    return header
