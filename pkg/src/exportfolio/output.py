"""Atomic delimiter-separated writers and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence], delimiter: str = ",") -> int:
    """Write a header plus rows; floats are written with ``repr`` precision.

    Returns the number of data rows.
    """
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    n = 0
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
        n += 1
    atomic_write_text(path, buf.getvalue())
    return n


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunLog:
    """Collects emitted files and input fingerprints for ``manifest.json``."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.outputs: dict[str, int] = {}
        self.inputs: dict[str, dict] = {}

    def table(self, name: str, header, rows, delimiter: str = ",") -> Path:
        path = self.out / name
        self.outputs[name] = write_table(path, header, rows, delimiter)
        return path

    def json(self, name: str, obj) -> Path:
        path = self.out / name
        atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
        self.outputs[name] = 1
        return path

    def add_input(self, role: str, path: str | Path | None, rows: int | None = None) -> None:
        if path is None:
            return
        p = Path(path)
        self.inputs[role] = {"path": str(p.resolve()), "sha256": sha256(p), "rows": rows}

    def manifest(self, command: str, parameters: dict, version: str, rerun: list[str]) -> Path:
        return self.json(
            "manifest.json",
            {
                "command": command,
                "tool": "exportfolio",
                "version": version,
                "parameters": parameters,
                "inputs": self.inputs,
                "outputs": dict(sorted(self.outputs.items())),
                "rerun": rerun,
            },
        )
