"""Checkpoint and CSV persistence.

Checkpoints are plain text::

    chbs-state 1
    mesh <digest>
    t <float>
    beta <float>
    L <float>
    tau <float>
    lambda <float>          (stationary points only)
    values <N>
    <N lines, one nodal value each>

Floats are written as shortest round-trip decimals (``repr``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Checkpoint", "write_checkpoint", "read_checkpoint", "write_csv", "CheckpointError"]

_HEADER_KEYS = ("t", "beta", "L", "tau")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    mesh_digest: str
    t: float
    beta: float
    L: float
    tau: float
    values: np.ndarray
    lam: float | None = None


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    lines = ["chbs-state 1", "mesh %s" % ckpt.mesh_digest]
    for key in _HEADER_KEYS:
        lines.append("%s %r" % (key, float(getattr(ckpt, key))))
    if ckpt.lam is not None:
        lines.append("lambda %r" % float(ckpt.lam))
    vals = np.asarray(ckpt.values, dtype=float)
    lines.append("values %d" % len(vals))
    lines += [repr(float(x)) for x in vals]
    Path(path).write_text("\n".join(lines) + "\n")


def read_checkpoint(path, mesh_digest: str | None = None) -> Checkpoint:
    """Parse a checkpoint; if ``mesh_digest`` is given it must match."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "chbs-state 1":
        raise CheckpointError("missing 'chbs-state 1' header")
    head = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("values"):
        parts = lines[pos].split()
        if len(parts) != 2:
            raise CheckpointError("bad header line %r" % lines[pos])
        head[parts[0]] = parts[1]
        pos += 1
    missing = {"mesh", *_HEADER_KEYS} - set(head)
    if missing:
        raise CheckpointError("missing header fields: %s" % ", ".join(sorted(missing)))
    if pos >= len(lines):
        raise CheckpointError("missing values section")
    try:
        n = int(lines[pos].split()[1])
        vals = np.array([float(x) for x in lines[pos + 1:]])
    except (IndexError, ValueError) as exc:
        raise CheckpointError("bad values section") from exc
    if len(vals) != n:
        raise CheckpointError("expected %d values, found %d" % (n, len(vals)))
    if mesh_digest is not None and head["mesh"] != mesh_digest:
        raise CheckpointError("checkpoint belongs to mesh %s, not %s" % (head["mesh"], mesh_digest))
    return Checkpoint(
        mesh_digest=head["mesh"],
        t=float(head["t"]),
        beta=float(head["beta"]),
        L=float(head["L"]),
        tau=float(head["tau"]),
        values=vals,
        lam=float(head["lambda"]) if "lambda" in head else None,
    )


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return str(x)


def write_csv(path, columns, rows, comment: str | None = None) -> None:
    """Comma-separated, ``.`` decimal, LF line endings, optional ``# comment`` line."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write("# %s\n" % comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
