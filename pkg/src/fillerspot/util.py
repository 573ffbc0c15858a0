"""Small shared helpers: atomic file writes, worker caps, number formatting."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

WORKER_ENV_VAR = "FILLERSPOT_NUM_WORKERS"


def atomic_write_text(path: Path | str, text: str) -> Path:
    """Write *text* to *path* via a temp file and rename.

    Guarantees no partially written file is left behind if the write fails.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_bytes(path: Path | str, data: bytes) -> Path:
    """Binary counterpart of :func:`atomic_write_text`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def worker_cap(default: int | None = None) -> int | None:
    """Worker-count cap from the FILLERSPOT_NUM_WORKERS environment variable.

    Returns *default* when the variable is unset. Raises ValueError on a
    non-positive or non-integer value.
    """
    raw = os.environ.get(WORKER_ENV_VAR)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKER_ENV_VAR} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"{WORKER_ENV_VAR} must be >= 1, got {value}")
    return value


def apply_worker_cap(default: int | None = None) -> int:
    """Cap torch intra-op threads to the configured worker count.

    Falls back to *default* when the environment variable is unset. A fixed
    thread count is also what keeps repeated runs bit-reproducible.
    """
    import torch

    cap = worker_cap(default)
    if cap is not None:
        torch.set_num_threads(cap)
    return torch.get_num_threads()


def fmt6(x: float) -> str:
    """Fixed 6-decimal rendering used for all numeric file/console output."""
    return f"{float(x):.6f}"
