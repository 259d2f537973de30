"""PGM images and CSV traces on disk."""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import ConfigError, StovampError
from .metrics import TraceRecord

TRACE_COLUMNS = ("iter", "block", "nmse_db", "eta1", "gamma1", "tau1", "wall_ms")
DERIVED_TAG = "[derived]"


class FormatError(StovampError, ValueError):
    """Malformed input file; the message names the byte offset."""


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    pos, out = 0, []
    while len(out) < count:
        pos = _TOKEN.match(data, pos).end()
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if pos == start:
            raise FormatError(f"truncated PGM header at byte {start}")
        out.append(data[start:pos])
    return out, pos


def load_pgm(path) -> tuple[np.ndarray, tuple[int, int]]:
    """Read a P2 or P5 PGM; returns the row-major pixels scaled to [0, 1] as a complex vector."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read image {path}: {exc}") from exc
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: not a P2/P5 PGM (byte 0: {magic!r})")
    tokens, pos = _header_tokens(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: non-integer header field before byte {pos}") from None
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise FormatError(f"{path}: bad dimensions or maxval in header ending at byte {pos}")
    n = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise FormatError(f"{path}: expected whitespace after header at byte {pos}")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(data) - pos < need:
            raise FormatError(f"{path}: payload truncated at byte {len(data)}, expected {need} bytes from byte {pos}")
        pix = np.frombuffer(data, dtype=dtype, count=n, offset=pos).astype(np.float64)
    else:
        fields = []
        for m in re.finditer(rb"\S+", data[pos:]):
            if len(fields) == n:
                break
            try:
                fields.append(int(m.group()))
            except ValueError:
                raise FormatError(f"{path}: bad pixel value at byte {pos + m.start()}") from None
        if len(fields) < n:
            raise FormatError(f"{path}: payload truncated at byte {len(data)}, got {len(fields)} of {n} pixels")
        pix = np.asarray(fields, dtype=np.float64)
    if np.any(pix > maxval):
        raise FormatError(f"{path}: pixel value above maxval {maxval}")
    return (pix / maxval).astype(np.complex128), (height, width)


def write_pgm(path, pixels: np.ndarray) -> None:
    """Write a 2-d array of values in [0, 1] as an 8-bit binary PGM."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {pixels.shape}")
    h, w = pixels.shape
    body = np.round(np.clip(pixels, 0.0, 1.0) * 255).astype(np.uint8)
    _write_bytes(path, b"P5\n%d %d\n255\n" % (w, h) + body.tobytes())


def _write_bytes(path, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace(records: Iterable[TraceRecord], path, echo: Optional[Mapping[str, object]] = None,
                derived: Optional[Mapping[str, object]] = None) -> None:
    """CSV trace preceded by ``# key = value`` config lines and ``# [derived] key = value`` facts."""
    lines = [f"# {k} = {v}" for k, v in (echo or {}).items()]
    lines += [f"# {DERIVED_TAG} {k} = {v}" for k, v in (derived or {}).items()]
    lines.append(",".join(TRACE_COLUMNS))
    for r in records:
        lines.append(",".join(_fmt(v) for v in (r.iteration, r.block, r.nmse_db, r.eta1, r.gamma1, r.tau1, r.wall_ms)))
    _write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_trace(path) -> tuple[list[TraceRecord], dict[str, str], dict[str, str]]:
    """Inverse of :func:`write_trace`; returns ``(records, echo, derived)``."""
    echo, derived, rows = {}, {}, []
    with open(path, newline="") as fh:
        body = []
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    continue
                key = key.strip()
                if key.startswith(DERIVED_TAG):
                    derived[key[len(DERIVED_TAG):].strip()] = value.strip()
                else:
                    echo[key] = value.strip()
            else:
                body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if tuple(header or ()) != TRACE_COLUMNS:
        raise FormatError(f"{path}: unexpected trace header {header}")
    for row in reader:
        k, l, e, eta1, g1, t1, ms = row
        rows.append(TraceRecord(int(k), int(l), float(e) if e else None, float(eta1), float(g1), float(t1), float(ms)))
    return rows, echo, derived


def first_below(records: Sequence[TraceRecord], threshold_db: float) -> Optional[int]:
    """Iteration at which the NMSE first reaches ``threshold_db``, or None."""
    for r in records:
        if r.nmse_db is not None and r.nmse_db <= threshold_db:
            return r.iteration
    return None


def final_nmse_db(records: Sequence[TraceRecord]) -> float:
    if not records or records[-1].nmse_db is None:
        return math.nan
    return records[-1].nmse_db
