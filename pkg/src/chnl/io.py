"""
Binary snapshot and checkpoint files.

Snapshot (``CHNL``)::

    magic "CHNL" | version u32 = 1 | dim u32 | cells u32 x dim
    | lengths f64 x dim | bc u8 (0 no-flux, 1 periodic) | t f64 | values f64 ...

Checkpoint (``CHKP``)::

    magic "CHKP" | version u32 = 1 | dim u32 | cells u32 x dim
    | lengths f64 x dim | bc u8 | t f64 | tau f64 | u f64 ... | w f64 ...

All numbers little-endian, fields row-major.  Readers reject bad magic,
unsupported versions, truncation and trailing bytes without returning
partial data.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FormatError
from .grid import BC, Domain, Field

__all__ = ["write_snapshot", "read_snapshot", "write_checkpoint", "read_checkpoint"]

SNAPSHOT_MAGIC = b"CHNL"
CHECKPOINT_MAGIC = b"CHKP"
SUPPORTED_VERSIONS = (1,)
_F64 = np.dtype("<f8")


def _domain_bytes(domain: Domain) -> bytes:
    d = domain.dim
    return (
        struct.pack("<I", d)
        + struct.pack(f"<{d}I", *domain.cells)
        + struct.pack(f"<{d}d", *domain.lengths)
        + struct.pack("<B", int(domain.bc))
    )


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file ({len(self.data)} bytes)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        raw = self.take(n * 8)
        return np.frombuffer(raw, dtype=_F64).astype(np.float64).reshape(shape)

    def finish(self):
        if self.pos != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def _read_header(rd: _Reader, magic: bytes) -> Domain:
    got = rd.take(4)
    if got != magic:
        raise FormatError(f"{rd.path}: bad magic {got!r}, expected {magic!r}")
    (version,) = rd.unpack("<I")
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(
            f"{rd.path}: unsupported version {version}; supported versions: {SUPPORTED_VERSIONS}"
        )
    (dim,) = rd.unpack("<I")
    if dim not in (1, 2, 3):
        raise FormatError(f"{rd.path}: invalid dimension {dim}")
    cells = rd.unpack(f"<{dim}I")
    lengths = rd.unpack(f"<{dim}d")
    (bc,) = rd.unpack("<B")
    try:
        return Domain(cells, lengths, BC(bc))
    except ValueError as exc:
        raise FormatError(f"{rd.path}: invalid domain descriptor ({exc})") from None


def _atomic_write(path, payload: bytes) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_snapshot(field: Field, path, t: float = 0.0) -> None:
    payload = (
        SNAPSHOT_MAGIC
        + struct.pack("<I", 1)
        + _domain_bytes(field.domain)
        + struct.pack("<d", float(t))
        + np.ascontiguousarray(field.values, dtype=_F64).tobytes()
    )
    _atomic_write(path, payload)


def read_snapshot(path) -> tuple[Field, float]:
    """Return ``(field, t)``."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), path)
    dom = _read_header(rd, SNAPSHOT_MAGIC)
    (t,) = rd.unpack("<d")
    vals = rd.array(dom.shape)
    rd.finish()
    return Field(dom, vals), t


def write_checkpoint(path, t: float, tau: float, u: Field, w: Field) -> None:
    if u.domain != w.domain:
        raise ValueError("u and w must share a domain")
    payload = (
        CHECKPOINT_MAGIC
        + struct.pack("<I", 1)
        + _domain_bytes(u.domain)
        + struct.pack("<dd", float(t), float(tau))
        + np.ascontiguousarray(u.values, dtype=_F64).tobytes()
        + np.ascontiguousarray(w.values, dtype=_F64).tobytes()
    )
    _atomic_write(path, payload)


def read_checkpoint(path) -> tuple[float, float, Field, Field]:
    """Return ``(t, tau, u, w)``."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), path)
    dom = _read_header(rd, CHECKPOINT_MAGIC)
    t, tau = rd.unpack("<dd")
    u = rd.array(dom.shape)
    w = rd.array(dom.shape)
    rd.finish()
    return t, tau, Field(dom, u), Field(dom, w)
