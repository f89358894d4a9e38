"""Binary checkpoint container.

Layout: ``b"MOHN"``, one format-version byte, then named sections until an
``end`` section. Each section is::

    u8 name length | name (ascii) | u64 payload length | payload | u32 CRC32(payload)

Integers and floats are little-endian; arrays are raw float64/int64 bytes.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from .errors import CorruptCheckpoint, IoFailure, MissingFile, VersionMismatch

MAGIC = b"MOHN"
FORMAT_VERSION = 1


def f64_bytes(arrays) -> bytes:
    return b"".join(np.asarray(a, dtype="<f8").tobytes() for a in arrays)


def split_f64(payload: bytes, shapes) -> list[np.ndarray]:
    flat = np.frombuffer(payload, dtype="<f8")
    total = sum(int(np.prod(s)) for s in shapes)
    if flat.size != total:
        raise CorruptCheckpoint(f"expected {total} floats, found {flat.size}")
    out, pos = [], 0
    for s in shapes:
        n = int(np.prod(s))
        out.append(flat[pos: pos + n].astype(np.float64).reshape(s))
        pos += n
    return out


def json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True).encode()


def write_container(path, sections: dict[str, bytes]) -> None:
    chunks = [MAGIC, bytes([FORMAT_VERSION])]
    for name, payload in list(sections.items()) + [("end", b"")]:
        raw = name.encode("ascii")
        chunks.append(struct.pack("<B", len(raw)) + raw)
        chunks.append(struct.pack("<Q", len(payload)))
        chunks.append(payload)
        chunks.append(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def read_container(path) -> dict[str, bytes]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise MissingFile(f"checkpoint not found: {path}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic bytes")
    if len(blob) < 5:
        raise CorruptCheckpoint(f"{path}: truncated header")
    if blob[4] != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {blob[4]}, expected {FORMAT_VERSION}")
    pos = 5
    sections = {}

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise CorruptCheckpoint(f"{path}: truncated")
        chunk = blob[pos: pos + n]
        pos += n
        return chunk

    while True:
        (name_len,) = struct.unpack("<B", take(1))
        name = take(name_len).decode("ascii", errors="replace")
        (size,) = struct.unpack("<Q", take(8))
        payload = take(size)
        (crc,) = struct.unpack("<I", take(4))
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise CorruptCheckpoint(f"{path}: checksum mismatch in section {name!r}")
        if name == "end":
            break
        sections[name] = payload
    if pos != len(blob):
        raise CorruptCheckpoint(f"{path}: trailing bytes after end section")
    return sections


def require(sections, name):
    try:
        return sections[name]
    except KeyError:
        raise CorruptCheckpoint(f"missing section {name!r}") from None
