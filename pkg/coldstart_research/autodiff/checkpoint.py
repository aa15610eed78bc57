"""
Checkpoint file layout, all little-endian:

    magic      4 bytes  b"MPTC"
    version    u16
    flags      u16      bit 0 set when some task diverged (partial checkpoint)
    fingerprint 32 bytes sha256 digest of the producing configuration
    count      u32      number of arrays
    then per array, sorted by name:
        name_len u16, name utf-8, ndim u8, dims u32 * ndim, values f64 * prod(dims)
"""
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from .._scheme import ArtifactError

MAGIC = b"MPTC"
VERSION = 1
FLAG_PARTIAL = 1


@dataclass
class Checkpoint:
    arrays: Dict[str, np.ndarray]
    fingerprint: str
    partial: bool = False
    version: int = VERSION

    @property
    def sections(self) -> List[str]:
        """Task prefixes present, e.g. ['Cg', 'Rg']."""
        return sorted({name.split("/", 1)[0] for name in self.arrays})

    def section(self, prefix: str) -> Dict[str, np.ndarray]:
        return {n: a for n, a in self.arrays.items() if n.split("/", 1)[0] == prefix}

    def subset(self, prefixes, fingerprint: str) -> "Checkpoint":
        keep = set(prefixes)
        return Checkpoint({n: a for n, a in self.arrays.items() if n.split("/", 1)[0] in keep}, fingerprint,
                          self.partial)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    digest = bytes.fromhex(ckpt.fingerprint)
    if len(digest) != 32:
        raise ArtifactError("fingerprint must be a sha256 hex digest")
    chunks = [MAGIC, struct.pack("<HH", ckpt.version, FLAG_PARTIAL if ckpt.partial else 0), digest,
              struct.pack("<I", len(ckpt.arrays))]
    for name in sorted(ckpt.arrays):
        value = np.ascontiguousarray(ckpt.arrays[name], dtype="<f8")
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(value.tobytes())
    return b"".join(chunks)


def decode_checkpoint(data: bytes) -> Checkpoint:
    if data[:4] != MAGIC:
        raise ArtifactError("not a checkpoint file (bad magic)")
    try:
        version, flags = struct.unpack_from("<HH", data, 4)
        fingerprint = data[8:40].hex()
        (count,) = struct.unpack_from("<I", data, 40)
        offset = 44
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            if offset + 8 * n > len(data):
                raise ArtifactError(f"checkpoint truncated inside {name!r}")
            arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(shape).astype(np.float64)
            offset += 8 * n
    except struct.error as e:
        raise ArtifactError(f"checkpoint truncated: {e}") from e
    if offset != len(data):
        raise ArtifactError("trailing bytes after the last array")
    if version != VERSION:
        raise ArtifactError(f"unsupported checkpoint version {version}")
    return Checkpoint(arrays, fingerprint, bool(flags & FLAG_PARTIAL), version)


def atomic_write_bytes(path, data: bytes) -> Path:
    """Write to a temp file in the same folder, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    return atomic_write_bytes(path, encode_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"no checkpoint at {path}")
    return decode_checkpoint(path.read_bytes())
