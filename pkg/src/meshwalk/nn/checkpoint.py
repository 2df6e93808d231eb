"""Binary checkpoint container.

Layout, all integers little-endian:

    8 bytes   magic ``MWCKPT1\\n``
    8 bytes   unsigned header length n
    n bytes   UTF-8 JSON header: {"meta": {...}, "arrays": [entry, ...]}
    ...       raw array payloads, concatenated in header order

Each array entry records name, dtype (numpy byte-order string, always
little-endian), shape, byte offset into the payload region and byte count.
Writing the same arrays and meta twice produces byte-identical files: the
JSON header is dumped with sorted keys and no whitespace, and payloads are
C-order little-endian bytes in the caller's array order.
"""

import hashlib
import json

import numpy as np

from ..errors import DataError

MAGIC = b"MWCKPT1\n"


def save_checkpoint(path, arrays, meta=None):
    """Write named arrays plus a JSON-serializable meta dict."""
    entries = []
    payloads = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.dtype.newbyteorder("<")
        raw = arr.astype(le, copy=False).tobytes()
        entries.append({"name": name, "dtype": le.str,
                        "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta or {}, "arrays": entries},
                        sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path):
    """Read a checkpoint; returns (arrays dict in file order, meta dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    hlen = int.from_bytes(blob[8:16], "little")
    try:
        header = json.loads(blob[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header: {exc}") from exc
    base = 16 + hlen
    arrays = {}
    end = base
    for entry in header["arrays"]:
        start = base + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(blob):
            raise DataError(f"{path}: truncated checkpoint "
                            f"(array {entry['name']!r} out of range)")
        arr = np.frombuffer(blob[start:stop], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
        end = max(end, stop)
    if end != len(blob):
        raise DataError(f"{path}: {len(blob) - end} trailing bytes")
    return arrays, header["meta"]


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
