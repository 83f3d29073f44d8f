"""Writers for the portable artifact formats.

These implement the wire layout from the pipeline's artifact contract and are
deliberately standalone: the exporter runs next to model code where the
pipeline package need not be installed, and the byte format is the interface.

Feature bank (magic ``PRFB``)::

    PRFB | version u16 | kind u8 | dim u32 | count u64
         | count x (UTF-8 id + NUL) | count*dim float32 LE | CRC32 u32

Grouped bank (magic ``PRFG``) inserts ``(count+1)`` u64 offsets before the
rows. All integers little-endian; the trailing CRC32 covers every preceding
byte. Vocabularies are one entry per line; generative ones carry the
``[BOS]``/``[EOS]`` marker lines. Candidate tables are JSON maps from sample
id to ``[answer, score]`` pairs.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BANK_VERSION = 1
MAGIC_FLAT = b"PRFB"
MAGIC_GROUPED = b"PRFG"
KIND_CODES = {"fused": 0, "question": 1, "image": 2, "answer_logits": 3}

BOS = "[BOS]"
EOS = "[EOS]"


class ExportFormatError(ValueError):
    pass


def _header(magic: bytes, kind: str, dim: int, count: int) -> bytes:
    if kind not in KIND_CODES:
        raise ExportFormatError(f"unknown bank kind {kind!r}")
    return magic + struct.pack("<HBIQ", BANK_VERSION, KIND_CODES[kind], dim, count)


def _ids_blob(sample_ids: Iterable[str]) -> bytes:
    blob = bytearray()
    for sid in sample_ids:
        encoded = sid.encode("utf-8")
        if b"\x00" in encoded:
            raise ExportFormatError(f"sample id {sid!r} contains a NUL byte")
        blob += encoded + b"\x00"
    return bytes(blob)


def _finish(body: bytes, path: Path) -> None:
    crc = zlib.crc32(body) & 0xFFFFFFFF
    path.write_bytes(body + struct.pack("<I", crc))


def write_feature_bank(path: str | Path, kind: str, sample_ids: Sequence[str],
                       rows: np.ndarray) -> None:
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] != len(sample_ids):
        raise ExportFormatError(
            f"rows must be ({len(sample_ids)}, dim), got {rows.shape}"
        )
    body = _header(MAGIC_FLAT, kind, rows.shape[1], rows.shape[0])
    body += _ids_blob(sample_ids)
    body += np.ascontiguousarray(rows, dtype="<f4").tobytes()
    _finish(body, Path(path))


def write_grouped_bank(path: str | Path, kind: str, sample_ids: Sequence[str],
                       groups: Sequence[np.ndarray]) -> None:
    if len(groups) != len(sample_ids):
        raise ExportFormatError("one group per sample id required")
    dims = {np.asarray(g).shape[1] for g in groups}
    if len(dims) != 1:
        raise ExportFormatError(f"groups disagree on dim: {sorted(dims)}")
    dim = dims.pop()
    lengths = [np.asarray(g).shape[0] for g in groups]
    if min(lengths) < 1:
        raise ExportFormatError("every group needs at least one row")
    offsets = np.zeros(len(groups) + 1, dtype="<u8")
    offsets[1:] = np.cumsum(lengths)
    body = _header(MAGIC_GROUPED, kind, dim, len(sample_ids))
    body += _ids_blob(sample_ids)
    body += offsets.tobytes()
    stacked = np.concatenate([np.asarray(g) for g in groups], axis=0)
    body += np.ascontiguousarray(stacked, dtype="<f4").tobytes()
    _finish(body, Path(path))


def write_vocabulary(path: str | Path, entries: Sequence[str]) -> None:
    Path(path).write_text("\n".join(entries) + "\n", encoding="utf-8")


def write_candidate_table(path: str | Path,
                          table: Mapping[str, Sequence[tuple[str, float]]]) -> None:
    doc = {sid: [[answer, float(score)] for answer, score in pairs]
           for sid, pairs in table.items()}
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def write_manifest(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")
