"""On-disk model artifacts: dataset manifest, feature banks, vocabularies, candidate tables.

Everything the pipeline consumes is decoupled from any deep-learning framework
through these files:

  * Manifest - JSON document listing samples, bank files, and the vocabulary.
  * FeatureBank - binary file, magic ``PRFB``:
      magic(4) | version u16 | kind u8 | dim u32 | count u64
      | count null-terminated UTF-8 ids | count*dim float32 LE | CRC32 u32
  * GroupedFeatureBank - binary file, magic ``PRFG``; same header/ids, then
    (count+1) u64 offsets before the rows. Row group i spans
    rows[offsets[i]:offsets[i+1]].
  * Vocabulary - UTF-8 text, one entry per line; generative vocabularies must
    contain the ``[BOS]`` and ``[EOS]`` marker lines exactly once.
  * CandidateTable - JSON mapping sample id -> [[answer, score], ...].

All integers are little-endian. The trailing CRC32 covers every byte that
precedes it (including the magic). Loaded objects are immutable and safe to
share across threads.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArtifactError

MANIFEST_VERSION = 1
BANK_VERSION = 1

MAGIC_FLAT = b"PRFB"
MAGIC_GROUPED = b"PRFG"

BANK_KINDS = ("fused", "question", "image", "answer_logits")
_KIND_CODE = {name: i for i, name in enumerate(BANK_KINDS)}

BOS = "[BOS]"
EOS = "[EOS]"

SPLITS = ("train", "test")
EVAL_ANNOTATOR_COUNT = 10


@dataclass(frozen=True)
class Sample:
    """One VQA item as stored in the manifest."""

    id: str
    question: str
    caption: str
    answers: tuple[str, ...]
    split: str
    ocr_tokens: tuple[str, ...] | None = None
    hint: str | None = None
    choices: tuple[str, ...] | None = None
    category: str | None = None
    tags: tuple[str, ...] | None = None

    def validate(self) -> None:
        if self.split not in SPLITS:
            raise ArtifactError(f"sample {self.id!r}: unknown split {self.split!r}")
        if self.split == "train":
            if len(self.answers) < 1:
                raise ArtifactError(f"sample {self.id!r}: train samples need >= 1 answer")
        elif len(self.answers) != EVAL_ANNOTATOR_COUNT:
            raise ArtifactError(
                f"sample {self.id!r}: test samples need exactly "
                f"{EVAL_ANNOTATOR_COUNT} annotator answers, got {len(self.answers)}"
            )
        if self.choices is not None and len(self.choices) < 2:
            raise ArtifactError(f"sample {self.id!r}: choices present but fewer than 2")

    def modal_answer(self) -> str:
        """Most common annotator answer; ties broken by first annotator order."""
        counts: dict[str, int] = {}
        for a in self.answers:
            counts[a] = counts.get(a, 0) + 1
        best = max(counts.values())
        for a in self.answers:
            if counts[a] == best:
                return a
        raise ArtifactError(f"sample {self.id!r}: no answers")


@dataclass(frozen=True)
class AnswerCandidate:
    """An answer string with its confidence score in (0, 1].

    ``log_score`` is populated only by the beam-search path and carries the raw
    accumulated log probability of the decoded sequence.
    """

    answer: str
    score: float
    log_score: float | None = None

    def __post_init__(self) -> None:
        if not self.answer:
            raise ArtifactError("candidate answer must be non-empty")
        if not np.isfinite(self.score) or self.score <= 0:
            raise ArtifactError(f"candidate score must be finite and positive, got {self.score}")


class FeatureBank:
    """Dense float32 feature rows aligned to sample ids. Immutable."""

    def __init__(self, kind: str, sample_ids: Sequence[str], rows: np.ndarray):
        if kind not in BANK_KINDS:
            raise ArtifactError(f"unknown bank kind {kind!r}")
        rows = np.asarray(rows, dtype=np.float32)
        if rows.ndim != 2:
            raise ArtifactError(f"bank rows must be 2-D, got shape {rows.shape}")
        if len(sample_ids) != rows.shape[0]:
            raise ArtifactError(
                f"bank has {len(sample_ids)} ids but {rows.shape[0]} rows"
            )
        bad = np.flatnonzero(~np.isfinite(rows).all(axis=1))
        if bad.size:
            raise ArtifactError(f"non-finite value in bank row {int(bad[0])}")
        seen: set[str] = set()
        for sid in sample_ids:
            if sid in seen:
                raise ArtifactError(f"duplicate sample id {sid!r} in bank")
            seen.add(sid)
        self.kind = kind
        self.sample_ids = tuple(sample_ids)
        self.rows = rows
        self.rows.setflags(write=False)
        self._index = {sid: i for i, sid in enumerate(self.sample_ids)}

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def count(self) -> int:
        return int(self.rows.shape[0])

    def row_index(self, sample_id: str) -> int:
        try:
            return self._index[sample_id]
        except KeyError:
            raise ArtifactError(f"sample id {sample_id!r} not in bank") from None

    def has_id(self, sample_id: str) -> bool:
        return sample_id in self._index

    def row(self, sample_id: str) -> np.ndarray:
        return self.rows[self.row_index(sample_id)]

    def subset(self, sample_ids: Sequence[str]) -> "FeatureBank":
        """New bank holding the given ids, in the given order."""
        idx = [self.row_index(sid) for sid in sample_ids]
        return FeatureBank(self.kind, list(sample_ids), self.rows[idx].copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureBank):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.rows, other.rows)
        )

    def __repr__(self) -> str:
        return f"FeatureBank(kind={self.kind!r}, count={self.count}, dim={self.dim})"


class GroupedFeatureBank:
    """Ragged per-sample groups of float32 feature rows. Immutable."""

    def __init__(self, kind: str, sample_ids: Sequence[str], offsets: np.ndarray, rows: np.ndarray):
        if kind not in BANK_KINDS:
            raise ArtifactError(f"unknown bank kind {kind!r}")
        offsets = np.asarray(offsets, dtype=np.uint64)
        rows = np.asarray(rows, dtype=np.float32)
        count = len(sample_ids)
        if offsets.shape != (count + 1,):
            raise ArtifactError(
                f"grouped bank needs {count + 1} offsets, got {offsets.shape}"
            )
        if offsets[0] != 0:
            raise ArtifactError("grouped bank offsets must start at 0")
        if np.any(np.diff(offsets.astype(np.int64)) < 0):
            raise ArtifactError("grouped bank offsets must be monotone non-decreasing")
        if int(offsets[-1]) != rows.shape[0]:
            raise ArtifactError(
                f"grouped bank offsets end at {int(offsets[-1])} but bank has {rows.shape[0]} rows"
            )
        if np.any(np.diff(offsets.astype(np.int64)) < 1):
            raise ArtifactError("grouped bank group lengths must be >= 1")
        bad = np.flatnonzero(~np.isfinite(rows).all(axis=1))
        if bad.size:
            raise ArtifactError(f"non-finite value in grouped bank row {int(bad[0])}")
        seen: set[str] = set()
        for sid in sample_ids:
            if sid in seen:
                raise ArtifactError(f"duplicate sample id {sid!r} in grouped bank")
            seen.add(sid)
        self.kind = kind
        self.sample_ids = tuple(sample_ids)
        self.offsets = offsets
        self.rows = rows
        self.offsets.setflags(write=False)
        self.rows.setflags(write=False)
        self._index = {sid: i for i, sid in enumerate(self.sample_ids)}

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def count(self) -> int:
        return len(self.sample_ids)

    def group_index(self, sample_id: str) -> int:
        try:
            return self._index[sample_id]
        except KeyError:
            raise ArtifactError(f"sample id {sample_id!r} not in grouped bank") from None

    def has_id(self, sample_id: str) -> bool:
        return sample_id in self._index

    def group(self, i: int) -> np.ndarray:
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        return self.rows[lo:hi]

    def group_by_id(self, sample_id: str) -> np.ndarray:
        return self.group(self.group_index(sample_id))

    def subset(self, sample_ids: Sequence[str]) -> "GroupedFeatureBank":
        groups = [self.group_by_id(sid) for sid in sample_ids]
        lengths = [g.shape[0] for g in groups]
        offsets = np.zeros(len(groups) + 1, dtype=np.uint64)
        offsets[1:] = np.cumsum(lengths)
        rows = np.concatenate(groups, axis=0) if groups else np.zeros((0, self.dim), np.float32)
        return GroupedFeatureBank(self.kind, list(sample_ids), offsets, rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupedFeatureBank):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.rows, other.rows)
        )

    def __repr__(self) -> str:
        return f"GroupedFeatureBank(kind={self.kind!r}, count={self.count}, dim={self.dim})"


class AnswerVocabulary:
    """Ordered answer entries (discriminative) or word tokens (generative)."""

    def __init__(self, entries: Sequence[str], kind: str = "discriminative"):
        if kind not in ("discriminative", "generative"):
            raise ArtifactError(f"unknown vocabulary type {kind!r}")
        seen: set[str] = set()
        for e in entries:
            if e in seen:
                raise ArtifactError(f"duplicate vocabulary entry {e!r}")
            seen.add(e)
        if kind == "generative":
            for marker in (BOS, EOS):
                if marker not in seen:
                    raise ArtifactError(f"generative vocabulary missing {marker}")
        self.entries = tuple(entries)
        self.kind = kind
        self._index = {e: i for i, e in enumerate(self.entries)}

    @property
    def size(self) -> int:
        return len(self.entries)

    def index(self, entry: str) -> int:
        try:
            return self._index[entry]
        except KeyError:
            raise ArtifactError(f"entry {entry!r} not in vocabulary") from None

    def __contains__(self, entry: str) -> bool:
        return entry in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnswerVocabulary):
            return NotImplemented
        return self.kind == other.kind and self.entries == other.entries


# --------------------------------------------------------------------------
# Binary bank IO


def _pack_header(magic: bytes, kind: str, dim: int, count: int) -> bytes:
    return magic + struct.pack("<HBIQ", BANK_VERSION, _KIND_CODE[kind], dim, count)


def _pack_ids(ids: Iterable[str]) -> bytes:
    out = bytearray()
    for sid in ids:
        raw = sid.encode("utf-8")
        if b"\x00" in raw:
            raise ArtifactError(f"sample id {sid!r} contains a NUL byte")
        out += raw + b"\x00"
    return bytes(out)


def save_feature_bank(bank: FeatureBank, path: str | Path) -> None:
    body = _pack_header(MAGIC_FLAT, bank.kind, bank.dim, bank.count)
    body += _pack_ids(bank.sample_ids)
    body += np.ascontiguousarray(bank.rows, dtype="<f4").tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def save_grouped_bank(bank: GroupedFeatureBank, path: str | Path) -> None:
    body = _pack_header(MAGIC_GROUPED, bank.kind, bank.dim, bank.count)
    body += _pack_ids(bank.sample_ids)
    body += np.ascontiguousarray(bank.offsets, dtype="<u8").tobytes()
    body += np.ascontiguousarray(bank.rows, dtype="<f4").tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ArtifactError(
                f"{self.path}: truncated file, needed {n} bytes for {what} "
                f"at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def take_cstring(self, what: str) -> str:
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise ArtifactError(f"{self.path}: unterminated id string in {what}")
        raw = self.data[self.pos : end]
        self.pos = end + 1
        return raw.decode("utf-8")


def _load_bank_common(path: Path, magic: bytes) -> tuple[_Reader, str, int, int]:
    # Structural (length) validation runs before the CRC so truncation reports
    # as a length mismatch rather than a checksum failure.
    if not path.exists():
        raise ArtifactError(f"bank file not found: {path}")
    data = path.read_bytes()
    if len(data) < len(magic) + 15 + 4:
        raise ArtifactError(f"{path}: file too short to be a bank")
    if data[:4] != magic:
        raise ArtifactError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    rd = _Reader(data, path)
    rd.take(4, "magic")
    version, kind_code, dim, count = struct.unpack("<HBIQ", rd.take(15, "header"))
    if version != BANK_VERSION:
        raise ArtifactError(f"{path}: unsupported bank version {version}")
    if kind_code >= len(BANK_KINDS):
        raise ArtifactError(f"{path}: unknown kind code {kind_code}")
    if dim == 0 or count == 0:
        raise ArtifactError(f"{path}: dim and count must be positive")
    return rd, BANK_KINDS[kind_code], int(dim), int(count)


def _check_payload_length(rd: _Reader, expected_rows: int, implied_by: str) -> None:
    remaining = len(rd.data) - rd.pos - 4  # trailing CRC32
    if remaining != expected_rows:
        raise ArtifactError(
            f"{rd.path}: payload length mismatch, {implied_by} implies {expected_rows} "
            f"row bytes but {remaining} remain"
        )


def _verify_crc(rd: _Reader) -> None:
    crc_stored = struct.unpack("<I", rd.take(4, "checksum"))[0]
    crc_actual = zlib.crc32(rd.data[:-4]) & 0xFFFFFFFF
    if crc_stored != crc_actual:
        raise ArtifactError(
            f"{rd.path}: checksum mismatch (stored {crc_stored:#010x}, "
            f"computed {crc_actual:#010x})"
        )


def load_feature_bank(path: str | Path) -> FeatureBank:
    path = Path(path)
    rd, kind, dim, count = _load_bank_common(path, MAGIC_FLAT)
    ids = [rd.take_cstring("ids") for _ in range(count)]
    _check_payload_length(rd, count * dim * 4, "header")
    rows = np.frombuffer(rd.take(count * dim * 4, "rows"), dtype="<f4").reshape(count, dim)
    _verify_crc(rd)
    return FeatureBank(kind, ids, rows.copy())


def load_grouped_bank(path: str | Path) -> GroupedFeatureBank:
    path = Path(path)
    rd, kind, dim, count = _load_bank_common(path, MAGIC_GROUPED)
    ids = [rd.take_cstring("ids") for _ in range(count)]
    offsets = np.frombuffer(rd.take((count + 1) * 8, "offsets"), dtype="<u8").copy()
    total = int(offsets[-1])
    _check_payload_length(rd, total * dim * 4, "offsets")
    rows = np.frombuffer(rd.take(total * dim * 4, "rows"), dtype="<f4").reshape(total, dim)
    _verify_crc(rd)
    return GroupedFeatureBank(kind, ids, offsets, rows.copy())


# --------------------------------------------------------------------------
# Vocabulary IO


def save_vocabulary(vocab: AnswerVocabulary, path: str | Path) -> None:
    Path(path).write_text("\n".join(vocab.entries) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path, kind: str) -> AnswerVocabulary:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"vocabulary file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    entries = [ln for ln in lines if ln != ""]
    return AnswerVocabulary(entries, kind)


# --------------------------------------------------------------------------
# Candidate tables


def validate_candidate_list(sample_id: str, candidates: Sequence[AnswerCandidate]) -> None:
    scores = [c.score for c in candidates]
    if any(b > a for a, b in zip(scores, scores[1:])):
        raise ArtifactError(f"candidate scores for sample {sample_id!r} are not non-increasing")


def save_candidate_table(table: Mapping[str, Sequence[AnswerCandidate]], path: str | Path) -> None:
    doc = {
        sid: [[c.answer, c.score] for c in cands]
        for sid, cands in table.items()
    }
    write_canonical_json(doc, path)


def load_candidate_table(path: str | Path) -> dict[str, list[AnswerCandidate]]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"candidate table not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON: {exc}") from exc
    table: dict[str, list[AnswerCandidate]] = {}
    for sid, pairs in doc.items():
        cands = [AnswerCandidate(answer=a, score=float(s)) for a, s in pairs]
        validate_candidate_list(sid, cands)
        table[sid] = cands
    return table


# --------------------------------------------------------------------------
# Manifest

_SAMPLE_REQUIRED = ("id", "question", "caption", "answers", "split")
_SAMPLE_OPTIONAL = ("ocr", "hint", "choices", "category", "tags")


@dataclass(frozen=True)
class BankRef:
    kind: str
    path: str
    grouped: bool = False
    complete: bool = True


@dataclass
class Dataset:
    """Loaded manifest plus all referenced banks, vocab, and candidate source."""

    name: str
    root: Path
    samples: list[Sample]
    banks: dict[tuple[str, bool], FeatureBank | GroupedFeatureBank]
    bank_refs: list[BankRef]
    vocab: AnswerVocabulary
    vocab_path: str
    candidates_source: str = "logits"
    candidates_path: str | None = None
    by_id: dict[str, Sample] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.by_id:
            self.by_id = {s.id: s for s in self.samples}

    def split_samples(self, split: str) -> list[Sample]:
        return [s for s in self.samples if s.split == split]

    def bank(self, kind: str, grouped: bool = False) -> FeatureBank | GroupedFeatureBank:
        try:
            return self.banks[(kind, grouped)]
        except KeyError:
            raise ArtifactError(
                f"manifest declares no {'grouped ' if grouped else ''}bank of kind {kind!r}"
            ) from None

    def has_bank(self, kind: str, grouped: bool = False) -> bool:
        return (kind, grouped) in self.banks


def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ArtifactError(f"manifest: missing required field {key!r} in {where}")
    return doc[key]


def _parse_sample(entry: Mapping, pos: int) -> Sample:
    where = f"samples[{pos}]"
    for key in entry:
        if key not in _SAMPLE_REQUIRED and key not in _SAMPLE_OPTIONAL:
            raise ArtifactError(f"manifest: unknown field {key!r} in {where}")
    sample = Sample(
        id=str(_require(entry, "id", where)),
        question=str(_require(entry, "question", where)),
        caption=str(_require(entry, "caption", where)),
        answers=tuple(str(a) for a in _require(entry, "answers", where)),
        split=str(_require(entry, "split", where)),
        ocr_tokens=tuple(entry["ocr"]) if "ocr" in entry else None,
        hint=entry.get("hint"),
        choices=tuple(entry["choices"]) if "choices" in entry else None,
        category=entry.get("category"),
        tags=tuple(entry["tags"]) if "tags" in entry else None,
    )
    sample.validate()
    return sample


def load_manifest(path: str | Path) -> Dataset:
    """Load and cross-validate a manifest and everything it references."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    version = _require(doc, "version", "manifest")
    if version != MANIFEST_VERSION:
        raise ArtifactError(f"{path}: unsupported manifest version {version}")
    name = str(_require(doc, "dataset_name", "manifest"))
    root = path.parent

    samples: list[Sample] = []
    seen_ids: set[str] = set()
    for pos, entry in enumerate(_require(doc, "samples", "manifest")):
        sample = _parse_sample(entry, pos)
        if sample.id in seen_ids:
            raise ArtifactError(f"manifest: duplicate sample id {sample.id!r}")
        seen_ids.add(sample.id)
        samples.append(sample)
    if not samples:
        raise ArtifactError("manifest: no samples")

    vocab_decl = _require(doc, "vocab", "manifest")
    vocab_kind = str(_require(vocab_decl, "type", "vocab"))
    vocab_rel = str(_require(vocab_decl, "path", "vocab"))
    vocab = load_vocabulary(root / vocab_rel, vocab_kind)

    bank_refs: list[BankRef] = []
    banks: dict[tuple[str, bool], FeatureBank | GroupedFeatureBank] = {}
    for pos, entry in enumerate(_require(doc, "banks", "manifest")):
        ref = BankRef(
            kind=str(_require(entry, "kind", f"banks[{pos}]")),
            path=str(_require(entry, "path", f"banks[{pos}]")),
            grouped=bool(entry.get("grouped", False)),
            complete=bool(entry.get("complete", True)),
        )
        if ref.kind not in BANK_KINDS:
            raise ArtifactError(f"manifest: banks[{pos}] has unknown kind {ref.kind!r}")
        key = (ref.kind, ref.grouped)
        if key in banks:
            raise ArtifactError(f"manifest: duplicate bank declaration for kind {ref.kind!r}")
        bank: FeatureBank | GroupedFeatureBank
        if ref.grouped:
            bank = load_grouped_bank(root / ref.path)
        else:
            bank = load_feature_bank(root / ref.path)
        if bank.kind != ref.kind:
            raise ArtifactError(
                f"manifest: banks[{pos}] declares kind {ref.kind!r} but file "
                f"{ref.path} holds {bank.kind!r}"
            )
        for sid in bank.sample_ids:
            if sid not in seen_ids:
                raise ArtifactError(
                    f"bank {ref.path}: sample id {sid!r} not present in manifest"
                )
        if ref.complete:
            bank_ids = set(bank.sample_ids)
            for sid in seen_ids:
                if sid not in bank_ids:
                    raise ArtifactError(
                        f"bank {ref.path}: declared complete but missing manifest id {sid!r}"
                    )
        if ref.kind == "answer_logits" and not ref.grouped:
            if vocab.kind == "discriminative" and bank.dim != vocab.size:
                raise ArtifactError(
                    f"bank {ref.path}: answer_logits dim {bank.dim} != vocabulary size {vocab.size}"
                )
        bank_refs.append(ref)
        banks[key] = bank

    cand_source = "logits"
    cand_path: str | None = None
    if "candidates" in doc:
        cand_decl = doc["candidates"]
        cand_source = str(_require(cand_decl, "source", "candidates"))
        if cand_source not in ("logits", "precomputed"):
            raise ArtifactError(f"manifest: unknown candidates source {cand_source!r}")
        if cand_source == "precomputed":
            cand_path = str(_require(cand_decl, "path", "candidates"))
            if not (root / cand_path).exists():
                raise ArtifactError(f"candidate table not found: {root / cand_path}")

    return Dataset(
        name=name,
        root=root,
        samples=samples,
        banks=banks,
        bank_refs=bank_refs,
        vocab=vocab,
        vocab_path=vocab_rel,
        candidates_source=cand_source,
        candidates_path=cand_path,
    )


def manifest_document(dataset: Dataset) -> dict:
    """Rebuild the canonical manifest JSON document for a loaded dataset."""
    samples = []
    for s in dataset.samples:
        entry: dict = {
            "id": s.id,
            "question": s.question,
            "caption": s.caption,
        }
        if s.ocr_tokens is not None:
            entry["ocr"] = list(s.ocr_tokens)
        if s.hint is not None:
            entry["hint"] = s.hint
        if s.choices is not None:
            entry["choices"] = list(s.choices)
        entry["answers"] = list(s.answers)
        if s.category is not None:
            entry["category"] = s.category
        if s.tags is not None:
            entry["tags"] = list(s.tags)
        entry["split"] = s.split
        samples.append(entry)
    doc: dict = {
        "version": MANIFEST_VERSION,
        "dataset_name": dataset.name,
        "samples": samples,
        "banks": [
            {"kind": r.kind, "path": r.path, "grouped": r.grouped, "complete": r.complete}
            for r in dataset.bank_refs
        ],
        "vocab": {"type": dataset.vocab.kind, "path": dataset.vocab_path},
    }
    if dataset.candidates_source == "precomputed":
        doc["candidates"] = {"source": "precomputed", "path": dataset.candidates_path}
    else:
        doc["candidates"] = {"source": "logits"}
    return doc


def write_canonical_json(doc, path: str | Path) -> None:
    """Single canonical JSON form so byte-level round-trips are well defined."""
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=False) + "\n",
        encoding="utf-8",
    )


def save_manifest(dataset: Dataset, path: str | Path) -> None:
    write_canonical_json(manifest_document(dataset), path)
