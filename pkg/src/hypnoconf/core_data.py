"""Domain types and the on-disk container for sleep-stage classifier outputs.

A :class:`Recording` holds one subject's night: the physician-scored stage
labels (optional) and, for each EEG-EOG channel pair fed to the classifier,
the per-epoch softmax distribution over the five stages plus the hidden
features extracted from the layer preceding the softmax (optional).
A :class:`Dataset` is a list of recordings together with a JSON manifest
mirroring the per-recording metadata.

Binary container ``<recording_id>.hpnc`` (little-endian)::

    magic    4s   b"HPNC"
    version  u16  1
    reserved u16  0
    T        u32  number of epochs
    M        u16  number of channel pairs
    K        u16  number of classes (always 5)
    flags    u8   bit0 has_labels, bit1 has_hiddens
    pad      7s   zeros
    labels   T x u8                          (if has_labels)
    per pair m = 0 .. M-1:
        softmax  T x K float32, row-major
        hiddens  T x K float32, row-major    (if has_hiddens)

``manifest.json`` is an array of objects with keys recording_id, subject_id,
scorer_id, domain_tag, diagnoses (sorted list), epochs, pairs, file.
"""

from __future__ import annotations

import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Stage byte encoding. Unknown is 255 so it can never collide with a class
# index; only the five scored stages may appear as predicted stages.
W, N1, N2, N3, REM = 0, 1, 2, 3, 4
UNKNOWN = 255
N_STAGES = 5
STAGE_NAMES = ("W", "N1", "N2", "N3", "REM")
STAGE_CODES = (W, N1, N2, N3, REM)

DOMAIN_TAGS = ("ID_TRAIN", "ID_VAL", "ID_TEST", "OOD1", "OOD2")
DIAGNOSIS_CODES = ("HE", "INS", "SDB", "CDH", "CRD", "PSD", "SMD", "IS", "DSS")

SOFTMAX_SUM_TOL = 1e-5

_MAGIC = b"HPNC"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIHHB7s")
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class ValidationError(ValueError):
    """A recording or dataset violates a structural invariant."""


class FormatError(ValueError):
    """A container file is missing, corrupt, or has an unsupported version."""


def stage_name(code: int) -> str:
    if code == UNKNOWN:
        return "Unknown"
    return STAGE_NAMES[code]


@dataclass
class Recording:
    """One night of classifier output plus reference scoring and metadata.

    ``softmax`` and ``hidden`` are float32 arrays of shape (M, T, 5); the
    container stores float32, so keeping that dtype makes save/load
    round-trips bit-exact.  ``labels`` is a uint8 array of length T with
    values in {0..4, 255}, or None when no reference scoring exists.
    """

    recording_id: str
    subject_id: str
    scorer_id: str
    domain_tag: str
    diagnoses: frozenset = field(default_factory=frozenset)
    labels: np.ndarray | None = None
    softmax: np.ndarray = None
    hidden: np.ndarray | None = None

    @property
    def n_epochs(self) -> int:
        return self.softmax.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.softmax.shape[0]

    def validate(self) -> None:
        rid = self.recording_id
        if not isinstance(rid, str) or not _ID_RE.match(rid):
            raise ValidationError(f"recording_id {rid!r} is not a safe identifier")
        if self.domain_tag not in DOMAIN_TAGS:
            raise ValidationError(f"{rid}: unknown domain_tag {self.domain_tag!r}")
        bad = set(self.diagnoses) - set(DIAGNOSIS_CODES)
        if bad:
            raise ValidationError(f"{rid}: unknown diagnosis codes {sorted(bad)}")
        sm = self.softmax
        if sm is None or sm.ndim != 3 or sm.shape[2] != N_STAGES:
            raise ValidationError(f"{rid}: softmax must have shape (M, T, 5)")
        M, T, _ = sm.shape
        if T < 1 or M < 1:
            raise ValidationError(f"{rid}: need at least one epoch and one channel pair")
        if np.any(sm < 0):
            m, t, k = np.argwhere(sm < 0)[0]
            raise ValidationError(
                f"{rid}: negative softmax component at pair {m}, epoch {t}, class {k}"
            )
        sums = sm.sum(axis=2, dtype=np.float64)
        off = np.abs(sums - 1.0) > SOFTMAX_SUM_TOL
        if np.any(off):
            m, t = np.argwhere(off)[0]
            raise ValidationError(
                f"{rid}: softmax row does not sum to 1 at pair {m}, epoch {t} "
                f"(sum={sums[m, t]:.6f})"
            )
        if self.hidden is not None and self.hidden.shape != sm.shape:
            raise ValidationError(f"{rid}: hidden features must match softmax shape")
        if self.labels is not None:
            if self.labels.shape != (T,):
                raise ValidationError(f"{rid}: labels must have length T={T}")
            valid = np.isin(self.labels, STAGE_CODES + (UNKNOWN,))
            if not np.all(valid):
                t = int(np.argwhere(~valid)[0])
                raise ValidationError(
                    f"{rid}: invalid stage code {int(self.labels[t])} at epoch {t}"
                )

    def scored_mask(self) -> np.ndarray:
        """Boolean mask of epochs with a known reference stage."""
        if self.labels is None:
            raise ValidationError(f"{self.recording_id}: recording has no labels")
        return self.labels != UNKNOWN


@dataclass
class Dataset:
    recordings: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.recordings)

    def __iter__(self):
        return iter(self.recordings)

    def get(self, recording_id: str) -> Recording:
        for rec in self.recordings:
            if rec.recording_id == recording_id:
                return rec
        raise KeyError(recording_id)

    def by_tag(self, domain_tag: str) -> list:
        return [r for r in self.recordings if r.domain_tag == domain_tag]

    def tags_present(self) -> list:
        seen = []
        for rec in self.recordings:
            if rec.domain_tag not in seen:
                seen.append(rec.domain_tag)
        return seen

    def subjects(self) -> dict:
        """Map subject_id -> list of recordings, in dataset order."""
        out: dict = {}
        for rec in self.recordings:
            out.setdefault(rec.subject_id, []).append(rec)
        return out

    def validate(self) -> None:
        seen = set()
        for rec in self.recordings:
            if rec.recording_id in seen:
                raise ValidationError(f"duplicate recording_id {rec.recording_id!r}")
            seen.add(rec.recording_id)
            rec.validate()


def majority_softmax(recording: Recording) -> np.ndarray:
    """Per-epoch mean of the per-pair softmax outputs, shape (T, 5) float64."""
    return recording.softmax.astype(np.float64).mean(axis=0)


def predicted_hypnogram(recording: Recording) -> np.ndarray:
    """Predicted stage per epoch: argmax of the majority softmax.

    Ties break toward the lowest stage code (np.argmax returns the first
    maximum).  Never returns Unknown.
    """
    return np.argmax(majority_softmax(recording), axis=1).astype(np.uint8)


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, str(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_recording(rec: Recording) -> bytes:
    M, T, K = rec.softmax.shape
    flags = 0
    if rec.labels is not None:
        flags |= 1
    if rec.hidden is not None:
        flags |= 2
    parts = [_HEADER.pack(_MAGIC, _VERSION, 0, T, M, K, flags, b"\x00" * 7)]
    if rec.labels is not None:
        parts.append(rec.labels.astype(np.uint8).tobytes())
    for m in range(M):
        parts.append(np.ascontiguousarray(rec.softmax[m], dtype="<f4").tobytes())
        if rec.hidden is not None:
            parts.append(np.ascontiguousarray(rec.hidden[m], dtype="<f4").tobytes())
    return b"".join(parts)


def _unpack_recording(data: bytes, meta: dict, path: str) -> Recording:
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, _reserved, T, M, K, flags, _pad = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if K != N_STAGES:
        raise FormatError(f"{path}: unsupported class count {K}")
    if flags & ~0b11:
        raise FormatError(f"{path}: unknown flag bits 0x{flags:02x}")
    has_labels = bool(flags & 1)
    has_hiddens = bool(flags & 2)
    expected = _HEADER.size + (T if has_labels else 0)
    expected += M * T * K * 4 * (2 if has_hiddens else 1)
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload length {len(data)} does not match header "
            f"(expected {expected})"
        )
    off = _HEADER.size
    labels = None
    if has_labels:
        labels = np.frombuffer(data, dtype=np.uint8, count=T, offset=off).copy()
        off += T
    softmax = np.empty((M, T, K), dtype=np.float32)
    hidden = np.empty((M, T, K), dtype=np.float32) if has_hiddens else None
    block = T * K
    for m in range(M):
        softmax[m] = np.frombuffer(data, dtype="<f4", count=block, offset=off).reshape(T, K)
        off += block * 4
        if has_hiddens:
            hidden[m] = np.frombuffer(data, dtype="<f4", count=block, offset=off).reshape(T, K)
            off += block * 4
    return Recording(
        recording_id=meta["recording_id"],
        subject_id=meta["subject_id"],
        scorer_id=meta["scorer_id"],
        domain_tag=meta["domain_tag"],
        diagnoses=frozenset(meta["diagnoses"]),
        labels=labels,
        softmax=softmax,
        hidden=hidden,
    )


def save_dataset(dataset: Dataset, directory) -> None:
    """Write ``manifest.json`` plus one ``.hpnc`` binary per recording.

    Validates the whole dataset before touching the filesystem and writes
    each file atomically; byte-deterministic for identical input.
    """
    dataset.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for rec in dataset.recordings:
        manifest.append(
            {
                "recording_id": rec.recording_id,
                "subject_id": rec.subject_id,
                "scorer_id": rec.scorer_id,
                "domain_tag": rec.domain_tag,
                "diagnoses": sorted(rec.diagnoses),
                "epochs": int(rec.n_epochs),
                "pairs": int(rec.n_pairs),
                "file": f"{rec.recording_id}.hpnc",
            }
        )
    for rec, meta in zip(dataset.recordings, manifest):
        _write_atomic(directory / meta["file"], _pack_recording(rec))
    payload = json.dumps(manifest, indent=2) + "\n"
    _write_atomic(directory / "manifest.json", payload.encode("utf-8"))


def load_dataset(directory) -> Dataset:
    """Read a dataset written by :func:`save_dataset`, re-validating everything."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(manifest, list):
        raise FormatError(f"{manifest_path}: manifest must be a JSON array")
    recordings = []
    for meta in manifest:
        name = meta["file"]
        if "/" in name or "\\" in name or name.startswith("."):
            raise FormatError(f"manifest references unsafe file name {name!r}")
        path = directory / name
        if not path.exists():
            raise FormatError(f"missing binary referenced by manifest: {path}")
        rec = _unpack_recording(path.read_bytes(), meta, str(path))
        if rec.n_epochs != meta["epochs"] or rec.n_pairs != meta["pairs"]:
            raise FormatError(
                f"{path}: manifest says T={meta['epochs']}, M={meta['pairs']} but "
                f"payload has T={rec.n_epochs}, M={rec.n_pairs}"
            )
        recordings.append(rec)
    dataset = Dataset(recordings)
    dataset.validate()
    return dataset
