"""In-memory dataset types and the SIGDS on-disk container.

SIGDS layout (all integers little-endian):

    bytes 0-3    magic ``SIGD``
    bytes 4-5    version        u16, currently 1
    bytes 6-7    n_channels     u16, always 2 (I then Q)
    bytes 8-11   N              u32, samples per channel
    bytes 12-15  record_count   u32
    bytes 16-17  class_count    u16
    bytes 18-63  reserved, zero padding
    class table  class_count entries of (u16 name_len, UTF-8 name bytes)
    records      record_count entries of
                 (u16 label, i16 snr_db with -32768 = absent,
                  N float32 I samples, N float32 Q samples)

Floats are stored as raw little-endian IEEE-754 bytes, so a save/load
round trip is bit-exact.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

_MAGIC = b"SIGD"
_VERSION = 1
_N_CHANNELS = 2
_HEADER = struct.Struct("<4sHHIIH")
_HEADER_SIZE = 64
_SNR_ABSENT = -32768


def _as_channel(values, n: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1:
        raise ValidationError(f"channel must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"channel has {arr.shape[0]} samples, expected {n}")
    if not np.isfinite(arr).all():
        raise ValidationError("channel contains non-finite samples")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SignalRecord:
    """One labeled I/Q record: two channels of N float32 samples."""

    i_channel: np.ndarray
    q_channel: np.ndarray
    label: int
    snr_db: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "i_channel", _as_channel(self.i_channel))
        object.__setattr__(self, "q_channel", _as_channel(self.q_channel, len(self.i_channel)))
        if self.label < 0:
            raise ValidationError(f"label must be nonnegative, got {self.label}")
        if self.snr_db is not None and not (-32767 <= int(self.snr_db) <= 32767):
            raise ValidationError(f"snr_db out of i16 range: {self.snr_db}")

    @property
    def n_samples(self) -> int:
        return self.i_channel.shape[0]

    def as_array(self) -> np.ndarray:
        """Stack channels into a (2, N) float32 array."""
        return np.stack([self.i_channel, self.q_channel])


@dataclass(frozen=True)
class LabeledSignalSet:
    """A collection of 2xN I/Q records with integer class labels."""

    records: tuple[SignalRecord, ...]
    class_names: tuple[str, ...]
    n_samples_per_channel: int

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.class_names:
            raise ValidationError("class_names must be nonempty")
        if any(not name for name in self.class_names):
            raise ValidationError("class names must be nonempty strings")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("class names must be unique")
        if self.n_samples_per_channel < 1:
            raise ValidationError("n_samples_per_channel must be >= 1")
        for rec in self.records:
            if rec.n_samples != self.n_samples_per_channel:
                raise ValidationError(
                    f"record has N={rec.n_samples}, set declares N={self.n_samples_per_channel}"
                )
            if rec.label >= len(self.class_names):
                raise ValidationError(
                    f"label {rec.label} out of range for {len(self.class_names)} classes"
                )

    @property
    def n_channels(self) -> int:
        return _N_CHANNELS

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> list[int]:
        counts = [0] * self.num_classes
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All records as (n, 2, N) float32 plus an (n,) int label vector."""
        n = len(self.records)
        data = np.zeros((n, _N_CHANNELS, self.n_samples_per_channel), dtype=np.float32)
        labels = np.zeros(n, dtype=np.int64)
        for i, rec in enumerate(self.records):
            data[i, 0] = rec.i_channel
            data[i, 1] = rec.q_channel
            labels[i] = rec.label
        return data, labels

    def stacked_by_class(self) -> list[np.ndarray]:
        """Per-class (count_c, 2, N) float32 arrays, indexed by class."""
        data, labels = self.as_arrays()
        return [data[labels == c] for c in range(self.num_classes)]


@dataclass(frozen=True)
class SyntheticSet:
    """A signal set holding exactly ``spc`` records of every class."""

    base: LabeledSignalSet
    spc: int

    def __post_init__(self):
        if self.spc < 1:
            raise ValidationError(f"spc must be >= 1, got {self.spc}")
        counts = self.base.class_counts()
        if any(c != self.spc for c in counts):
            raise ValidationError(
                f"synthetic set must hold spc={self.spc} records per class, got counts {counts}"
            )

    def __len__(self) -> int:
        return len(self.base)


def save_sigds(sigset: LabeledSignalSet, path) -> None:
    """Write a set in SIGDS format; byte-for-byte deterministic."""
    num_classes = sigset.num_classes
    if num_classes > 0xFFFF:
        raise ValidationError("SIGDS supports at most 65535 classes")
    if len(sigset.records) > 0xFFFFFFFF:
        raise ValidationError("SIGDS supports at most 2**32-1 records")

    parts = [
        _HEADER.pack(
            _MAGIC,
            _VERSION,
            _N_CHANNELS,
            sigset.n_samples_per_channel,
            len(sigset.records),
            num_classes,
        ).ljust(_HEADER_SIZE, b"\x00")
    ]
    for name in sigset.class_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValidationError(f"class name too long: {name!r}")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
    for rec in sigset.records:
        snr = _SNR_ABSENT if rec.snr_db is None else int(rec.snr_db)
        parts.append(struct.pack("<Hh", rec.label, snr))
        parts.append(rec.i_channel.astype("<f4", copy=False).tobytes())
        parts.append(rec.q_channel.astype("<f4", copy=False).tobytes())
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_sigds(path) -> LabeledSignalSet:
    """Read a SIGDS file, rejecting corrupt or truncated input."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER_SIZE:
        raise ParseError(f"truncated header: file is {len(blob)} bytes, need {_HEADER_SIZE}")
    magic, version, n_channels, n_samples, record_count, class_count = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}")
    if n_channels != _N_CHANNELS:
        raise ParseError(f"unsupported channel count {n_channels}")
    if class_count == 0:
        raise ParseError("file declares zero classes")

    offset = _HEADER_SIZE
    class_names = []
    for _ in range(class_count):
        if offset + 2 > len(blob):
            raise ParseError("truncated class table")
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if offset + name_len > len(blob):
            raise ParseError("truncated class table")
        try:
            class_names.append(blob[offset : offset + name_len].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ParseError(f"undecodable class name: {exc}") from exc
        offset += name_len

    channel_bytes = 4 * n_samples
    record_bytes = 4 + 2 * channel_bytes
    expected = offset + record_count * record_bytes
    if len(blob) < expected:
        raise ParseError(
            f"truncated payload: file is {len(blob)} bytes, "
            f"{record_count} records need {expected}"
        )
    if len(blob) > expected:
        raise ParseError(f"trailing garbage: {len(blob) - expected} extra bytes")

    records = []
    for _ in range(record_count):
        label, snr = struct.unpack_from("<Hh", blob, offset)
        offset += 4
        if label >= class_count:
            raise ParseError(f"label {label} out of range for {class_count} classes")
        i_channel = np.frombuffer(blob, dtype="<f4", count=n_samples, offset=offset)
        offset += channel_bytes
        q_channel = np.frombuffer(blob, dtype="<f4", count=n_samples, offset=offset)
        offset += channel_bytes
        if not (np.isfinite(i_channel).all() and np.isfinite(q_channel).all()):
            raise ParseError("non-finite sample in record payload")
        records.append(
            SignalRecord(
                i_channel=i_channel,
                q_channel=q_channel,
                label=label,
                snr_db=None if snr == _SNR_ABSENT else snr,
            )
        )
    return LabeledSignalSet(
        records=tuple(records),
        class_names=tuple(class_names),
        n_samples_per_channel=n_samples,
    )


def split_train_test(
    sigset: LabeledSignalSet, test_fraction: float, seed: int
) -> tuple[LabeledSignalSet, LabeledSignalSet]:
    """Stratified split: per class, floor(test_fraction * count) records go
    to the test side, clamped so each side keeps at least one record."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    counts = sigset.class_counts()
    for c, count in enumerate(counts):
        if count < 2:
            raise ValidationError(
                f"class {sigset.class_names[c]!r} has {count} record(s), need >= 2 to split"
            )

    rng = np.random.default_rng(seed)
    by_class = [[] for _ in range(sigset.num_classes)]
    for idx, rec in enumerate(sigset.records):
        by_class[rec.label].append(idx)

    test_idx: set[int] = set()
    for c in range(sigset.num_classes):
        count = counts[c]
        n_test = min(max(math.floor(test_fraction * count), 1), count - 1)
        chosen = rng.permutation(count)[:n_test]
        test_idx.update(by_class[c][i] for i in chosen)

    train_records = tuple(r for i, r in enumerate(sigset.records) if i not in test_idx)
    test_records = tuple(r for i, r in enumerate(sigset.records) if i in test_idx)
    make = lambda recs: LabeledSignalSet(recs, sigset.class_names, sigset.n_samples_per_channel)
    return make(train_records), make(test_records)


def take_per_class(sigset: LabeledSignalSet, spc: int, seed: int) -> SyntheticSet:
    """Uniformly sample ``spc`` records per class without replacement.

    Doubles as the random-selection baseline and as the initializer for
    the synthetic set before distillation.
    """
    if spc < 1:
        raise ValidationError(f"spc must be >= 1, got {spc}")
    counts = sigset.class_counts()
    smallest = min(counts) if counts else 0
    if spc > smallest:
        raise ValidationError(f"spc={spc} exceeds the smallest class count {smallest}")

    rng = np.random.default_rng(seed)
    by_class = [[] for _ in range(sigset.num_classes)]
    for idx, rec in enumerate(sigset.records):
        by_class[rec.label].append(idx)

    records = []
    for c in range(sigset.num_classes):
        chosen = rng.choice(counts[c], size=spc, replace=False)
        records.extend(sigset.records[by_class[c][i]] for i in chosen)
    base = LabeledSignalSet(tuple(records), sigset.class_names, sigset.n_samples_per_channel)
    return SyntheticSet(base=base, spc=spc)
