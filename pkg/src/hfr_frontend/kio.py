"""Kaldi-style binary feature archives (ark/scp) and text manifests.

Archive entry layout, all little-endian::

    <key> 0x20 0x00 'B' 'F' 'M' 0x20 0x04 <int32 rows> 0x04 <int32 cols> <float32 * rows*cols>

The index (scp) line for an entry is ``<key> <ark_path>:<offset>`` where the
offset points at the 0x00 following the key.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .audio import WavError, round_half_away, wav_info
from .fbank import FeatureMatrix

_BINARY_MAGIC = b"\x00B"
_INT32_MAX = 2**31 - 1
_FLOAT_LE = np.dtype("<f4")


class ArchiveError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagicError(ArchiveError):
    pass


class UnsupportedMatrixError(ArchiveError):
    pass


class ShapeOverflowError(ArchiveError):
    pass


class TruncatedPayloadError(ArchiveError):
    pass


class ManifestError(ValueError):
    pass


def _check_key(key: str) -> None:
    if not key or any(c.isspace() or c == "\x00" for c in key):
        raise ValueError(f"invalid key {key!r}: must be non-empty without whitespace or NUL")


def _as_matrix(value) -> np.ndarray:
    data = value.data if isinstance(value, FeatureMatrix) else value
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {data.shape}")
    return data


def encode_entry(key: str, matrix) -> Tuple[bytes, int]:
    """Serialize one entry; also return the offset of the 0x00 within it."""
    _check_key(key)
    data = _as_matrix(matrix)
    rows, cols = data.shape
    if rows < 1 or cols < 1:
        raise ValueError(f"{key}: matrix must have at least one row and column, got {data.shape}")
    head = key.encode("utf-8") + b" "
    body = (_BINARY_MAGIC + b"FM " + b"\x04" + struct.pack("<i", rows)
            + b"\x04" + struct.pack("<i", cols) + data.astype(_FLOAT_LE).tobytes())
    return head + body, len(head)


class ArchiveWriter:
    """Sequential writer for an ark file and, optionally, its scp index."""

    def __init__(self, ark_path, scp_path=None):
        self.ark_path = str(ark_path)
        self._ark = open(ark_path, "wb")
        self._scp = open(scp_path, "w", encoding="utf-8", newline="\n") if scp_path else None
        self._keys = set()

    def write(self, key: str, matrix) -> int:
        if key in self._keys:
            raise ValueError(f"duplicate key {key!r}")
        blob, rel = encode_entry(key, matrix)
        offset = self._ark.tell() + rel
        self._ark.write(blob)
        self._keys.add(key)
        if self._scp:
            self._scp.write(f"{key} {self.ark_path}:{offset}\n")
        return offset

    def close(self):
        self._ark.close()
        if self._scp:
            self._scp.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_archive(entries, ark_path, scp_path=None) -> None:
    """Write ``(key, matrix)`` pairs (or a ``{key: matrix}`` mapping) in order."""
    if isinstance(entries, dict):
        entries = entries.items()
    entries = list(entries)
    keys = [k for k, _ in entries]
    if len(set(keys)) != len(keys):
        dup = next(k for k in keys if keys.count(k) > 1)
        raise ValueError(f"duplicate key {dup!r}")
    with ArchiveWriter(ark_path, scp_path) as writer:
        for key, matrix in entries:
            writer.write(key, matrix)


def _read_matrix(buf: bytes, offset: int) -> Tuple[np.ndarray, int]:
    """Parse a binary float matrix starting at the 0x00 at ``offset``."""
    if buf[offset : offset + 2] != _BINARY_MAGIC:
        raise BadMagicError(f"expected binary marker \\0B, found {buf[offset:offset + 2]!r}", offset)
    pos = offset + 2
    token = buf[pos : pos + 3]
    if token in (b"DM ", b"CM ", b"CM2", b"CM3"):
        raise UnsupportedMatrixError(f"matrix type {token.decode()!r} not supported, only FM", pos)
    if token != b"FM ":
        raise BadMagicError(f"expected 'FM ', found {token!r}", pos)
    pos += 3
    dims = []
    for _ in range(2):
        if len(buf) < pos + 5:
            raise TruncatedPayloadError("archive ends inside matrix header", pos)
        if buf[pos] != 4:
            raise BadMagicError(f"expected int32 size byte 0x04, found {buf[pos]:#04x}", pos)
        (n,) = struct.unpack_from("<i", buf, pos + 1)
        if n < 0:
            raise ShapeOverflowError(f"negative dimension {n}", pos + 1)
        dims.append(n)
        pos += 5
    rows, cols = dims
    count = rows * cols
    if count > _INT32_MAX:
        raise ShapeOverflowError(f"shape {rows}x{cols} overflows", pos - 10)
    end = pos + 4 * count
    if end > len(buf):
        raise TruncatedPayloadError(
            f"payload needs {4 * count} bytes, only {len(buf) - pos} remain", pos
        )
    data = np.frombuffer(buf, dtype=_FLOAT_LE, count=count, offset=pos).reshape(rows, cols)
    return data.astype(np.float32), end


def read_ark(ark_path) -> List[Tuple[str, np.ndarray]]:
    """Read every entry of an archive in file order."""
    buf = Path(ark_path).read_bytes()
    entries = []
    pos = 0
    while pos < len(buf):
        space = buf.find(b" ", pos)
        if space < 0:
            raise TruncatedPayloadError("archive ends inside a key", pos)
        key = buf[pos:space].decode("utf-8")
        _check_key(key)
        matrix, pos = _read_matrix(buf, space + 1)
        entries.append((key, matrix))
    return entries


def read_scp(scp_path) -> List[Tuple[str, np.ndarray]]:
    """Read entries through an index file, seeking to each recorded offset."""
    entries = []
    cache: Dict[str, bytes] = {}
    for lineno, line in enumerate(Path(scp_path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            key, target = line.split(maxsplit=1)
            path, offset = target.rsplit(":", 1)
            offset = int(offset)
        except ValueError:
            raise ManifestError(f"{scp_path}:{lineno}: expected 'key path:offset', got {line!r}")
        if path not in cache:
            cache[path] = Path(path).read_bytes()
        matrix, _ = _read_matrix(cache[path], offset)
        entries.append((key, matrix))
    return entries


def read_archive(path) -> List[Tuple[str, np.ndarray]]:
    """Read an ``.scp`` index (random access) or an ark (sequential)."""
    if str(path).endswith(".scp"):
        return read_scp(path)
    return read_ark(path)


@dataclass(frozen=True)
class SegmentRecord:
    """An utterance located inside a recording, times in seconds.

    ``end`` may be ``inf`` meaning "to the end of the recording".
    """

    utt_id: str
    recording_id: str
    start: float
    end: float
    channel: Optional[int] = None

    def __post_init__(self):
        for name in ("utt_id", "recording_id"):
            value = getattr(self, name)
            if not value or any(c.isspace() for c in value):
                raise ValueError(f"{name} {value!r} must be non-empty without whitespace")
        if not (0 <= self.start < self.end) or math.isnan(self.end):
            raise ValueError(f"{self.utt_id}: need 0 <= start < end, got {self.start}, {self.end}")

    def sample_span(self, sample_rate: int, num_samples: int) -> Tuple[int, int]:
        start = round_half_away(self.start * sample_rate)
        end = num_samples if math.isinf(self.end) else round_half_away(self.end * sample_rate)
        return start, end


@dataclass
class Manifest:
    """Recordings (``wav.scp``) and optional segments.

    Without segments every recording is one utterance covering the whole file.
    """

    wav: Dict[str, str]
    segments: Optional[List[SegmentRecord]] = None
    durations: Dict[str, float] = field(default_factory=dict)

    def utterances(self) -> List[SegmentRecord]:
        if self.segments is not None:
            return list(self.segments)
        return [SegmentRecord(rec, rec, 0.0, math.inf) for rec in self.wav]

    def __len__(self):
        return len(self.utterances())


def _split_lines(path) -> List[Tuple[int, str]]:
    text = Path(path).read_text(encoding="utf-8")
    return [(i, line) for i, line in enumerate(text.splitlines(), 1) if line.strip()]


def parse_manifest(wav_scp_path, segments_path=None, check_audio: bool = True) -> Manifest:
    """Parse ``wav.scp`` and an optional ``segments`` file.

    ``wav.scp`` lines are ``recording_id path``; relative paths resolve
    against the current directory. ``segments`` lines are
    ``utt_id recording_id start end [channel]``. With ``check_audio`` each
    segment end is checked against the recording length when the header is readable.
    """
    wav: Dict[str, str] = {}
    for lineno, line in _split_lines(wav_scp_path):
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise ManifestError(f"{wav_scp_path}:{lineno}: expected 'recording_id path'")
        rec, path = parts[0], parts[1].strip()
        if rec in wav:
            raise ManifestError(f"{wav_scp_path}:{lineno}: duplicate recording id {rec!r}")
        wav[rec] = path

    durations: Dict[str, float] = {}
    if check_audio:
        for rec, path in wav.items():
            # unreadable audio is left to the per-recording failure path
            try:
                _, rate, frames = wav_info(path)
            except (OSError, WavError):
                continue
            durations[rec] = frames / rate

    if segments_path is None:
        return Manifest(wav, None, durations)

    segments: List[SegmentRecord] = []
    seen = set()
    for lineno, line in _split_lines(segments_path):
        where = f"{segments_path}:{lineno}"
        parts = line.split()
        if len(parts) not in (4, 5):
            raise ManifestError(f"{where}: expected 'utt_id recording_id start end [channel]'")
        utt, rec = parts[0], parts[1]
        if utt in seen:
            raise ManifestError(f"{where}: duplicate utterance id {utt!r}")
        if rec not in wav:
            raise ManifestError(f"{where}: {utt}: unknown recording id {rec!r}")
        try:
            start, end = float(parts[2]), float(parts[3])
            channel = int(parts[4]) if len(parts) == 5 else None
        except ValueError:
            raise ManifestError(f"{where}: {utt}: non-numeric time or channel")
        if not (math.isfinite(start) and math.isfinite(end)) or not 0 <= start < end:
            raise ManifestError(f"{where}: {utt}: invalid times start={start} end={end}")
        if rec in durations and end > durations[rec] + 1e-9:
            raise ManifestError(
                f"{where}: {utt}: end {end} s exceeds recording {rec} duration {durations[rec]} s"
            )
        seen.add(utt)
        segments.append(SegmentRecord(utt, rec, start, end, channel))
    return Manifest(wav, segments, durations)


def _format_time(t: float) -> str:
    return repr(float(t))


def write_wav_scp(wav, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in sorted(wav):
            f.write(f"{rec} {wav[rec]}\n")


def write_segments(segments, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for seg in sorted(segments, key=lambda s: s.utt_id):
            fields = [seg.utt_id, seg.recording_id, _format_time(seg.start), _format_time(seg.end)]
            if seg.channel is not None:
                fields.append(str(seg.channel))
            f.write(" ".join(fields) + "\n")


def write_manifest(manifest: Manifest, wav_scp_path, segments_path=None) -> None:
    """Write manifests sorted by id, UTF-8 with LF line endings."""
    write_wav_scp(manifest.wav, wav_scp_path)
    if segments_path is not None and manifest.segments is not None:
        write_segments(manifest.segments, segments_path)


def iter_index_offsets(scp_path) -> Iterable[Tuple[str, str, int]]:
    for _, line in _split_lines(scp_path):
        key, target = line.split(maxsplit=1)
        path, offset = target.rsplit(":", 1)
        yield key, path, int(offset)
