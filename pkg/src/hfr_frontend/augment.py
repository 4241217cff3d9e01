"""Speed-perturbation augmentation.

A speed factor ``s`` plays the audio ``s`` times faster: duration becomes
``L / s`` and every frequency is multiplied by ``s``. The warping factor
that scales duration directly is ``alpha = 1 / s``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .audio import PCM16, AudioBuffer, ResamplerConfig, interpolate, read_wav, round_half_away, write_wav
from .kio import Manifest, SegmentRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpeedPerturbSpec:
    speeds: Tuple[float, ...] = (0.9, 1.0, 1.1)
    prefix: str = "sp"

    def __post_init__(self):
        speeds = tuple(float(s) for s in self.speeds)
        if not speeds:
            raise ValueError("at least one speed is required")
        if any(s <= 0 or not math.isfinite(s) for s in speeds):
            raise ValueError(f"speeds must be positive, got {speeds}")
        if len(set(speeds)) != len(speeds):
            raise ValueError(f"speeds must be distinct, got {speeds}")
        object.__setattr__(self, "speeds", speeds)

    def copy_id(self, speed: float, original_id: str) -> str:
        """``sp0.9-utt1`` style id; speed 1.0 keeps the original id."""
        if speed == 1.0:
            return original_id
        return f"{self.prefix}{speed:g}-{original_id}"


def perturbed_length(length: int, speed: float) -> int:
    return round_half_away(length / speed)


def perturb_speed(buffer: AudioBuffer, speed: float,
                  cfg: ResamplerConfig = ResamplerConfig()) -> AudioBuffer:
    """Return ``buffer`` played ``speed`` times faster at the same sample rate.

    Output sample n is the band-limited input at input position ``n * speed``,
    which is resampling to ``sample_rate / speed`` and relabelling the rate.
    """
    if speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    if speed == 1.0:
        return AudioBuffer(buffer.samples.copy(), buffer.sample_rate)
    n_out = perturbed_length(buffer.length, speed)
    positions = np.arange(n_out) * speed
    # anti-aliasing only matters when speeding up
    cutoff = cfg.cutoff_scale * 0.5 * min(1.0, 1.0 / speed)
    out = np.array([interpolate(ch, positions, cutoff, cfg) for ch in buffer.samples])
    return AudioBuffer(out.reshape(buffer.num_channels, n_out), buffer.sample_rate)


def rescale_segments(segments: Sequence[SegmentRecord], speed: float) -> List[SegmentRecord]:
    """Divide start and end times by ``speed``; ids are left untouched."""
    if speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    return [SegmentRecord(seg.utt_id, seg.recording_id, seg.start / speed, seg.end / speed, seg.channel)
            for seg in segments]


def _perturb_recording(job):
    src, dst, speeds, encoding = job
    try:
        audio = read_wav(src)
        for speed, path in zip(speeds, dst):
            write_wav(perturb_speed(audio, speed), path, encoding)
    except Exception as err:  # reported per recording, batch continues
        return f"{src}: {err}"
    return None


def augment_manifest(manifest: Manifest, spec: SpeedPerturbSpec, output_dir,
                     workers: int = 1, encoding: str = PCM16) -> Tuple[Manifest, Dict[str, str]]:
    """Write perturbed copies of every recording and build the combined manifest.

    Returns the new manifest (originals plus one copy per speed other than
    1.0) and a mapping ``recording_id -> error`` for recordings that failed;
    those are left out of the manifest. Perturbed WAVs land in
    ``output_dir/<new_recording_id>.wav``.
    """
    copies = [s for s in spec.speeds if s != 1.0]
    keep_original = 1.0 in spec.speeds

    wav: Dict[str, str] = {}
    for rec in manifest.wav:
        ids = [spec.copy_id(s, rec) for s in spec.speeds]
        for new_id in ids:
            if new_id in wav:
                raise ValueError(f"generated recording id {new_id!r} collides")
        for s, new_id in zip(spec.speeds, ids):
            wav[new_id] = manifest.wav[rec] if s == 1.0 else os.path.join(str(output_dir), f"{new_id}.wav")

    segments = None
    if manifest.segments is not None:
        segments = []
        if keep_original:
            segments.extend(manifest.segments)
        for s in copies:
            for seg in rescale_segments(manifest.segments, s):
                segments.append(SegmentRecord(spec.copy_id(s, seg.utt_id), spec.copy_id(s, seg.recording_id),
                                              seg.start, seg.end, seg.channel))
        utt_ids = [seg.utt_id for seg in segments]
        if len(set(utt_ids)) != len(utt_ids):
            raise ValueError("generated utterance ids collide")

    failures: Dict[str, str] = {}
    if copies:
        os.makedirs(output_dir, exist_ok=True)
        recs = sorted(manifest.wav)
        jobs = [(manifest.wav[rec], [wav[spec.copy_id(s, rec)] for s in copies], copies, encoding)
                for rec in recs]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_perturb_recording, jobs))
        else:
            results = [_perturb_recording(job) for job in jobs]
        for rec, err in zip(recs, results):
            if err is not None:
                log.error("speed perturbation failed: %s", err)
                failures[rec] = err

    if failures:
        failed_ids = {spec.copy_id(s, rec) for rec in failures for s in spec.speeds}
        wav = {k: v for k, v in wav.items() if k not in failed_ids}
        if segments is not None:
            segments = [seg for seg in segments if seg.recording_id not in failed_ids]

    return Manifest(wav, segments), failures
