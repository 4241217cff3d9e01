"""Command-line front end.

Subcommands: fbank, pitch, perturb, beamform, shapes. Exit codes are 0 on
success, 1 when some utterances or recordings failed (successes are kept),
2 for usage or configuration errors.

Flags may also come from ``--config FILE``: one or more flags per line,
``#`` starts a comment, and flags given on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import os
import shlex
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

import numpy as np

from . import kio
from .audio import FLOAT32, PCM16, AudioBuffer, read_wav, write_wav
from .augment import SpeedPerturbSpec, augment_manifest
from .beamform import beamform
from .extract import PipelineConfig, extract_features
from .framing import FramingConfig, num_frames
from .shapes import ENCODERS, encoder_output_length

log = logging.getLogger("hfr_frontend")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--wav-scp", required=True)
    p.add_argument("--segments")
    p.add_argument("--out-ark", required=True)
    p.add_argument("--out-scp")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--frame-rate", type=float, default=100.0)
    p.add_argument("--frame-length-ms", type=float, default=25.0)
    p.add_argument("--num-mel", type=int, default=40)
    p.add_argument("--low-freq", type=float, default=20.0)
    p.add_argument("--high-freq", type=float, default=None)
    p.add_argument("--no-mean-norm", action="store_true")
    p.add_argument("--dither", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hfr-frontend", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fbank", help="FBANK(+pitch) features into an ark/scp pair")
    _add_feature_flags(p)
    p.add_argument("--no-pitch", action="store_true")

    p = sub.add_parser("pitch", help="3-dim pitch features into an ark/scp pair")
    _add_feature_flags(p)

    p = sub.add_parser("perturb", help="speed-perturbed copies plus combined manifests")
    p.add_argument("--wav-scp", required=True)
    p.add_argument("--segments")
    p.add_argument("--speeds", type=_float_list, default=[0.9, 1.0, 1.1])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--encoding", choices=[PCM16, FLOAT32], default=PCM16)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("beamform", help="delay-and-sum several channels into one")
    p.add_argument("--inputs", nargs="+", required=True,
                   help="one multi-channel WAV or several single-channel WAVs")
    p.add_argument("--output", required=True)
    p.add_argument("--max-delay", type=int, default=100, help="samples")
    p.add_argument("--ref-channel", type=int, default=0)
    p.add_argument("--encoding", choices=[PCM16, FLOAT32], default=PCM16)

    p = sub.add_parser("shapes", help="encoder frame counts per duration and frame rate")
    p.add_argument("--durations", type=_float_list, default=[1.0])
    p.add_argument("--frame-rates", type=_float_list, default=[100.0, 200.0, 400.0])
    p.add_argument("--encoder", choices=sorted(ENCODERS), default="vgg-pblstm")
    p.add_argument("--pool-rounding", choices=["ceil", "floor"], default="ceil")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--frame-length-ms", type=float, default=25.0)
    return parser


def expand_config(argv: List[str]) -> List[str]:
    """Splice ``--config FILE`` contents in after the subcommand."""
    argv = list(argv)
    for i, tok in enumerate(argv):
        if tok == "--config" or tok.startswith("--config="):
            if "=" in tok:
                path, drop = tok.split("=", 1)[1], 1
            elif i + 1 < len(argv):
                path, drop = argv[i + 1], 2
            else:
                raise UsageError("--config needs a file")
            del argv[i : i + drop]
            try:
                with open(path, encoding="utf-8") as f:
                    extra = shlex.split(f.read(), comments=True)
            except OSError as err:
                raise UsageError(f"cannot read config {path}: {err}")
            cmd = next((j for j, t in enumerate(argv) if not t.startswith("-")), len(argv))
            return argv[: cmd + 1] + extra + argv[cmd + 1 :]
    return argv


def _pipeline_config(args, enable_pitch: bool) -> PipelineConfig:
    cfg = PipelineConfig(
        sample_rate=args.sample_rate, frame_rate=args.frame_rate,
        frame_length_ms=args.frame_length_ms, num_mel=args.num_mel,
        low_freq=args.low_freq, high_freq=args.high_freq, enable_pitch=enable_pitch,
        mean_norm=not args.no_mean_norm, dither=args.dither, seed=args.seed,
        workers=max(1, args.workers),
    )
    cfg.validate()
    return cfg


def _load_channel(audio: AudioBuffer, seg: kio.SegmentRecord) -> AudioBuffer:
    channel = seg.channel or 0
    if channel >= audio.num_channels:
        raise ValueError(f"channel {channel} not in {audio.num_channels}-channel recording")
    start, end = seg.sample_span(audio.sample_rate, audio.length)
    if end > audio.length:
        raise ValueError(f"segment ends at sample {end}, recording has {audio.length}")
    return audio.channel(channel).slice(start, end)


def _recording_job(job):
    """Extract features for all utterances of one recording (runs in a worker)."""
    path, segments, cfg, pitch_only = job
    results = []
    try:
        audio = read_wav(path)
    except Exception as err:
        return [(seg.utt_id, None, f"{path}: {err}") for seg in segments]
    for seg in segments:
        try:
            feats = extract_features(_load_channel(audio, seg), cfg, seg.utt_id, pitch_only)
            results.append((seg.utt_id, feats.data.astype(np.float32), None))
        except Exception as err:
            results.append((seg.utt_id, None, str(err)))
    return results


def run_features(manifest: kio.Manifest, cfg: PipelineConfig, out_ark, out_scp=None,
                 pitch_only: bool = False, out=None) -> int:
    """Extract every utterance, write them sorted by id, return the exit code."""
    by_rec = {}
    for seg in manifest.utterances():
        by_rec.setdefault(seg.recording_id, []).append(seg)
    jobs = [(manifest.wav[rec], segs, cfg, pitch_only) for rec, segs in sorted(by_rec.items())]

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            batches = list(pool.map(_recording_job, jobs))
    else:
        batches = [_recording_job(job) for job in jobs]
    results = sorted((r for batch in batches for r in batch), key=lambda r: r[0])

    out = out or sys.stdout
    failures = []
    with kio.ArchiveWriter(out_ark, out_scp) as writer:
        for utt_id, data, err in results:
            if err is not None:
                failures.append((utt_id, err))
                continue
            writer.write(utt_id, data)
            print(f"{utt_id} {data.shape[0]}", file=out)
    for utt_id, err in failures:
        print(f"FAILED {utt_id}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_fbank(args) -> int:
    cfg = _pipeline_config(args, enable_pitch=not args.no_pitch)
    manifest = kio.parse_manifest(args.wav_scp, args.segments)
    return run_features(manifest, cfg, args.out_ark, args.out_scp)


def cmd_pitch(args) -> int:
    cfg = _pipeline_config(args, enable_pitch=True)
    manifest = kio.parse_manifest(args.wav_scp, args.segments)
    return run_features(manifest, cfg, args.out_ark, args.out_scp, pitch_only=True)


def _atomic_copy_or_write(write_fn, final_path):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(final_path)), suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, final_path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def cmd_perturb(args) -> int:
    spec = SpeedPerturbSpec(tuple(args.speeds))
    manifest = kio.parse_manifest(args.wav_scp, args.segments)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        probe = tempfile.NamedTemporaryFile(dir=args.out_dir, delete=True)
        probe.close()
    except OSError as err:
        raise UsageError(f"output directory {args.out_dir} is not writable: {err}")

    wav_out = os.path.join(args.out_dir, "wav.scp")
    seg_out = os.path.join(args.out_dir, "segments")
    if spec.speeds == (1.0,):
        _atomic_copy_or_write(lambda p: shutil.copyfile(args.wav_scp, p), wav_out)
        if args.segments:
            _atomic_copy_or_write(lambda p: shutil.copyfile(args.segments, p), seg_out)
        print(f"{len(manifest)} utterances (unchanged)")
        return EXIT_OK

    combined, failures = augment_manifest(manifest, spec, os.path.join(args.out_dir, "wav"),
                                          workers=max(1, args.workers), encoding=args.encoding)
    _atomic_copy_or_write(lambda p: kio.write_wav_scp(combined.wav, p), wav_out)
    if combined.segments is not None:
        _atomic_copy_or_write(lambda p: kio.write_segments(combined.segments, p), seg_out)
    for rec, err in sorted(failures.items()):
        print(f"FAILED {rec}: {err}", file=sys.stderr)
    print(f"{len(manifest)} -> {len(combined)} utterances")
    return EXIT_PARTIAL if failures else EXIT_OK


def _load_channels(paths: List[str]) -> AudioBuffer:
    buffers = [read_wav(p) for p in paths]
    rates = {b.sample_rate for b in buffers}
    if len(rates) != 1:
        detail = ", ".join(f"{p}={b.sample_rate}" for p, b in zip(paths, buffers))
        raise UsageError(f"sample rate mismatch across channels: {detail}")
    if len(buffers) == 1:
        return buffers[0]
    length = buffers[0].length
    rows = []
    for b in buffers:
        ch = b.samples[0]
        rows.append(ch[:length] if ch.shape[0] >= length else np.pad(ch, (0, length - ch.shape[0])))
    return AudioBuffer(np.array(rows), buffers[0].sample_rate)


def cmd_beamform(args) -> int:
    audio = _load_channels(args.inputs)
    if not 2 <= audio.num_channels <= 8:
        raise UsageError(f"need 2-8 channels, got {audio.num_channels}")
    if not 0 <= args.ref_channel < audio.num_channels:
        raise UsageError(f"--ref-channel {args.ref_channel} out of range")
    out, tdoas, weights = beamform(audio, args.max_delay, args.ref_channel)
    write_wav(out, args.output, args.encoding)
    print("channel delay confidence weight")
    for c, (t, w) in enumerate(zip(tdoas, weights)):
        print(f"{c} {t.delay} {t.confidence:.4f} {w:.4f}")
    return EXIT_OK


def shapes_table(durations, frame_rates, encoder: str = "vgg-pblstm", pool_rounding: str = "ceil",
                 sample_rate: int = 16000, frame_length_ms: float = 25.0):
    """Rows of (duration, frame_rate, frames, encoder_frames, extracted, extracted_encoder).

    ``frames`` is duration x frame rate; ``extracted`` is what framing with
    whole frames only actually yields for that duration.
    """
    spec = ENCODERS[encoder]() if encoder == "pblstm" else ENCODERS[encoder](pool_rounding)
    rows = []
    for dur in durations:
        for rate in frame_rates:
            frames = int(round(dur * rate))
            length = int(round(dur * sample_rate))
            extracted = num_frames(length, FramingConfig(frame_rate=rate, frame_length_ms=frame_length_ms),
                                   sample_rate)
            rows.append((dur, rate, frames, encoder_output_length(frames, spec),
                         extracted, encoder_output_length(extracted, spec)))
    return rows


def cmd_shapes(args) -> int:
    rows = shapes_table(args.durations, args.frame_rates, args.encoder, args.pool_rounding,
                        args.sample_rate, args.frame_length_ms)
    print("duration_s frame_rate frames encoder_frames extracted_frames extracted_encoder_frames")
    for dur, rate, frames, enc, extracted, enc_x in rows:
        print(f"{dur:g} {rate:g} {frames} {enc} {extracted} {enc_x}")
    return EXIT_OK


COMMANDS = {"fbank": cmd_fbank, "pitch": cmd_pitch, "perturb": cmd_perturb,
            "beamform": cmd_beamform, "shapes": cmd_shapes}


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = parser.parse_args(expand_config(argv))
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, kio.ManifestError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
