"""Batch command-line surface.

Subcommands: features, datagen, infer, postprocess, ensemble, evaluate.
Per-file work runs on a bounded thread pool (STEREOSELD_WORKERS, default 4);
all outputs are written atomically. Exit codes: 0 ok, 2 usage, 3 data error,
4 format error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import containers, csvio, datagen, dsp, labels as labelcodec, metrics, vision, wavio
from .config import RunConfig, SINGLE_VOTE_CLASSES
from .ensemble import EventPredictionSet, combine
from .errors import DataError, FormatError
from .events import FRAMES_PER_SECOND
from .model import ModelConfig, expected_param_shapes, forward
from .rng import SplitMix64, derive_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FORMAT = 4


def _workers() -> int:
    try:
        n = int(os.environ.get("STEREOSELD_WORKERS", "4"))
    except ValueError:
        n = 4
    return max(1, n)


def _run_items(items, fn):
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        for result in pool.map(fn, items):
            pass


def _stems(directory: Path, suffix: str) -> dict[str, Path]:
    return {p.stem: p for p in sorted(directory.glob(f"*{suffix}"))}


def _require_dir(path: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"not a directory: {path}")
    return p


# ---------------------------------------------------------------------------


def cmd_features(args) -> int:
    in_dir = _require_dir(args.in_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = containers.load_norm_stats(args.stats) if args.stats else None
    wavs = _stems(in_dir, ".wav")
    if not wavs:
        raise DataError(f"no .wav files in {in_dir}")

    def work(item):
        stem, path = item
        data, rate = wavio.read_wav(path)
        if rate != dsp.SAMPLE_RATE:
            raise DataError(f"{path}: expected {dsp.SAMPLE_RATE} Hz, got {rate}")
        if data.shape[1] != 2:
            raise DataError(f"{path}: expected stereo, got {data.shape[1]} channels")
        clip = dsp.StereoClip(left=data[:, 0], right=data[:, 1], sample_rate=rate)
        feat = dsp.stack_features(clip, stats=stats)
        containers.save_features(out_dir / f"{stem}.ssf", feat.data)

    _run_items(sorted(wavs.items()), work)
    return EXIT_OK


def cmd_datagen(args) -> int:
    foa_dir = _require_dir(args.foa_dir)
    meta_dir = _require_dir(args.meta_dir)
    out_dir = Path(args.out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    (out_dir / "meta").mkdir(parents=True, exist_ok=True)
    wavs = _stems(foa_dir, ".wav")
    csvs = _stems(meta_dir, ".csv")
    if not wavs:
        raise DataError(f"no .wav files in {foa_dir}")
    unpaired = sorted(set(wavs) ^ set(csvs))
    if unpaired:
        raise DataError(f"unpaired stems: {', '.join(unpaired)}")

    def work(stem):
        audio, rate = wavio.read_wav(wavs[stem])
        if audio.shape[1] != 4:
            raise DataError(f"{wavs[stem]}: expected 4-channel FOA, got {audio.shape[1]}")
        # ACN channel order: W, Y, Z, X
        foa = datagen.FoaClip(
            w=audio[:, 0], y=audio[:, 1], z=audio[:, 2], x=audio[:, 3], sample_rate=rate
        )
        meta = csvio.read_dcase_csv(csvs[stem], distance_unit=args.distance_unit)
        segments = datagen.silence_filter(datagen.segment_clip(foa, meta, seg_s=args.segment_seconds))
        gen = SplitMix64(derive_seed(args.seed, stem))
        for seg_idx, (seg_audio, seg_labels) in enumerate(segments):
            for rot in range(args.rotations):
                phi = gen.uniform(0.0, 360.0)
                rotated = datagen.foa_rotate_yaw(seg_audio, phi)
                rot_labels = datagen.rotate_labels_yaw(seg_labels, phi)
                stereo = datagen.foa_to_stereo(rotated)
                variants = [("", stereo, rot_labels)]
                if args.swap:
                    sw_audio, sw_labels = datagen.lr_swap(stereo, rot_labels)
                    variants.append(("_swap", sw_audio, sw_labels))
                for tag, aud, lbl in variants:
                    name = f"{stem}_seg{seg_idx:02d}_rot{rot}{tag}"
                    wavio.write_wav(
                        out_dir / "audio" / f"{name}.wav",
                        np.stack([aud.left, aud.right], axis=1),
                        rate,
                    )
                    csvio.write_dcase_csv(out_dir / "meta" / f"{name}.csv", lbl)

    _run_items(sorted(wavs), work)
    return EXIT_OK


def _model_config(args) -> ModelConfig:
    return ModelConfig(n_classes=args.n_classes, clap_dim=args.clap_dim)


def cmd_infer(args) -> int:
    feat_dir = _require_dir(args.features_dir)
    clap_dir = _require_dir(args.clap_dir)
    visual_dir = _require_dir(args.visual_dir) if args.visual_dir else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _model_config(args)
    run = RunConfig()
    weights = containers.load_weights(args.weights, expected_param_shapes(cfg))
    feats = _stems(feat_dir, ".ssf")
    if not feats:
        raise DataError(f"no .ssf feature files in {feat_dir}")
    claps = _stems(clap_dir, ".sse")
    missing = sorted(set(feats) - set(claps))
    if missing:
        raise DataError(f"missing audio embeddings for: {', '.join(missing)}")
    visuals = _stems(visual_dir, ".sse") if visual_dir else {}
    if visual_dir:
        missing_v = sorted(set(feats) - set(visuals))
        if missing_v:
            raise DataError(f"missing visual embeddings for: {', '.join(missing_v)}")

    def work(stem):
        feat = containers.load_features(feats[stem])
        clap = containers.load_embedding(claps[stem])
        visual = containers.load_embedding(visuals[stem]) if visual_dir else None
        out = forward(feat, clap, visual, weights, cfg)
        decoded = labelcodec.decode(out, act_thresh=run.act_thresh, on_thresh=run.on_thresh)
        csvio.write_dcase_csv(out_dir / f"{stem}.csv", decoded)

    _run_items(sorted(feats), work)
    return EXIT_OK


def cmd_postprocess(args) -> int:
    pred_dir = _require_dir(args.pred_dir)
    kp_dir = _require_dir(args.kp_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = RunConfig(hfov_deg=args.hfov)
    preds = _stems(pred_dir, ".csv")
    if not preds:
        raise DataError(f"no .csv predictions in {pred_dir}")
    kps = _stems(kp_dir, ".jsonl")
    missing = sorted(set(preds) - set(kps))
    if missing:
        raise DataError(f"missing keypoint streams for: {', '.join(missing)}")

    def work(stem):
        labels = csvio.read_dcase_csv(preds[stem])
        frames = vision.read_keypoints_jsonl(kps[stem], default_width=args.frame_width)
        fixed = vision.keypoint_postprocess(
            labels,
            frames,
            hfov_deg=run.hfov_deg,
            thresh_deg=run.angle_thresh_deg,
            frame_width=args.frame_width,
            conf_thresh=run.keypoint_conf_thresh,
        )
        csvio.write_dcase_csv(out_dir / f"{stem}.csv", fixed)

    _run_items(sorted(preds), work)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    dirs = [_require_dir(d) for d in args.pred_dirs]
    if len(dirs) < 1:
        raise DataError("need at least one prediction directory")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem_sets = [set(_stems(d, ".csv")) for d in dirs]
    stems = stem_sets[0]
    for s in stem_sets[1:]:
        if s != stems:
            raise DataError(f"prediction directories disagree on stems: {sorted(stems ^ s)}")
    if not stems:
        raise DataError("no .csv predictions found")

    def work(stem):
        systems = [
            EventPredictionSet(system_id=str(d), labels=csvio.read_dcase_csv(d / f"{stem}.csv"))
            for d in dirs
        ]
        fused = combine(
            systems,
            quorum=args.quorum,
            angle_thresh=args.angle,
            single_vote_classes=SINGLE_VOTE_CLASSES,
        )
        csvio.write_dcase_csv(out_dir / f"{stem}.csv", fused.labels)

    _run_items(sorted(stems), work)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ref_dir = _require_dir(args.ref_dir)
    pred_dir = _require_dir(args.pred_dir)
    refs = _stems(ref_dir, ".csv")
    preds = _stems(pred_dir, ".csv")
    if not refs:
        raise DataError(f"no reference .csv files in {ref_dir}")
    missing = sorted(set(refs) ^ set(preds))
    if missing:
        raise DataError(f"misaligned stems between ref and pred: {', '.join(missing)}")
    run = RunConfig()
    ref_streams = []
    pred_streams = []
    for stem in sorted(refs):
        ref_streams.append(csvio.read_dcase_csv(refs[stem], distance_unit=args.distance_unit))
        pred_streams.append(csvio.read_dcase_csv(preds[stem], distance_unit=args.distance_unit))
    report = metrics.evaluate(ref_streams, pred_streams, n_classes=run.n_classes)
    print(metrics.format_table(report))
    if args.json:
        with containers.atomic_write(args.json) as f:
            f.write(report.to_json().encode("utf-8"))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereoseld", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="24 kHz stereo WAVs -> SSF1 feature files")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--stats", help="SSNS normalisation stats file")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("datagen", help="FOA clips -> rotated stereo training segments")
    p.add_argument("foa_dir")
    p.add_argument("meta_dir")
    p.add_argument("out_dir")
    p.add_argument("--rotations", type=int, default=4)
    p.add_argument("--swap", action="store_true", help="also emit left-right swapped copies")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segment-seconds", type=float, default=5.0)
    p.add_argument("--distance-unit", choices=("m", "cm"), default="m")
    p.set_defaults(fn=cmd_datagen)

    p = sub.add_parser("infer", help="feature + embedding files -> prediction CSVs")
    p.add_argument("features_dir")
    p.add_argument("clap_dir")
    p.add_argument("weights")
    p.add_argument("out_dir")
    p.add_argument("--visual-dir", help="pooled visual-token .sse files (audio-visual mode)")
    p.add_argument("--n-classes", type=int, default=13)
    p.add_argument("--clap-dim", type=int, default=512)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("postprocess", help="raise on-screen flags near detected keypoints")
    p.add_argument("pred_dir")
    p.add_argument("kp_dir")
    p.add_argument("out_dir")
    p.add_argument("--hfov", type=float, default=100.0)
    p.add_argument("--frame-width", type=float, default=1920.0)
    p.set_defaults(fn=cmd_postprocess)

    p = sub.add_parser("ensemble", help="majority-vote fusion of prediction directories")
    p.add_argument("out_dir")
    p.add_argument("pred_dirs", nargs="+")
    p.add_argument("--quorum", type=int, default=2)
    p.add_argument("--angle", type=float, default=20.0)
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score prediction CSVs against references")
    p.add_argument("ref_dir")
    p.add_argument("pred_dir")
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("--distance-unit", choices=("m", "cm"), default="m")
    p.set_defaults(fn=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
