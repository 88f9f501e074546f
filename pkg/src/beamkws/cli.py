"""Command-line surface: simulate, features, enhance, oracle-masks,
fusion-check, and score.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fusion
from .errors import FormatError, InputError
from .geometry import (
    BeamGrid,
    load_geometry,
    load_roi_file,
    region_center_angle,
    region_majority,
    region_of_roi,
)
from .masks import load_mask, oracle_irm, save_mask
from .mvdr import apply_weights, estimate_covariances, solve_weights
from .scoring import (
    best_point,
    format_point,
    read_scores_csv,
    score as score_at,
    sweep,
    write_report_json,
    write_sweep_csv,
)
from .simulate import load_scene, si_snr, simulate
from .spatial import PairSet, assemble_input, pairs_from_config
from .stft import Waveform, istft, stft
from .tensorfile import write_tensor
from .wavio import read_wav, write_wav

GOLDEN_TRACE = Path(__file__).parent / "data" / "golden_fusion.bkt"
GRAD_TOLERANCE = 1e-4
GOLDEN_TOLERANCE = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is 1
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="beamkws", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="render a scene config to WAV files")
    p.add_argument("scene", help="scene JSON file")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")

    p = sub.add_parser("features", help="magnitude + angle-feature network input")
    p.add_argument("--wav", required=True)
    p.add_argument("--geometry", required=True, help="geometry JSON")
    p.add_argument("--roi", default=None, help="lip ROI JSON (majority region sets the angle)")
    p.add_argument("--theta", type=float, default=None, help="arrival angle in degrees")
    p.add_argument("-o", "--out", required=True, help="output .bkt tensor")

    p = sub.add_parser("enhance", help="mask-based MVDR enhancement")
    p.add_argument("--wav", required=True)
    p.add_argument("--geometry", required=True)
    p.add_argument("--speech-mask", required=True)
    p.add_argument("--noise-mask", required=True)
    p.add_argument("-o", "--out", required=True, help="output WAV")
    p.add_argument("--emit-weights", default=None, help="also write weights as .bkt")
    p.add_argument("--figure", default=None, help="also render before/after spectrograms")
    p.add_argument("--diagonal-loading", type=float, default=1e-6)

    p = sub.add_parser("oracle-masks", help="ideal ratio masks from clean/noise references")
    p.add_argument("--mix", required=True, help="mixture WAV (shape check only)")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("-o", "--out", required=True, help="output prefix")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--form", choices=("magnitude", "sqrt_energy"), default="magnitude")

    p = sub.add_parser("fusion-check", help="verify the fusion math")
    p.add_argument("--golden", default=str(GOLDEN_TRACE), help="golden trace .bkt")
    p.add_argument("--grad", action="store_true", help="also run the gradient suite")
    p.add_argument("--emit", default=None, help="write the recomputed golden trace here")

    p = sub.add_parser("score", help="FRR/FAR scoring of a prediction CSV")
    p.add_argument("--in", dest="input", required=True, help="CSV with id,label,score")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("-o", "--out", required=True, help="report JSON")
    return parser


def cmd_simulate(args) -> int:
    scene = load_scene(args.scene, seed_override=args.seed)
    render = simulate(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    files = {"mixture": "mixture.wav", "noise": "noise.wav"}
    write_wav(out / "mixture.wav", render.mixture)
    write_wav(out / "noise.wav", render.noise_image)
    for k, image in enumerate(render.source_images):
        name = f"source_{k:02d}.wav"
        files[f"source_{k:02d}"] = name
        write_wav(out / name, image)
    interference = Waveform(
        samples=render.mixture.samples - render.source_images[0].samples,
        sample_rate=scene.sample_rate,
    )
    write_wav(out / "interference.wav", interference)
    files["interference"] = "interference.wav"

    ref = scene.geometry.reference_mic
    target_ref = Waveform(render.source_images[0].samples[ref : ref + 1], scene.sample_rate)
    mixture_ref = Waveform(render.mixture.samples[ref : ref + 1], scene.sample_rate)
    manifest = {
        "files": files,
        "num_channels": render.mixture.num_channels,
        "num_samples": render.mixture.num_samples,
        "reference_mic": ref,
        "sample_rate": scene.sample_rate,
        "seed": scene.seed,
        "si_snr_mixture_vs_source_00_db": si_snr(mixture_ref, target_ref),
        "source_angles_deg": [src.angle_deg for src in scene.sources],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


def _resolve_theta(args) -> float:
    if args.theta is not None:
        return float(args.theta)
    if args.roi is None:
        raise InputError("need either --theta or --roi")
    grid = BeamGrid()
    rois = load_roi_file(args.roi)
    regions = [region_of_roi(roi, grid) for _, roi in rois]
    region = region_majority(regions)
    theta = region_center_angle(region, grid)
    print(f"ROI majority region {region} -> theta {theta:.1f} deg")
    return theta


def _load_pairs(geometry_path: str, num_mics: int) -> PairSet:
    with open(geometry_path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "pairs" in data:
        pairs = pairs_from_config(data["pairs"], index_base=int(data.get("index_base", 1)))
    else:
        pairs = PairSet()
    return pairs


def cmd_features(args) -> int:
    wav = read_wav(args.wav)
    geom = load_geometry(args.geometry)
    pairs = _load_pairs(args.geometry, geom.num_mics)
    theta = _resolve_theta(args)
    spec = stft(wav)
    feats = assemble_input(spec, geom, pairs, theta)
    metadata = (
        f"spatial-feature v1; blocks={','.join(feats.blocks)}; bins={feats.bins_per_block}; "
        f"theta_deg={theta:.6g}; sample_rate={spec.sample_rate:g}; "
        f"frame_len={spec.frame_len_samples}; hop={spec.hop_samples}"
    )
    write_tensor(args.out, feats.data.astype(np.float32), metadata=metadata)
    print(f"wrote {feats.data.shape[0]} x {feats.data.shape[1]} features to {args.out}")
    return 0


def cmd_enhance(args) -> int:
    wav = read_wav(args.wav)
    geom = load_geometry(args.geometry)
    if wav.num_channels != geom.num_mics:
        raise InputError(
            f"waveform has {wav.num_channels} channels but geometry has {geom.num_mics} mics"
        )
    spec = stft(wav)
    shape = (spec.num_frames, spec.num_freqs)
    speech = load_mask(args.speech_mask, expected_shape=shape)
    noise = load_mask(args.noise_mask, expected_shape=shape)
    cov = estimate_covariances(spec, speech, noise)
    weights = solve_weights(
        cov, diagonal_loading=args.diagonal_loading, reference_mic=geom.reference_mic
    )
    enhanced = istft(apply_weights(spec, weights))
    enhanced = Waveform(enhanced.samples[:, : wav.num_samples], wav.sample_rate)
    write_wav(args.out, enhanced)
    degenerate = int(weights.degenerate.sum())
    print(f"wrote {args.out} ({degenerate}/{weights.num_freqs} pass-through bins)")
    if args.emit_weights:
        packed = np.stack([weights.weights.real, weights.weights.imag], axis=-1)
        metadata = (
            f"beamformer-weights v1; layout=re,im; reference_mic={weights.reference_mic}; "
            f"frame_len={spec.frame_len_samples}; hop={spec.hop_samples}"
        )
        write_tensor(args.emit_weights, packed.astype(np.float32), metadata=metadata)
        print(f"wrote weights to {args.emit_weights}")
    if args.figure:
        from .report import render_enhancement_figure

        render_enhancement_figure(wav, enhanced, args.figure, channel=geom.reference_mic)
        print(f"wrote figure to {args.figure}")
    return 0


def cmd_oracle_masks(args) -> int:
    mix = read_wav(args.mix)
    clean = read_wav(args.clean)
    noise = read_wav(args.noise)
    for name, wav in (("clean", clean), ("noise", noise)):
        if wav.samples.shape != mix.samples.shape or wav.sample_rate != mix.sample_rate:
            raise InputError(f"{name} WAV does not match the mixture's shape and rate")
    speech_mask, noise_mask = oracle_irm(
        stft(clean), stft(noise), channel=args.channel, form=args.form
    )
    speech_path = f"{args.out}.speech.bkt"
    noise_path = f"{args.out}.noise.bkt"
    save_mask(speech_mask, speech_path)
    save_mask(noise_mask, noise_path)
    print(f"wrote {speech_path} and {noise_path}")
    return 0


def cmd_fusion_check(args) -> int:
    failures = 0
    max_diff, count = fusion.check_golden_trace(args.golden)
    ok = max_diff <= GOLDEN_TOLERANCE
    failures += 0 if ok else 1
    print(f"golden trace: max |diff| {max_diff:.3e} over {count} values "
          f"[{'PASS' if ok else 'FAIL'}]")
    if args.emit:
        stored_meta = fusion.parse_metadata(fusion.read_tensor(args.golden)[1])
        fusion.write_golden_trace(
            args.emit,
            seed=int(stored_meta["seed"]),
            dim=int(stored_meta["dim"]),
            hidden_dim=int(stored_meta["hidden_dim"]),
            tokens=int(stored_meta["tokens"]),
            num_heads=int(stored_meta.get("heads", 1)),
        )
        print(f"wrote recomputed trace to {args.emit}")
    if args.grad:
        for op in ("attention", "bilinear", "attended", "fuse"):
            report = fusion.grad_check(op, probes=25, seed=13)
            ok = report.max_rel_error < GRAD_TOLERANCE and report.checked > 0
            failures += 0 if ok else 1
            skipped = f", {len(report.skipped)} kink-skipped" if report.skipped else ""
            print(
                f"grad {op}: max rel err {report.max_rel_error:.3e} "
                f"over {report.checked} coords{skipped} [{'PASS' if ok else 'FAIL'}]"
            )
    return 1 if failures else 0


def cmd_score(args) -> int:
    entries = read_scores_csv(args.input)
    if args.sweep and args.threshold is not None:
        raise InputError("--threshold and --sweep are mutually exclusive")
    out = Path(args.out)
    if args.sweep:
        points = sweep(entries)
        best = best_point(points)
        write_report_json(out, best)
        sweep_csv = out.with_name(out.stem + "_sweep.csv")
        write_sweep_csv(sweep_csv, points)
        from .report import render_sweep_figure

        figure = out.with_name(out.stem + "_sweep.png")
        render_sweep_figure(points, figure)
        print(f"best {format_point(best)}")
        print(f"wrote {out}, {sweep_csv}, {figure}")
    else:
        threshold = 0.5 if args.threshold is None else args.threshold
        point = score_at(entries, threshold)
        write_report_json(out, point)
        print(format_point(point))
        print(f"wrote {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "features": cmd_features,
    "enhance": cmd_enhance,
    "oracle-masks": cmd_oracle_masks,
    "fusion-check": cmd_fusion_check,
    "score": cmd_score,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"beamkws: error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"beamkws: error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"beamkws: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
