"""Command-line front end: extract features, synthesize anomalies.

A typical real-data run, producing a dataset directory the `adnpca`
pipeline consumes directly:

    adnpca-extract synth --root data --category carpet --out data --seed 3
    adnpca-extract features --root data --category carpet \
        --splits train test_normal test_anomalous synthetic \
        --out feats/carpet --weights imagenet

Exit codes: 0 success, 2 any extraction, synthesis, or input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from adnpca.errors import AdnpcaError

from .backbone import StageFeatureExtractor
from .errors import ExtractorError
from .extract import ALL_STAGES, ExtractionJob, extract_features, write_dataset_manifest
from .synth import SynthesisJob, load_pairing, synthesize_anomalies


def cmd_features(args) -> int:
    extractor = StageFeatureExtractor(weights=args.weights, device=args.device)
    out_dir = Path(args.out)
    for split in args.splits:
        job = ExtractionJob(
            root=args.root,
            category=args.category,
            out_dir=out_dir,
            split=split,
            stages=tuple(args.stages),
            weights=args.weights,
            device=args.device,
            image_size=args.image_size,
            batch_size=args.batch_size,
        )
        written = extract_features(job, extractor=extractor)
        print(f"{split}: {len(written)} stage files -> {out_dir}")

    pairing = None
    pairing_path = (
        Path(args.pairing)
        if args.pairing
        else Path(args.root) / args.category / "pairing.json"
    )
    if pairing_path.is_file():
        pairing = load_pairing(pairing_path)
    manifest = write_dataset_manifest(out_dir, args.category, pairing=pairing)
    print(f"manifest -> {manifest}" + (" (with pairing)" if pairing else ""))
    return 0


def cmd_synth(args) -> int:
    job = SynthesisJob(
        root=args.root,
        category=args.category,
        out_root=args.out,
        split=args.split,
        seed=args.seed,
        opacity=args.opacity,
    )
    pairs = synthesize_anomalies(job)
    print(
        f"{len(pairs)} synthetic images -> {job.out_root / job.category / 'synthetic'}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adnpca-extract",
        description="Backbone feature extraction and synthetic-anomaly generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="emit per-stage feature matrices")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--category", required=True)
    p.add_argument("--splits", nargs="+", default=["train"],
                   choices=["train", "test_normal", "test_anomalous", "synthetic"])
    p.add_argument("--out", required=True, help="output directory for feature files")
    p.add_argument("--stages", nargs="+", type=int, default=list(ALL_STAGES))
    p.add_argument("--weights", default="imagenet",
                   help="'imagenet', 'none', or a checkpoint path")
    p.add_argument("--device", default="cpu")
    p.add_argument("--image-size", type=int, default=380)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--pairing", default=None,
                   help="pairing.json to embed in the manifest (default: auto-detect)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("synth", help="generate masked foreign-texture anomalies")
    p.add_argument("--root", required=True)
    p.add_argument("--category", required=True)
    p.add_argument("--out", required=True, help="output root (category subdir is created)")
    p.add_argument("--split", default="test_normal", choices=["train", "test_normal"],
                   help="normal images used as bases")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opacity", type=float, default=0.7)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExtractorError, AdnpcaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
