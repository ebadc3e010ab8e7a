"""Command-line pipeline: synth, fit, sweep, heuristic, report.

A typical run on synthetic data:

    adnpca synth --out bench --seed 7
    adnpca fit --features bench --model-dir models
    adnpca sweep --features bench --model-dir models --out run
    adnpca heuristic --method ratio --features bench --model-dir models --out run
    adnpca heuristic --method kstest --features bench --model-dir models --out run
    adnpca heuristic --method reldist --features bench --model-dir models --out run
    adnpca report --out run --plots

Exit codes: 0 success, 2 input error, 3 numerical failure. All artifacts
are deterministic for fixed inputs and seed; wall-clock timestamps appear
only inside run_manifest.json.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

from . import evaluation, heuristics, plotting
from .errors import (
    AdnpcaError,
    DegenerateInput,
    DegenerateSpectrum,
    IoFailure,
    MalformedFile,
    NumericalFailure,
    PairingMismatch,
    ZeroNormalScore,
)
from .featstore import (
    DatasetManifest,
    ManifestEntry,
    atomic_write_text,
    load_manifest,
    read_feature_matrix,
)
from .gaussian import (
    fit_gaussian,
    load_model,
    save_model,
    spectral_decompose,
    whiten,
)
from .synthgen import Benchmark, BenchmarkSpec, generate_benchmark, write_benchmark

#: CLI method names for the heuristic subcommand.
HEURISTIC_METHODS = ("ratio", "kstest", "reldist")

NUMERICAL_ERRORS = (NumericalFailure, DegenerateSpectrum, DegenerateInput, ZeroNormalScore)


# ---------------------------------------------------------------------------
# Shared plumbing


def _load_dataset(features: str) -> DatasetManifest:
    """Resolve --features: a manifest path, its directory, or one bare file."""
    p = Path(features)
    if p.is_dir():
        p = p / "manifest.json"
    if p.suffix == ".json":
        return load_manifest(p)
    m = read_feature_matrix(p)
    return DatasetManifest(
        category=m.category,
        stages=[ManifestEntry(stage=m.stage, path=p.name, split=m.split)],
        base_dir=p.parent,
    )


def _stages(manifest: DatasetManifest, requested: int | None) -> list[int]:
    if requested is not None:
        if not manifest.entries(stage=requested):
            raise IoFailure(
                f"no entries for stage {requested} in the {manifest.category!r} manifest"
            )
        return [requested]
    return manifest.stage_ids()


def _model_path(model_dir: Path, stage: int) -> Path:
    return model_dir / f"model_stage{stage}.json"


def _write_json(doc: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def record_run(out_dir: Path, command: str, params: dict, outputs: list[str]) -> None:
    """Append one run record; the only place a wall clock is written."""
    path = out_dir / "run_manifest.json"
    doc = {"runs": []}
    if path.exists():
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            doc = {"runs": []}
    doc.setdefault("runs", []).append(
        {
            "command": command,
            "params": params,
            "outputs": outputs,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    spec = BenchmarkSpec(
        seed=args.seed,
        n_train=args.n_train,
        n_test=args.n_test,
        d=args.d,
        k_true=args.k_true,
        gap=args.gap,
        offset=args.offset,
        rotate=args.rotate,
        fixed_direction=args.fixed_direction,
    )
    bench: Benchmark = generate_benchmark(spec)
    out = Path(args.out)
    write_benchmark(bench, out)
    record_run(out, "synth", _params(args), ["manifest.json"])
    print(
        f"benchmark written to {out}: d={spec.d}, k_true={spec.k_true}, "
        f"n_train={spec.n_train}, n_test={spec.n_test}, seed={spec.seed}"
    )
    return 0


def cmd_fit(args) -> int:
    manifest = _load_dataset(args.features)
    model_dir = Path(args.model_dir)
    stages = _stages(manifest, args.stage)
    written = []
    for stage in stages:
        train = manifest.load(stage, "train")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = fit_gaussian(train, shrinkage=args.shrinkage)
            spectral = spectral_decompose(model)
        for w in caught:
            print(f"warning [stage {stage}]: {w.message}", file=sys.stderr)
        path = _model_path(model_dir, stage)
        save_model(spectral, path)
        written.append(path.name)
        print(
            f"stage {stage}: fitted d={model.d} on n={model.n_fit} "
            f"(shrinkage={model.shrinkage:g}) -> {path}"
        )
    _write_json(
        {
            "category": manifest.category,
            "shrinkage": args.shrinkage,
            "models": {str(s): f for s, f in zip(stages, written)},
        },
        model_dir / "fit_manifest.json",
    )
    record_run(model_dir, "fit", _params(args), written)
    return 0


def cmd_sweep(args) -> int:
    manifest = _load_dataset(args.features)
    model_dir = Path(args.model_dir)
    out = Path(args.out)
    stages = _stages(manifest, args.stage)
    written = []
    for stage in stages:
        spectral = load_model(_model_path(model_dir, stage))
        w_normal = whiten(spectral, manifest.load(stage, "test_normal"))
        w_anom = whiten(spectral, manifest.load(stage, "test_anomalous"))
        sweep = evaluation.sweep_k(w_normal, w_anom)

        doc = {
            "category": manifest.category,
            "stage": stage,
            "score": "mean_sq",
            "effective_rank": spectral.source.effective_rank,
            "sweep": evaluation.sweep_to_dict(sweep),
        }
        base = f"sweep_stage{stage}"
        _write_json(doc, out / f"{base}.json")
        evaluation.write_sweep_csv(sweep, out / f"{base}.csv")
        written += [f"{base}.json", f"{base}.csv"]
        if args.plots:
            plotting.plot_sweep(
                sweep,
                out / f"{base}.svg",
                title=f"{manifest.category} stage {stage}",
            )
            written.append(f"{base}.svg")
        note = ""
        if sweep.k_star > spectral.source.effective_rank:
            note = " (beyond covariance rank; unreliable)"
        print(
            f"stage {stage}: k*={sweep.k_star}, auroc*={sweep.auroc_star:.4f}{note}"
        )
    record_run(out, "sweep", _params(args), written)
    return 0


def _build_heuristic(args, manifest: DatasetManifest, stage: int, spectral):
    """Returns (curve, selection, extra_docs) for one stage."""
    if args.method == "ratio":
        curve = heuristics.eigenvalue_ratio_curve(spectral, literal=args.ratio_literal)
        return curve, heuristics.select_k_argmax(curve), {}

    if args.method == "kstest":
        w_train = whiten(spectral, manifest.load(stage, "train"))
        curve = heuristics.normality_curve(
            w_train,
            stephens=args.stephens,
            meta={"category": manifest.category, "stage": stage},
        )
        return curve, heuristics.select_k_tolerance(curve, tol=args.tolerance), {}

    # reldist
    if manifest.pairing is None:
        raise PairingMismatch(
            "relative-distance heuristic needs a pairing block in the manifest"
        )
    w_normal = whiten(spectral, manifest.load(stage, "test_normal"))
    w_synth = whiten(spectral, manifest.load(stage, "synthetic"))
    curve = heuristics.relative_distance_curve(
        w_normal,
        w_synth,
        pairing=manifest.pairing,
        meta={"category": manifest.category, "stage": stage},
    )
    diff = heuristics.differential_curve(curve)
    extra = {
        "differential": heuristics.curve_to_dict(diff),
        "differential_selection": heuristics.selection_to_dict(
            heuristics.select_k_argmax(diff)
        ),
    }
    return curve, heuristics.select_k_tolerance(curve, tol=args.tolerance), extra


def cmd_heuristic(args) -> int:
    manifest = _load_dataset(args.features)
    model_dir = Path(args.model_dir)
    out = Path(args.out)
    stages = _stages(manifest, args.stage)
    written = []
    for stage in stages:
        spectral = load_model(_model_path(model_dir, stage))
        curve, sel, extra = _build_heuristic(args, manifest, stage, spectral)

        doc = {
            "category": manifest.category,
            "stage": stage,
            "method": args.method,
            "curve": heuristics.curve_to_dict(curve),
            "selection": heuristics.selection_to_dict(sel),
            **extra,
        }

        sweep_path = out / f"sweep_stage{stage}.json"
        if sweep_path.exists():
            sweep = evaluation.sweep_from_dict(
                json.loads(sweep_path.read_text())["sweep"]
            )
            entry = evaluation.regret(
                sweep, sel, category=manifest.category, stage=stage
            )
            doc["regret"] = evaluation.regret_entry_to_dict(entry)

        base = f"heuristic_{args.method}_stage{stage}"
        _write_json(doc, out / f"{base}.json")
        heuristics.write_curve_csv(curve, out / f"{base}.csv")
        written += [f"{base}.json", f"{base}.csv"]
        if "differential" in extra:
            diff = heuristics.curve_from_dict(extra["differential"])
            heuristics.write_curve_csv(diff, out / f"{base}_differential.csv")
            written.append(f"{base}_differential.csv")
        if args.plots:
            plotting.plot_curve(
                curve,
                out / f"{base}.svg",
                selection=sel,
                title=f"{manifest.category} stage {stage} ({args.method})",
            )
            written.append(f"{base}.svg")
        regret_note = (
            f", regret={doc['regret']['regret']:.4f}" if "regret" in doc else ""
        )
        print(f"stage {stage}: {args.method} k~={sel.k_tilde}{regret_note}")
    record_run(out, "heuristic", _params(args), written)
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    sweeps = {}
    for path in sorted(out.glob("sweep_stage*.json")):
        doc = json.loads(path.read_text())
        sweeps[(doc["category"], doc["stage"])] = doc
    heur_docs = []
    for path in sorted(out.glob("heuristic_*_stage*.json")):
        heur_docs.append(json.loads(path.read_text()))
    if not sweeps:
        raise IoFailure(f"no sweep reports found in {out}")
    if not heur_docs:
        raise IoFailure(f"no heuristic reports found in {out}")

    rows = []
    for doc in heur_docs:
        key = (doc["category"], doc["stage"])
        if key not in sweeps:
            continue
        sweep = evaluation.sweep_from_dict(sweeps[key]["sweep"])
        sel = heuristics.Selection(
            k_tilde=int(doc["selection"]["k_tilde"]),
            rule=doc["selection"]["rule"],
            method=doc["selection"].get("method", ""),
        )
        entry = evaluation.regret(sweep, sel, category=key[0], stage=key[1])
        rows.append(
            {
                "category": key[0],
                "stage": key[1],
                "heuristic": doc["method"],
                "k_tilde": entry.k_tilde,
                "k_star": entry.k_star,
                "auroc_tilde": entry.auroc_tilde,
                "auroc_star": entry.auroc_star,
                "regret": entry.regret,
            }
        )
    if not rows:
        raise MalformedFile(
            f"heuristic and sweep reports in {out} share no (category, stage)"
        )

    rows.sort(key=lambda r: (r["category"], r["stage"], r["heuristic"]))
    _write_json({"rows": rows}, out / "report.json")
    lines = ["category,stage,heuristic,k_tilde,k_star,auroc_tilde,auroc_star,regret"]
    for r in rows:
        lines.append(
            f"{r['category']},{r['stage']},{r['heuristic']},{r['k_tilde']},"
            f"{r['k_star']},{r['auroc_tilde']!r},{r['auroc_star']!r},{r['regret']!r}"
        )
    atomic_write_text(out / "report.csv", "\n".join(lines) + "\n")
    written = ["report.json", "report.csv"]

    header = f"{'category':<12}{'stage':>6}{'heuristic':>10}{'k~':>5}{'k*':>5}{'auroc(k~)':>11}{'auroc(k*)':>11}{'regret':>9}"
    print(header)
    for r in rows:
        print(
            f"{r['category']:<12}{r['stage']:>6}{r['heuristic']:>10}"
            f"{r['k_tilde']:>5}{r['k_star']:>5}"
            f"{r['auroc_tilde']:>11.4f}{r['auroc_star']:>11.4f}{r['regret']:>9.4f}"
        )
    for (cat, stage), doc in sorted(sweeps.items()):
        rank = doc.get("effective_rank")
        k_star = doc["sweep"]["k_star"]
        if rank is not None and k_star > rank:
            print(
                f"note: {cat} stage {stage}: k*={k_star} exceeds covariance "
                f"rank {rank}; treat as unreliable"
            )

    if args.plots:
        for doc in heur_docs:
            key = (doc["category"], doc["stage"])
            if key not in sweeps:
                continue
            sweep = evaluation.sweep_from_dict(sweeps[key]["sweep"])
            curve = heuristics.curve_from_dict(doc["curve"])
            sel_doc = doc["selection"]
            sel = heuristics.Selection(
                k_tilde=int(sel_doc["k_tilde"]),
                rule=sel_doc["rule"],
                method=sel_doc.get("method", ""),
            )
            name = f"overlay_{doc['method']}_stage{doc['stage']}.svg"
            plotting.plot_overlay(
                curve,
                sweep,
                sel,
                out / name,
                title=f"{key[0]} stage {key[1]} ({doc['method']})",
            )
            written.append(name)

    record_run(out, "report", _params(args), written)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _params(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adnpca",
        description="Feature-space anomaly detection with negated PCA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-subspace benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=400)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--k-true", type=int, default=8)
    p.add_argument("--gap", type=float, default=10.0)
    p.add_argument("--offset", type=float, default=4.0)
    p.add_argument("--rotate", action="store_true")
    p.add_argument("--fixed-direction", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit the Gaussian model per stage")
    p.add_argument("--features", required=True, help="dataset manifest, its directory, or one feature file")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--stage", type=int, default=None)
    p.add_argument("--shrinkage", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0, help="ignored; fit is deterministic")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="AUROC over every k, find k*")
    p.add_argument("--features", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", type=int, default=None)
    p.add_argument("--plots", action="store_true", help="also render SVG figures")
    p.add_argument("--seed", type=int, default=0, help="ignored; sweep is deterministic")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("heuristic", help="compute a k-selection heuristic")
    p.add_argument("--method", required=True, choices=HEURISTIC_METHODS)
    p.add_argument("--features", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--ratio-literal", action="store_true",
                   help="use the smaller-gap reading of the ratio formula")
    p.add_argument("--stephens", action="store_true",
                   help="finite-sample correction for the normality test")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="ignored; heuristics are deterministic")
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("report", help="consolidate sweeps and heuristics")
    p.add_argument("--out", required=True)
    p.add_argument("--plots", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="ignored")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except AdnpcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
