"""Command-line surface for the pipeline.

Commands:
  synth          generate the seeded synthetic paired-modality dataset
  train          fit PCA + mapping network from a training manifest
  build-gallery  encode and store a gallery index
  match          rank gallery subjects for probe image(s)
  eval           cmc / roc / gap evaluation reports
  bench          probe throughput measurement

Exit codes: 0 success, 1 usage error, 2 data/protocol error, 3 numeric
failure (training divergence or artifact invariant violation).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import evaluation, pipeline, store
from .config import RunConfig, load_config
from .errors import (
    AlignmentError,
    ConfigError,
    ContractViolation,
    FitError,
    InvariantViolation,
    ManifestError,
    PgmError,
    ProtocolError,
    StoreFormatError,
    TrainingDivergedError,
)
from .manifest import read_manifest
from .matching import identify
from .numerics import Rng, derive_seed
from .preprocess import Landmarks, Modality
from .synthetic import generate

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERIC_ERROR = 3

_DATA_ERRORS = (
    FileNotFoundError,
    PgmError,
    ManifestError,
    ProtocolError,
    AlignmentError,
    StoreFormatError,
    FitError,
)
_NUMERIC_ERRORS = (TrainingDivergedError, InvariantViolation, ContractViolation)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "descriptor", None):
        from dataclasses import replace

        cfg = replace(cfg, descriptor=args.descriptor)
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    ds = generate(cfg.synth_spec(), args.out)
    print(f"wrote {len(ds.rows)} images under {ds.out_dir}")
    print(f"train subjects: {len(ds.train_subjects)}, test subjects: {len(ds.test_subjects)}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pca, model, report = pipeline.fit_models(cfg, args.manifest, threads=args.threads)
    store.save(pca, out / "pca.bin")
    store.save(model, out / "dpm.bin")
    pipeline.write_train_report_csv(report, out / "train_report.csv")
    print(f"epochs: {report.epochs_run}, final loss: {report.final_loss:.6g}")
    print(f"artifacts: {out / 'pca.bin'}, {out / 'dpm.bin'}, {out / 'train_report.csv'}")
    return 0


def cmd_build_gallery(args) -> int:
    cfg = _load_cfg(args)
    pca = store.load_pca(args.pca)
    dpm = None
    if args.dpm and not args.baseline:
        dpm = store.load_net(args.dpm)
    modality = Modality(args.gallery_modality)
    gallery = pipeline.build_gallery(
        cfg,
        args.manifest,
        pca,
        dpm,
        policy=args.gallery_policy,
        modality=modality,
        threads=args.threads,
    )
    store.save(gallery, args.out)
    mapped = "unmapped" if dpm is None else "mapped"
    print(f"gallery: {len(gallery)} {modality.value} images ({mapped}), dim {gallery.dim}")
    return 0


def cmd_match(args) -> int:
    cfg = _load_cfg(args)
    gallery = store.load_gallery(args.gallery)
    pca = store.load_pca(args.pca)
    probes = pipeline.encode_probes(cfg, args.manifest, pca, threads=args.threads)
    if args.probe_index is not None:
        probes = [probes[args.probe_index]]
    lines = ["probe_pair_id,true_subject,rank,subject,score"]
    timings = []
    for vec, subject, pair_id in probes:
        t0 = time.perf_counter()
        result = identify(gallery, vec)
        timings.append((time.perf_counter() - t0) * 1000.0)
        for rank, (subj, score) in enumerate(result.ranking[: args.top_k], start=1):
            lines.append(f"{pair_id},{subject},{rank},{subj},{score:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.timing:
        print(f"scoring: {np.mean(timings):.3f} ms/probe over {len(timings)} probes")
    return 0


def _gallery_pair_ids(gallery) -> set[int]:
    return set(int(i) for i in gallery.image_ids)


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    if args.mode == "gap":
        report = evaluation.modality_gap_report(
            pipeline.read_rank1_from_cmc_csv(args.within_cmc),
            pipeline.read_rank1_from_cmc_csv(args.baseline_cmc),
            pipeline.read_rank1_from_cmc_csv(args.dpm_cmc),
        )
        text = report.to_text()
        if args.out:
            Path(args.out).write_text(text)
        sys.stdout.write(text)
        return 0
    gallery = store.load_gallery(args.gallery)
    pca = store.load_pca(args.pca)
    exclude = _gallery_pair_ids(gallery) if args.exclude_gallery_images else None
    probes = pipeline.encode_probes(
        cfg, args.manifest, pca, exclude_pair_ids=exclude, threads=args.threads
    )
    pairs = [(vec, subject) for vec, subject, _ in probes]
    if args.mode == "cmc":
        curve = evaluation.cmc(gallery, pairs)
        curve.to_csv(args.out)
        print(f"rank-1: {curve.rank1 * 100:.2f}% over {len(pairs)} probes -> {args.out}")
    else:
        curve = evaluation.roc(gallery, pairs)
        curve.to_csv(args.out)
        print(
            f"genuine: {curve.n_genuine}, impostor: {curve.n_impostor}, "
            f"auc: {curve.auc():.4f} -> {args.out}"
        )
    return 0


def _bench_probe_images(cfg: RunConfig, count: int):
    """Seeded random probe images with fixed valid landmarks; content
    does not matter for timing, geometry must be alignable."""
    w, h = cfg.synth_width, cfg.synth_height
    lm = Landmarks(
        left_eye=(w * 0.35, h * 0.40), right_eye=(w * 0.65, h * 0.40), mouth=(w * 0.5, h * 0.65)
    )
    images = []
    for i in range(count):
        rng = Rng(derive_seed(cfg.seed, 0xBE7C + i))
        images.append(rng.uniform(0.0, 1.0, w * h).reshape(h, w))
    return images, lm


def cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    gallery = store.load_gallery(args.gallery)
    pca = store.load_pca(args.pca)
    images, lm = _bench_probe_images(cfg, args.probes)
    from .matching import encode_thermal_probe, score_all

    def run_one(img) -> None:
        vec = encode_thermal_probe(
            img, lm, pca, cfg.grid_spec(), cfg.preproc_params(), cfg.descriptor
        )
        score_all(gallery, vec)

    run_one(images[0])  # warm-up
    t0 = time.perf_counter()
    for img in images:
        run_one(img)
    single = time.perf_counter() - t0
    print(f"single-threaded: {len(images) / single:.1f} probes/s, {single / len(images) * 1000:.2f} ms/probe")
    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            list(pool.map(run_one, images))
        multi = time.perf_counter() - t0
        print(f"{args.threads}-threaded: {len(images) / multi:.1f} probes/s, {multi / len(images) * 1000:.2f} ms/probe")
    # scoring-only figure for the real-time budget
    vec = encode_thermal_probe(images[0], lm, pca, cfg.grid_spec(), cfg.preproc_params(), cfg.descriptor)
    t0 = time.perf_counter()
    reps = 50
    for _ in range(reps):
        score_all(gallery, vec)
    per_score = (time.perf_counter() - t0) / reps * 1000.0
    print(f"scoring only: {per_score:.3f} ms/probe against {len(gallery)} gallery rows")
    if single / len(images) * 1000.0 > 50.0:
        print("warning: probe latency above the 50 ms soft budget on this host", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermoface", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value run configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")

    p = sub.add_parser("synth", help="generate the synthetic dataset")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="fit PCA and train the mapping network")
    common(p)
    p.add_argument("--manifest", required=True, help="training manifest CSV")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--descriptor", choices=["sift", "hog"])
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("build-gallery", help="encode and store a gallery")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--dpm", help="mapping network file (omit for baseline)")
    p.add_argument("--baseline", action="store_true", help="skip the mapping network")
    p.add_argument("--gallery-policy", choices=["one", "two", "all"], default="one")
    p.add_argument("--gallery-modality", choices=["visible", "thermal"], default="visible")
    p.add_argument("--descriptor", choices=["sift", "hog"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_build_gallery)

    p = sub.add_parser("match", help="rank subjects for probes")
    common(p)
    p.add_argument("--gallery", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--manifest", required=True, help="probe manifest CSV")
    p.add_argument("--probe-index", type=int, help="single probe row (0-based)")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--descriptor", choices=["sift", "hog"])
    p.add_argument("--out", help="results CSV (stdout when omitted)")
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("eval", help="cmc / roc / gap reports")
    common(p)
    p.add_argument("--mode", choices=["cmc", "roc", "gap"], required=True)
    p.add_argument("--gallery")
    p.add_argument("--pca")
    p.add_argument("--manifest", help="probe manifest CSV")
    p.add_argument("--exclude-gallery-images", action="store_true",
                   help="drop probes whose pair_id is enrolled (within-modality runs)")
    p.add_argument("--within-cmc", help="gap mode: within-modality CMC csv")
    p.add_argument("--baseline-cmc", help="gap mode: cross-modal baseline CMC csv")
    p.add_argument("--dpm-cmc", help="gap mode: cross-modal mapped CMC csv")
    p.add_argument("--descriptor", choices=["sift", "hog"])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="probe throughput measurement")
    common(p)
    p.add_argument("--gallery", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--descriptor", choices=["sift", "hog"])
    p.set_defaults(fn=cmd_bench)
    return parser


def _validate(args, parser) -> None:
    if args.command == "eval":
        if args.mode == "gap":
            missing = [f for f in ("within_cmc", "baseline_cmc", "dpm_cmc") if not getattr(args, f)]
            if missing:
                parser.error(f"gap mode requires --{missing[0].replace('_', '-')}")
        else:
            for f in ("gallery", "pca", "manifest", "out"):
                if not getattr(args, f):
                    parser.error(f"{args.mode} mode requires --{f}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
