"""End-to-end orchestration shared by the CLI and the test harness:
training-data assembly, model fitting, gallery construction, and probe
encoding from dataset manifests."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .embedding import PcaModel, embed_image, pca_fit
from .errors import ManifestError
from .features import DescriptorSet, RawDescriptor, dense_grid, extract_dense
from .manifest import ManifestEntry, read_manifest
from .matching import (
    GalleryIndex,
    build_gallery_index,
    encode_thermal_probe,
    encode_visible_baseline_image,
    encode_visible_gallery_image,
)
from .network import DpmModel, TrainReport, train
from .numerics import Rng, derive_seed, l2_normalize
from .preprocess import CROP_HEIGHT, CROP_WIDTH, Modality, load_pgm, preprocess


def _run_parallel(fn, items, threads: int):
    """Order-preserving map, optionally across a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _embedded_rows(entry: ManifestEntry, cfg: RunConfig, pca: PcaModel) -> np.ndarray:
    img = load_pgm(entry.path)
    crop = preprocess(img, entry.landmarks, entry.modality, cfg.preproc_params())
    ds = extract_dense(crop, cfg.grid_spec(), kind=cfg.descriptor)
    return embed_image(ds, pca, width=crop.shape[1], height=crop.shape[0])


def _descriptor_matrix(entry: ManifestEntry, cfg: RunConfig) -> np.ndarray:
    img = load_pgm(entry.path)
    crop = preprocess(img, entry.landmarks, entry.modality, cfg.preproc_params())
    return extract_dense(crop, cfg.grid_spec(), kind=cfg.descriptor).values_matrix()


def paired_entries(entries: list[ManifestEntry]) -> list[tuple[ManifestEntry, ManifestEntry]]:
    """(visible, thermal) entry pairs by pair_id, sorted by pair_id."""
    by_pair: dict[int, dict[Modality, ManifestEntry]] = {}
    for e in entries:
        slot = by_pair.setdefault(e.pair_id, {})
        if e.modality in slot:
            raise ManifestError(f"duplicate {e.modality.value} entry for pair {e.pair_id}")
        slot[e.modality] = e
    pairs = []
    for pair_id in sorted(by_pair):
        slot = by_pair[pair_id]
        if Modality.VISIBLE not in slot or Modality.THERMAL not in slot:
            raise ManifestError(f"pair {pair_id} lacks a visible/thermal counterpart")
        pairs.append((slot[Modality.VISIBLE], slot[Modality.THERMAL]))
    return pairs


def fit_models(
    cfg: RunConfig, train_manifest, threads: int = 1
) -> tuple[PcaModel, DpmModel, TrainReport]:
    """Fit the shared PCA and train the mapping network on corresponding
    patch pairs from identity-matched image pairs."""
    entries = read_manifest(train_manifest)
    pairs = paired_entries(entries)
    if not pairs:
        raise ManifestError(f"{train_manifest}: no usable visible/thermal pairs")
    flat = [e for pair in pairs for e in pair]
    matrices = _run_parallel(lambda e: _descriptor_matrix(e, cfg), flat, threads)
    pool = np.vstack(matrices)
    pca = pca_fit(
        pool,
        out_dim=cfg.pca_dim,
        rng=Rng(derive_seed(cfg.seed, 0xDA7A)),
        max_sample=cfg.max_train_vectors,
    )
    # corresponding patches pair by identical grid index within a pair_id
    vis_rows = [_embed_from_matrix(m, cfg, pca) for m in matrices[0::2]]
    thr_rows = [_embed_from_matrix(m, cfg, pca) for m in matrices[1::2]]
    x = np.vstack(vis_rows)
    t = np.vstack(thr_rows)
    if cfg.map_direction == "thermal_to_visible":
        x, t = t, x
    model, report = train(cfg.dpm_config(input_dim=x.shape[1]), x, t)
    return pca, model, report


def _embed_from_matrix(values: np.ndarray, cfg: RunConfig, pca: PcaModel) -> np.ndarray:
    """Embed a precomputed descriptor matrix (avoids re-extracting)."""
    spec = cfg.grid_spec()
    origins = dense_grid(CROP_WIDTH, CROP_HEIGHT, spec)
    half = spec.block / 2.0
    ds = DescriptorSet(image_id="")
    i = 0
    for si in range(len(spec.scales)):
        for x, y in origins:
            ds.descriptors.append(
                RawDescriptor(center=(x + half, y + half), scale_index=si, values=values[i])
            )
            i += 1
    return embed_image(ds, pca, width=CROP_WIDTH, height=CROP_HEIGHT)


def select_gallery_entries(
    entries: list[ManifestEntry], modality: Modality, policy: str
) -> list[ManifestEntry]:
    """Per-subject image selection: first 1, first 2, or all images of
    the requested modality, in (subject, pair_id) order."""
    limits = {"one": 1, "two": 2, "all": None}
    if policy not in limits:
        raise ManifestError(f"unknown gallery policy {policy!r}")
    per_subject: dict[int, list[ManifestEntry]] = {}
    for e in sorted(entries, key=lambda e: (e.subject, e.pair_id)):
        if e.modality is modality:
            per_subject.setdefault(e.subject, []).append(e)
    limit = limits[policy]
    selected = []
    for subject in sorted(per_subject):
        chosen = per_subject[subject] if limit is None else per_subject[subject][:limit]
        selected.extend(chosen)
    return selected


def build_gallery(
    cfg: RunConfig,
    manifest,
    pca: PcaModel,
    dpm: DpmModel | None,
    policy: str = "one",
    modality: Modality = Modality.VISIBLE,
    threads: int = 1,
) -> GalleryIndex:
    """Encode the selected images into a gallery index.

    ``dpm=None`` gives the no-mapping baseline.  Thermal galleries (for
    within-modality protocols) are always unmapped.
    """
    entries = select_gallery_entries(read_manifest(manifest), modality, policy)
    if not entries:
        raise ManifestError(f"{manifest}: no {modality.value} images to enroll")

    def encode(e: ManifestEntry) -> np.ndarray:
        img = load_pgm(e.path)
        if modality is Modality.THERMAL:
            return encode_thermal_probe(
                img, e.landmarks, pca, cfg.grid_spec(), cfg.preproc_params(), cfg.descriptor
            )
        if dpm is None:
            return encode_visible_baseline_image(
                img, e.landmarks, pca, cfg.grid_spec(), cfg.preproc_params(), cfg.descriptor
            )
        return encode_visible_gallery_image(
            img, e.landmarks, pca, dpm, cfg.grid_spec(), cfg.preproc_params(), cfg.descriptor
        )

    vectors = np.stack(_run_parallel(encode, entries, threads))
    labels = [e.subject for e in entries]
    image_ids = [e.pair_id for e in entries]
    return build_gallery_index(vectors, labels, image_ids)


def encode_probes(
    cfg: RunConfig,
    manifest,
    pca: PcaModel,
    modality: Modality = Modality.THERMAL,
    exclude_pair_ids: set[int] | None = None,
    threads: int = 1,
) -> list[tuple[np.ndarray, int, int]]:
    """(vector, subject, pair_id) per probe image, manifest order.
    Probe-side encoding never applies the mapping network."""
    entries = [e for e in read_manifest(manifest) if e.modality is modality]
    if exclude_pair_ids:
        entries = [e for e in entries if e.pair_id not in exclude_pair_ids]
    if not entries:
        raise ManifestError(f"{manifest}: no {modality.value} probe images")

    def encode(e: ManifestEntry) -> np.ndarray:
        img = load_pgm(e.path)
        crop = preprocess(img, e.landmarks, modality, cfg.preproc_params())
        ds = extract_dense(crop, cfg.grid_spec(), kind=cfg.descriptor)
        rows = embed_image(ds, pca, width=crop.shape[1], height=crop.shape[0])
        return l2_normalize(rows.ravel())

    vectors = _run_parallel(encode, entries, threads)
    return [(v, e.subject, e.pair_id) for v, e in zip(vectors, entries)]


def write_train_report_csv(report: TrainReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, value in enumerate(report.epoch_losses, start=1):
            fh.write(f"{epoch},{value:.10g}\n")


def read_rank1_from_cmc_csv(path) -> float:
    """Rank-1 accuracy (percent) from a rank,accuracy CSV."""
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 2 or not lines[0].startswith("rank,"):
        raise ManifestError(f"{path}: not a CMC csv")
    first = lines[1].split(",")
    return float(first[1]) * 100.0
