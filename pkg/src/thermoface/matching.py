"""Gallery construction and probe identification.

Enrollment side: visible images are preprocessed, densely described,
embedded, mapped through the network, concatenated in descriptor order
and L2-normalized into one long vector per image.  Probe side: thermal
images take the same path WITHOUT the network (the mapping moves the
gallery into the probes' space, so probes carry no per-query overhead).
Scoring a probe against the whole gallery is then a single
matrix-vector product of cosine similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import PcaModel, embed_image
from .errors import ContractViolation
from .features import GridSpec, extract_dense
from .network import DpmModel, map_batch
from .numerics import l2_normalize
from .preprocess import Landmarks, Modality, PreprocParams, preprocess

_ZERO_NORM = 1e-12


@dataclass
class GalleryIndex:
    """Row-major matrix of unit-norm gallery vectors plus labels.

    Rows whose source vector had (near-)zero norm are stored as zero and
    flagged, so degenerate enrollments score 0 instead of NaN.
    """

    vectors: np.ndarray
    labels: np.ndarray
    image_ids: np.ndarray
    zero_flags: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def subjects(self) -> np.ndarray:
        return np.unique(self.labels)


def build_gallery_index(
    vectors: np.ndarray, labels, image_ids
) -> GalleryIndex:
    """Normalize rows and flag the degenerate ones."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    image_ids = np.asarray(image_ids, dtype=np.int64)
    if vectors.ndim != 2 or vectors.shape[0] != len(labels) != len(image_ids):
        raise ContractViolation("vectors/labels/image_ids lengths disagree")
    norms = np.sqrt(np.sum(vectors * vectors, axis=1))
    flags = norms < _ZERO_NORM
    out = np.zeros_like(vectors)
    out[~flags] = vectors[~flags] / norms[~flags, None]
    return GalleryIndex(vectors=out, labels=labels, image_ids=image_ids, zero_flags=flags)


@dataclass
class MatchResult:
    """Per-subject ranking (best score first) and raw per-image scores."""

    ranking: list[tuple[int, float]]
    raw_scores: np.ndarray

    @property
    def best_subject(self) -> int:
        return self.ranking[0][0]


def encode_visible_gallery_image(
    img: np.ndarray,
    lm: Landmarks,
    pca: PcaModel,
    dpm: DpmModel,
    spec: GridSpec = GridSpec(),
    params: PreprocParams = PreprocParams(),
    kind: str = "sift",
) -> np.ndarray:
    """Mapped, concatenated, unit-norm enrollment vector of one visible
    image (length n_descriptors * embed_dim)."""
    crop = preprocess(img, lm, Modality.VISIBLE, params)
    ds = extract_dense(crop, spec, kind=kind)
    rows = embed_image(ds, pca, width=crop.shape[1], height=crop.shape[0])
    mapped = map_batch(dpm, rows)
    return l2_normalize(mapped.ravel())


def encode_visible_baseline_image(
    img: np.ndarray,
    lm: Landmarks,
    pca: PcaModel,
    spec: GridSpec = GridSpec(),
    params: PreprocParams = PreprocParams(),
    kind: str = "sift",
) -> np.ndarray:
    """Same as enrollment but without the network: the no-mapping
    baseline the mapped pipeline is compared against."""
    crop = preprocess(img, lm, Modality.VISIBLE, params)
    ds = extract_dense(crop, spec, kind=kind)
    rows = embed_image(ds, pca, width=crop.shape[1], height=crop.shape[0])
    return l2_normalize(rows.ravel())


def encode_thermal_probe(
    img: np.ndarray,
    lm: Landmarks,
    pca: PcaModel,
    spec: GridSpec = GridSpec(),
    params: PreprocParams = PreprocParams(),
    kind: str = "sift",
) -> np.ndarray:
    """Probe vector: embedded descriptors concatenated directly, no
    network mapping, unit-normalized."""
    crop = preprocess(img, lm, Modality.THERMAL, params)
    ds = extract_dense(crop, spec, kind=kind)
    rows = embed_image(ds, pca, width=crop.shape[1], height=crop.shape[0])
    return l2_normalize(rows.ravel())


def score_all(gallery: GalleryIndex, probe: np.ndarray) -> np.ndarray:
    """Cosine scores of one probe against every gallery row: one
    matrix-vector product (rows and probe are already unit norm)."""
    probe = np.asarray(probe, dtype=np.float64)
    if probe.shape != (gallery.dim,):
        raise ContractViolation(f"probe shape {probe.shape} != ({gallery.dim},)")
    return gallery.vectors @ probe


def identify(gallery: GalleryIndex, probe: np.ndarray) -> MatchResult:
    """Rank subjects by their best gallery-image score (max fusion);
    exact ties break toward the lower subject identifier."""
    if len(gallery) < 1:
        raise ContractViolation("empty gallery")
    scores = score_all(gallery, probe)
    best: dict[int, float] = {}
    for label, s in zip(gallery.labels, scores):
        label = int(label)
        s = float(s)
        if label not in best or s > best[label]:
            best[label] = s
    ranking = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return MatchResult(ranking=ranking, raw_scores=scores)
