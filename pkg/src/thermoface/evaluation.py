"""Closed-set identification (CMC), verification (ROC), and the
modality-gap summary.

A probe set is a list of (vector, true subject) pairs.  CMC rank r is
the fraction of probes whose true subject appears within the top r of
the per-subject ranking.  Verification treats every (probe, gallery
image) pair as one attempt, genuine iff the subjects match, and sweeps
the decision threshold over the distinct scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError
from .matching import GalleryIndex, identify, score_all


@dataclass
class CmcCurve:
    """accuracies[r-1] = fraction of probes correct within rank r."""

    accuracies: np.ndarray

    @property
    def rank1(self) -> float:
        return float(self.accuracies[0])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("rank,accuracy\n")
            for r, a in enumerate(self.accuracies, start=1):
                fh.write(f"{r},{a:.10g}\n")


@dataclass
class RocCurve:
    """Operating points (threshold, FPR, TPR) for accept-iff-score>=t,
    thresholds ascending from -inf to +inf."""

    points: list[tuple[float, float, float]]
    n_genuine: int
    n_impostor: int

    def auc(self) -> float:
        fpr = np.array([p[1] for p in self.points])
        tpr = np.array([p[2] for p in self.points])
        order = np.argsort(fpr)
        return float(np.trapezoid(tpr[order], fpr[order]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("threshold,fpr,tpr\n")
            for t, fpr, tpr in self.points:
                fh.write(f"{t:.10g},{fpr:.10g},{tpr:.10g}\n")


@dataclass
class GapReport:
    """How much of the within-modality vs cross-modality rank-1 drop the
    mapping recovers.  All values are percentages."""

    rank1_within_modality: float
    rank1_cross_baseline: float
    rank1_cross_dpm: float
    gap_bridged_percent: float

    def to_text(self) -> str:
        return (
            f"rank1_within_modality={self.rank1_within_modality:.4g}\n"
            f"rank1_cross_baseline={self.rank1_cross_baseline:.4g}\n"
            f"rank1_cross_dpm={self.rank1_cross_dpm:.4g}\n"
            f"gap_bridged_percent={self.gap_bridged_percent:.4g}\n"
        )


def cmc(gallery: GalleryIndex, probes: list[tuple[np.ndarray, int]]) -> CmcCurve:
    """Cumulative match curve over ranks 1..#subjects."""
    enrolled = set(int(s) for s in gallery.subjects)
    missing = [i for i, (_, subj) in enumerate(probes) if int(subj) not in enrolled]
    if missing:
        raise ProtocolError(f"probe subjects not enrolled (probe indices {missing})")
    if not probes:
        raise ProtocolError("no probes")
    n_subjects = len(enrolled)
    hits = np.zeros(n_subjects)
    for vec, subj in probes:
        ranking = identify(gallery, vec).ranking
        rank = next(i for i, (s, _) in enumerate(ranking) if s == int(subj))
        hits[rank] += 1
    return CmcCurve(accuracies=np.cumsum(hits) / len(probes))


def roc_points(scores: np.ndarray, genuine: np.ndarray) -> RocCurve:
    """ROC from precomputed attempt scores and genuine/impostor flags."""
    scores = np.asarray(scores, dtype=np.float64)
    genuine = np.asarray(genuine, dtype=bool)
    n_gen = int(genuine.sum())
    n_imp = int((~genuine).sum())
    if n_imp == 0:
        raise ProtocolError("no impostor attempts")
    if n_gen == 0:
        raise ProtocolError("no genuine attempts")
    gen_sorted = np.sort(scores[genuine])
    imp_sorted = np.sort(scores[~genuine])
    thresholds = np.unique(scores)
    points = [(-np.inf, 1.0, 1.0)]
    for t in thresholds:
        # accepted = attempts with score >= t
        tpr = (n_gen - np.searchsorted(gen_sorted, t, side="left")) / n_gen
        fpr = (n_imp - np.searchsorted(imp_sorted, t, side="left")) / n_imp
        points.append((float(t), float(fpr), float(tpr)))
    points.append((np.inf, 0.0, 0.0))
    return RocCurve(points=points, n_genuine=n_gen, n_impostor=n_imp)


def roc(gallery: GalleryIndex, probes: list[tuple[np.ndarray, int]]) -> RocCurve:
    """Verification over all (probe, gallery image) attempts."""
    if len(gallery.subjects) < 2:
        raise ProtocolError("verification needs at least 2 subjects")
    all_scores = []
    all_genuine = []
    for vec, subj in probes:
        all_scores.append(score_all(gallery, vec))
        all_genuine.append(gallery.labels == int(subj))
    return roc_points(np.concatenate(all_scores), np.concatenate(all_genuine))


def modality_gap_report(
    rank1_within: float, rank1_cross_baseline: float, rank1_cross_dpm: float
) -> GapReport:
    """bridged = (dpm - baseline) / (within - baseline), as a percent."""
    if rank1_within <= rank1_cross_baseline:
        raise ProtocolError(
            f"no gap to bridge: within {rank1_within} <= baseline {rank1_cross_baseline}"
        )
    bridged = (rank1_cross_dpm - rank1_cross_baseline) / (rank1_within - rank1_cross_baseline)
    return GapReport(
        rank1_within_modality=rank1_within,
        rank1_cross_baseline=rank1_cross_baseline,
        rank1_cross_dpm=rank1_cross_dpm,
        gap_bridged_percent=100.0 * bridged,
    )
