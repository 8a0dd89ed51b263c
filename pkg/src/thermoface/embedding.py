"""PCA reduction of raw descriptors plus block-position channels.

One PCA is fitted on descriptors pooled from BOTH modalities' training
images, so network inputs and regression targets live in a single
coordinate system.  No whitening.  Each projected descriptor is extended
with the block center offset from the image center, normalized by the
image half-extent to [-1, 1], giving the 66-d vectors the mapping
network consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, FitError
from .features import DescriptorSet
from .numerics import Rng, gemv

PCA_OUT_DIM = 64
EMBED_DIM = PCA_OUT_DIM + 2
MAX_FIT_SAMPLE = 1_000_000


@dataclass(frozen=True)
class PcaModel:
    """mean (in_dim,), basis rows = principal directions (out_dim, in_dim),
    eigenvalues non-increasing (out_dim,)."""

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def out_dim(self) -> int:
        return self.basis.shape[0]


def pca_fit(
    sample: np.ndarray,
    out_dim: int = PCA_OUT_DIM,
    rng: Rng | None = None,
    max_sample: int = MAX_FIT_SAMPLE,
) -> PcaModel:
    """Fit PCA on a (n, in_dim) sample of raw descriptors.

    Pools larger than ``max_sample`` are first subsampled uniformly with
    ``rng``.  The basis holds the top eigenvectors of the sample
    covariance (ddof=1), each row sign-fixed so its largest-magnitude
    entry is positive.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise ContractViolation(f"sample must be 2-D, got shape {sample.shape}")
    n, in_dim = sample.shape
    if n < out_dim:
        raise FitError(f"need at least {out_dim} sample vectors, got {n}")
    if n > max_sample:
        if rng is None:
            raise ContractViolation("subsampling requires an rng")
        sample = sample[np.sort(rng.sample_indices(n, max_sample))]
        n = max_sample
    mean = sample.mean(axis=0)
    centered = sample - mean
    cov = centered.T @ centered / (n - 1)
    if float(np.trace(cov)) < 1e-18:
        raise FitError("sample has zero variance")
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:out_dim]
    eigvals = eigvals[order]
    basis = eigvecs[:, order].T.copy()
    # deterministic sign: largest-|entry| of each row made positive
    for row in basis:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(mean=mean, basis=basis, eigenvalues=eigvals)


def pca_apply(model: PcaModel, d: np.ndarray) -> np.ndarray:
    """Project one raw descriptor: basis @ (d - mean)."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (model.in_dim,):
        raise ContractViolation(f"descriptor shape {d.shape} != ({model.in_dim},)")
    return gemv(model.basis, d - model.mean)


def embed_image(
    ds: DescriptorSet,
    model: PcaModel,
    width: int = 110,
    height: int = 150,
) -> np.ndarray:
    """Patch matrix (n, out_dim+2): per descriptor, PCA coefficients and
    the block center offset from the image center in half-extent units.
    Row order equals descriptor-set order."""
    values = ds.values_matrix()
    if values.shape[1] != model.in_dim:
        raise ContractViolation(
            f"descriptor dim {values.shape[1]} != PCA input dim {model.in_dim}"
        )
    coeffs = (values - model.mean) @ model.basis.T
    centers = ds.centers()
    nx = (centers[:, 0] - width / 2.0) / (width / 2.0)
    ny = (centers[:, 1] - height / 2.0) / (height / 2.0)
    return np.hstack([coeffs, nx[:, None], ny[:, None]])
