"""Dense gradient-histogram descriptors on an overlapping block grid.

Blocks of ``block x block`` pixels are placed every ``stride`` pixels,
once per smoothing scale.  Each block yields an upright SIFT-style
descriptor: 4x4 spatial cells x 8 orientation bins, votes weighted by
gradient magnitude and a Gaussian window (sigma = block/2) over the
block, linear interpolation between the two nearest orientation bin
centers, no spatial interpolation.  The 128-vector is L2-normalized,
clipped at 0.2 and renormalized.  No dominant-orientation estimation:
faces are aligned, and cross-modal patch correspondence needs a shared
frame.

Descriptor order within an image is total and fixed: scale-major, then
row-major by block origin (y outer, x inner).  For the default grid on
the 110x150 crop this gives 12*17 = 204 blocks per scale, 408 total.

An unsigned-orientation HOG variant (2x2 cells x 9 bins, 36-d) is
available behind the same interface; it is not the default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractViolation
from .preprocess import gaussian_smooth

SIFT_DIM = 128
HOG_DIM = 36
_CLIP = 0.2
_ZERO_NORM_GUARD = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Dense sampling grid: block size, stride, and smoothing scales."""

    block: int = 20
    stride: int = 8
    scales: tuple[float, ...] = (0.6, 1.0)

    def __post_init__(self):
        if self.block < 1 or self.stride < 1:
            raise ContractViolation("block and stride must be >= 1")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ContractViolation("scales must be non-empty and positive")


@dataclass(frozen=True)
class RawDescriptor:
    center: tuple[float, float]
    scale_index: int
    values: np.ndarray


@dataclass
class DescriptorSet:
    image_id: str
    descriptors: list[RawDescriptor] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.descriptors)

    def values_matrix(self) -> np.ndarray:
        """Descriptor values stacked in set order, shape (n, dim)."""
        return np.stack([d.values for d in self.descriptors])

    def centers(self) -> np.ndarray:
        return np.array([d.center for d in self.descriptors])


def dense_grid(width: int, height: int, spec: GridSpec) -> list[tuple[int, int]]:
    """Block origins (x, y), row-major (y outer), for one scale."""
    if spec.block > width or spec.block > height:
        raise ContractViolation(
            f"block {spec.block} exceeds image {width}x{height}"
        )
    xs = range(0, width - spec.block + 1, spec.stride)
    ys = range(0, height - spec.block + 1, spec.stride)
    return [(x, y) for y in ys for x in xs]


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicate border at the image edge."""
    p = np.pad(np.asarray(img, dtype=np.float64), 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) * 0.5
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) * 0.5
    return gx, gy


def _gauss_window(block: int) -> np.ndarray:
    """Isotropic Gaussian weights, sigma = block/2, centered on the
    block's geometric center (block-1)/2."""
    sigma = block / 2.0
    c = (block - 1) / 2.0
    xs = np.arange(block, dtype=np.float64) - c
    d2 = xs[:, None] ** 2 + xs[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def _cell_map(block: int, cells: int) -> np.ndarray:
    """Per-pixel cell index (row-major cells) for a block."""
    if block % cells:
        raise ContractViolation(f"block {block} not divisible into {cells} cells")
    side = block // cells
    idx = np.arange(block) // side
    return (idx[:, None] * cells + idx[None, :]).astype(np.int64)


def _orientation_votes(
    gx: np.ndarray, gy: np.ndarray, nbins: int, unsigned: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split each pixel's vote between the two nearest bin centers
    (centers at b * period/nbins).  Returns (bin0, w0, bin1, w1) where
    w0 + w1 = gradient magnitude."""
    mag = np.sqrt(gx * gx + gy * gy)
    theta = np.arctan2(gy, gx)
    period = np.pi if unsigned else 2.0 * np.pi
    theta = np.mod(theta, period)
    t = theta / (period / nbins)
    b0 = np.floor(t).astype(np.int64) % nbins
    frac = t - np.floor(t)
    b1 = (b0 + 1) % nbins
    return b0, mag * (1.0 - frac), b1, mag * frac


def _clip_renormalize(hist: np.ndarray) -> np.ndarray:
    """L2-normalize, clip at 0.2, renormalize; zero vector stays zero.
    Works on a single histogram or a batch of row histograms."""
    hist = np.atleast_2d(hist)
    norms = np.sqrt(np.sum(hist * hist, axis=1, keepdims=True))
    ok = norms[:, 0] >= _ZERO_NORM_GUARD
    out = np.zeros_like(hist)
    out[ok] = hist[ok] / norms[ok]
    np.minimum(out, _CLIP, out=out)
    norms2 = np.sqrt(np.sum(out * out, axis=1, keepdims=True))
    out[ok] = out[ok] / norms2[ok]
    return out


def _block_histogram(
    gx_win: np.ndarray,
    gy_win: np.ndarray,
    cells: int,
    nbins: int,
    unsigned: bool,
    gauss: np.ndarray | None,
) -> np.ndarray:
    block = gx_win.shape[0]
    cell = _cell_map(block, cells)
    b0, w0, b1, w1 = _orientation_votes(gx_win, gy_win, nbins, unsigned)
    if gauss is not None:
        w0 = w0 * gauss
        w1 = w1 * gauss
    dim = cells * cells * nbins
    hist = np.bincount((cell * nbins + b0).ravel(), weights=w0.ravel(), minlength=dim)
    hist += np.bincount((cell * nbins + b1).ravel(), weights=w1.ravel(), minlength=dim)
    return hist


def sift_descriptor(img: np.ndarray, origin: tuple[int, int], block: int) -> np.ndarray:
    """128-d descriptor of the block at ``origin`` (x, y).  Gradients
    come from the full image, so block content at the window border is
    differentiated against its true neighbors."""
    x, y = origin
    h, w = img.shape
    if x < 0 or y < 0 or x + block > w or y + block > h:
        raise ContractViolation(f"block at {origin} size {block} outside {w}x{h}")
    gx, gy = _gradients(img)
    hist = _block_histogram(
        gx[y : y + block, x : x + block],
        gy[y : y + block, x : x + block],
        cells=4,
        nbins=8,
        unsigned=False,
        gauss=_gauss_window(block),
    )
    return _clip_renormalize(hist)[0]


def hog_descriptor(img: np.ndarray, origin: tuple[int, int], block: int) -> np.ndarray:
    """36-d unsigned-orientation descriptor (2x2 cells x 9 bins)."""
    x, y = origin
    h, w = img.shape
    if x < 0 or y < 0 or x + block > w or y + block > h:
        raise ContractViolation(f"block at {origin} size {block} outside {w}x{h}")
    gx, gy = _gradients(img)
    hist = _block_histogram(
        gx[y : y + block, x : x + block],
        gy[y : y + block, x : x + block],
        cells=2,
        nbins=9,
        unsigned=True,
        gauss=None,
    )
    return _clip_renormalize(hist)[0]


def _extract_scale(
    img: np.ndarray, spec: GridSpec, kind: str
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """All block histograms of one (already smoothed) image at once.

    Votes are accumulated per block through a single bincount over
    block-offset flat indices; within each block the pixel order matches
    the per-block path, so the result is bit-identical to calling
    :func:`sift_descriptor` block by block.
    """
    h, w = img.shape
    origins = dense_grid(w, h, spec)
    if kind == "sift":
        cells, nbins, unsigned, gauss = 4, 8, False, _gauss_window(spec.block)
    elif kind == "hog":
        cells, nbins, unsigned, gauss = 2, 9, True, None
    else:
        raise ContractViolation(f"unknown descriptor kind {kind!r}")
    dim = cells * cells * nbins
    gx, gy = _gradients(img)
    b0, w0, b1, w1 = _orientation_votes(gx, gy, nbins, unsigned)
    if gauss is None:
        gauss = np.ones((spec.block, spec.block))
    cell = _cell_map(spec.block, cells)

    def windows(a: np.ndarray) -> np.ndarray:
        v = sliding_window_view(a, (spec.block, spec.block))[:: spec.stride, :: spec.stride]
        return v.reshape(-1, spec.block, spec.block)

    nb = len(origins)
    idx0 = cell[None, :, :] * nbins + windows(b0)
    idx1 = cell[None, :, :] * nbins + windows(b1)
    offs = (np.arange(nb, dtype=np.int64) * dim)[:, None, None]
    flat0 = (idx0 + offs).ravel()
    flat1 = (idx1 + offs).ravel()
    vw0 = (windows(w0) * gauss[None, :, :]).ravel()
    vw1 = (windows(w1) * gauss[None, :, :]).ravel()
    hists = np.bincount(flat0, weights=vw0, minlength=nb * dim)
    hists += np.bincount(flat1, weights=vw1, minlength=nb * dim)
    return _clip_renormalize(hists.reshape(nb, dim)), origins


def extract_dense(
    img: np.ndarray,
    spec: GridSpec = GridSpec(),
    kind: str = "sift",
    image_id: str = "",
) -> DescriptorSet:
    """Dense descriptors of a preprocessed crop, scale-major then
    row-major by block origin."""
    img = np.asarray(img, dtype=np.float64)
    ds = DescriptorSet(image_id=image_id)
    for si, sigma in enumerate(spec.scales):
        smoothed = gaussian_smooth(img, sigma)
        hists, origins = _extract_scale(smoothed, spec, kind)
        half = spec.block / 2.0
        for (x, y), values in zip(origins, hists):
            ds.descriptors.append(
                RawDescriptor(center=(x + half, y + half), scale_index=si, values=values)
            )
    return ds
