"""Image loading, landmark alignment, and the preprocessing chain.

Images are 2-D float64 arrays indexed ``[y, x]`` (row-major), pixel
values nominally in [0, 1] after loading.  The chain applied before
feature extraction is: align to the canonical 110x150 crop, median
filter (thermal only, to kill dead pixels), zero-mean/unit-std
normalization, then a difference-of-Gaussians band-pass to suppress
illumination.  All filters use replicate borders so the tight crop does
not ring at its edges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ContractViolation, PgmFormatError, PgmParseError

CROP_WIDTH = 110
CROP_HEIGHT = 150

# canonical landmark targets in the crop frame, (x, y) pixels
TARGET_LEFT_EYE = (30.0, 45.0)
TARGET_RIGHT_EYE = (80.0, 45.0)
TARGET_MOUTH = (55.0, 120.0)


class Modality(enum.Enum):
    VISIBLE = "visible"
    THERMAL = "thermal"


@dataclass(frozen=True)
class Landmarks:
    """Eye and mouth centers, (x, y) pixels in the source image."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    mouth: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.left_eye, self.right_eye, self.mouth], dtype=np.float64)


@dataclass(frozen=True)
class PreprocParams:
    """Knobs of the preprocessing chain (all CLI-configurable)."""

    dog_sigma_inner: float = 1.0
    dog_sigma_outer: float = 2.0
    unit_std: bool = True


# ---------------------------------------------------------------------------
# PGM I/O (binary P5, 8-bit)


def load_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM file; pixels are scaled to [0, 1] by /255."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic != b"P5":
        raise PgmFormatError(f"{path}: unsupported PGM magic {magic!r}, need binary P5")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comment lines between header tokens
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise PgmParseError(f"{path}: malformed header token {token!r}")
        fields.append(int(token))
    if pos >= len(data):
        raise PgmParseError(f"{path}: header ends before pixel data")
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise PgmFormatError(f"{path}: unsupported maxval {maxval}, need 255")
    if width < 1 or height < 1:
        raise PgmParseError(f"{path}: bad dimensions {width}x{height}")
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise PgmParseError(
            f"{path}: truncated payload, expected {width * height} bytes, got {len(payload)}"
        )
    img = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return img.reshape(height, width)


def save_pgm(path, img: np.ndarray) -> None:
    """Write [0, 1] floats as binary 8-bit PGM (values clipped, rounded)."""
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


# ---------------------------------------------------------------------------
# Alignment


def estimate_similarity(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares similarity transform (rotation + uniform scale +
    translation, no reflection) mapping src points onto dst points.

    Returns the 2x3 matrix [[a, -b, tx], [b, a, ty]].  Solved in closed
    form: after centering both point sets, a and b are ratios of cross
    moments to the source spread, and the translation re-attaches the
    centroids.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    s = src - sc
    d = dst - dc
    denom = float(np.sum(s * s))
    if denom < 1e-12:
        raise AlignmentError("source landmarks are coincident")
    a = float(np.sum(s[:, 0] * d[:, 0] + s[:, 1] * d[:, 1])) / denom
    b = float(np.sum(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0])) / denom
    tx = dc[0] - (a * sc[0] - b * sc[1])
    ty = dc[1] - (b * sc[0] + a * sc[1])
    return np.array([[a, -b, tx], [b, a, ty]])


def _check_landmarks(lm: Landmarks) -> None:
    pts = lm.as_array()
    eye_dist = float(np.hypot(*(pts[1] - pts[0])))
    if eye_dist < 2.0:
        raise AlignmentError(f"eye distance {eye_dist:.3f} px below 2 px minimum")
    # twice the triangle area; collinear landmarks give no rotation cue
    v1 = pts[1] - pts[0]
    v2 = pts[2] - pts[0]
    area2 = abs(v1[0] * v2[1] - v1[1] * v2[0])
    if area2 < 1e-6:
        raise AlignmentError("landmarks are collinear")


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at float coords, replicate border."""
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def align_and_crop(img: np.ndarray, lm: Landmarks) -> np.ndarray:
    """Warp so the landmarks land on the canonical targets and crop to
    110x150.  Output pixel (x, y) is bilinearly sampled at the inverse
    similarity image location, replicating the border outside."""
    _check_landmarks(lm)
    targets = np.array([TARGET_LEFT_EYE, TARGET_RIGHT_EYE, TARGET_MOUTH])
    m = estimate_similarity(lm.as_array(), targets)
    a, b = m[0, 0], m[1, 0]
    scale2 = a * a + b * b
    if scale2 < 1e-12:
        raise AlignmentError("estimated transform collapses the image")
    # inverse of [[a,-b,tx],[b,a,ty]] is a similarity too
    ia = a / scale2
    ib = -b / scale2
    itx = -(ia * m[0, 2] - ib * m[1, 2])
    ity = -(ib * m[0, 2] + ia * m[1, 2])
    xs, ys = np.meshgrid(
        np.arange(CROP_WIDTH, dtype=np.float64), np.arange(CROP_HEIGHT, dtype=np.float64)
    )
    src_x = ia * xs - ib * ys + itx
    src_y = ib * xs + ia * ys + ity
    return _bilinear_sample(np.asarray(img, dtype=np.float64), src_x, src_y)


# ---------------------------------------------------------------------------
# Filters


def median_filter_3x3(img: np.ndarray) -> np.ndarray:
    """3x3 median with replicate border."""
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="edge")
    h, w = img.shape
    stack = np.empty((9, h, w))
    k = 0
    for dy in range(3):
        for dx in range(3):
            stack[k] = padded[dy : dy + h, dx : dx + w]
            k += 1
    return np.median(stack, axis=0)


def zero_mean_unit_std(img: np.ndarray) -> np.ndarray:
    """Subtract the mean and divide by the population std.  Inputs with
    std below 1e-12 are only mean-subtracted."""
    img = np.asarray(img, dtype=np.float64)
    out = img - img.mean()
    std = float(np.sqrt(np.mean(out * out)))
    if std >= 1e-12:
        out = out / std
    return out


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps, radius ceil(3*sigma), renormalized to sum 1."""
    if sigma <= 0:
        raise ContractViolation(f"sigma must be positive, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / np.sum(k)


def _conv1d_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate along one axis with replicate border; taps accumulate
    in index order so results are order-fixed."""
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img)
    n = img.shape[axis]
    for t, kt in enumerate(kernel):
        if axis == 0:
            out += kt * padded[t : t + n, :]
        else:
            out += kt * padded[:, t : t + n]
    return out


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing, replicate border."""
    kernel = gaussian_kernel(sigma)
    img = np.asarray(img, dtype=np.float64)
    return _conv1d_axis(_conv1d_axis(img, kernel, 0), kernel, 1)


def dog_filter(img: np.ndarray, sigma_inner: float, sigma_outer: float) -> np.ndarray:
    """Difference of Gaussians: smooth(inner) - smooth(outer)."""
    if not 0 < sigma_inner < sigma_outer:
        raise ContractViolation(
            f"need 0 < sigma_inner < sigma_outer, got {sigma_inner}, {sigma_outer}"
        )
    return gaussian_smooth(img, sigma_inner) - gaussian_smooth(img, sigma_outer)


def preprocess(
    img: np.ndarray,
    lm: Landmarks,
    modality: Modality,
    params: PreprocParams = PreprocParams(),
) -> np.ndarray:
    """Full chain: align/crop, thermal-only median filter, zero-mean
    (unit-std) normalization, DoG.  Output is always 110x150."""
    out = align_and_crop(img, lm)
    if modality is Modality.THERMAL:
        out = median_filter_3x3(out)
    if params.unit_std:
        out = zero_mean_unit_std(out)
    else:
        out = out - out.mean()
    return dog_filter(out, params.dog_sigma_inner, params.dog_sigma_outer)
