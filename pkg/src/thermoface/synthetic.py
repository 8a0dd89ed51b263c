"""Seeded synthetic paired-modality face dataset plus brute-force
matching oracles.

Each subject is a parametric face-like texture: a soft-edged head
ellipse with eye/mouth/nose features, a few identity blobs, and a
per-subject mix of sinusoidal gratings.  Per-image variation is a small
similarity jitter plus brightness/contrast changes, applied by
evaluating the face function through the inverse jitter so landmark
positions stay exact by construction.  The "thermal" counterpart of an
image is a deterministic degradation of the same rendering: pixelwise
gamma, Gaussian blur, downsample/upsample pixelation, additive noise.
With all four knobs at identity the two modalities are byte-identical,
which pins the transform's plumbing.

Subjects are split train/test disjointly.  All randomness derives from
one seed through per-stream SplitMix64 children, so a spec+seed pair
reproduces the dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .manifest import write_manifest
from .numerics import Rng, derive_seed
from .preprocess import gaussian_smooth, save_pgm


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 40
    images_per_subject: int = 4
    train_fraction: float = 0.5
    gamma: float = 0.25
    blur_sigma: float = 3.0
    downsample: int = 2
    noise_sigma: float = 0.008
    width: int = 130
    height: int = 170
    seed: int = 42

    def __post_init__(self):
        if self.n_subjects < 2 or self.images_per_subject < 1:
            raise ContractViolation("need >= 2 subjects and >= 1 image each")
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractViolation("train_fraction must be in (0, 1)")
        if self.blur_sigma < 0 or self.noise_sigma < 0 or self.downsample < 1:
            raise ContractViolation("degradation parameters out of range")
        if self.gamma <= 0:
            raise ContractViolation("gamma must be positive")


@dataclass
class SynthDataset:
    out_dir: Path
    rows: list[dict] = field(default_factory=list)
    train_subjects: list[int] = field(default_factory=list)
    test_subjects: list[int] = field(default_factory=list)

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / "manifest.csv"

    @property
    def train_manifest_path(self) -> Path:
        return self.out_dir / "manifest_train.csv"

    @property
    def test_manifest_path(self) -> Path:
        return self.out_dir / "manifest_test.csv"


def _soft_ellipse(u, v, cx, cy, ax, ay, softness=0.12):
    """1 inside the ellipse, 0 outside, smooth ramp at the boundary."""
    r2 = ((u - cx) / ax) ** 2 + ((v - cy) / ay) ** 2
    exponent = np.clip((r2 - 1.0) / softness, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(exponent))


@dataclass
class _SubjectParams:
    background: float
    head: tuple[float, float, float, float, float]  # cx, cy, ax, ay, level
    eye_dx: float
    eye_y: float
    eye_r: tuple[float, float]
    eye_level: float
    mouth: tuple[float, float, float, float, float]
    nose: tuple[float, float, float, float, float]
    blobs: list[tuple[float, float, float, float]]  # cx, cy, radius, amp
    waves: list[tuple[float, float, float, float]]  # amp, fx, fy, phase


def _draw_subject(rng: Rng, width: int, height: int) -> _SubjectParams:
    cx = width / 2.0 + float(rng.uniform(-3, 3, 1)[0])
    cy = height / 2.0 + float(rng.uniform(-3, 3, 1)[0])
    ax = width * float(rng.uniform(0.30, 0.36, 1)[0])
    ay = height * float(rng.uniform(0.33, 0.40, 1)[0])
    head_level = float(rng.uniform(0.55, 0.75, 1)[0])
    eye_dx = width * float(rng.uniform(0.13, 0.17, 1)[0])
    eye_y = cy - height * float(rng.uniform(0.10, 0.14, 1)[0])
    eye_r = (
        width * float(rng.uniform(0.035, 0.055, 1)[0]),
        height * float(rng.uniform(0.02, 0.035, 1)[0]),
    )
    eye_level = float(rng.uniform(0.05, 0.2, 1)[0])
    mouth = (
        cx + float(rng.uniform(-2, 2, 1)[0]),
        cy + height * float(rng.uniform(0.16, 0.22, 1)[0]),
        width * float(rng.uniform(0.08, 0.13, 1)[0]),
        height * float(rng.uniform(0.02, 0.04, 1)[0]),
        float(rng.uniform(0.15, 0.35, 1)[0]),
    )
    nose = (
        cx + float(rng.uniform(-1.5, 1.5, 1)[0]),
        cy + height * float(rng.uniform(0.02, 0.06, 1)[0]),
        width * float(rng.uniform(0.025, 0.045, 1)[0]),
        height * float(rng.uniform(0.05, 0.09, 1)[0]),
        head_level + float(rng.uniform(0.08, 0.18, 1)[0]),
    )
    blobs = []
    for _ in range(3):
        blobs.append(
            (
                cx + width * float(rng.uniform(-0.22, 0.22, 1)[0]),
                cy + height * float(rng.uniform(-0.28, 0.28, 1)[0]),
                float(rng.uniform(4.0, 9.0, 1)[0]),
                float(rng.uniform(-0.16, 0.16, 1)[0]),
            )
        )
    waves = []
    for _ in range(6):
        waves.append(
            (
                float(rng.uniform(0.02, 0.06, 1)[0]),
                float(rng.uniform(-0.25, 0.25, 1)[0]),
                float(rng.uniform(-0.25, 0.25, 1)[0]),
                float(rng.uniform(0.0, 2.0 * np.pi, 1)[0]),
            )
        )
    return _SubjectParams(
        background=float(rng.uniform(0.10, 0.22, 1)[0]),
        head=(cx, cy, ax, ay, head_level),
        eye_dx=eye_dx,
        eye_y=eye_y,
        eye_r=eye_r,
        eye_level=eye_level,
        mouth=mouth,
        nose=nose,
        blobs=blobs,
        waves=waves,
    )


def _render(p: _SubjectParams, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Evaluate the face function at face-frame coordinates (u, v)."""
    cx, cy, ax, ay, head_level = p.head
    img = np.full(u.shape, p.background)
    head = _soft_ellipse(u, v, cx, cy, ax, ay)
    r2 = ((u - cx) / ax) ** 2 + ((v - cy) / ay) ** 2
    shading = head_level * (1.0 - 0.25 * np.clip(r2, 0.0, 1.0))
    texture = np.zeros_like(u)
    for amp, fx, fy, phase in p.waves:
        texture += amp * np.sin(2.0 * np.pi * (fx * u + fy * v) + phase)
    img += head * (shading + texture - p.background)
    for bx, by, br, bamp in p.blobs:
        img += head * bamp * np.exp(-((u - bx) ** 2 + (v - by) ** 2) / (2.0 * br * br))
    nx, ny, nax, nay, nlevel = p.nose
    nose = _soft_ellipse(u, v, nx, ny, nax, nay, softness=0.2)
    img = img * (1.0 - nose) + nose * nlevel
    for ex in (cx - p.eye_dx, cx + p.eye_dx):
        eye = _soft_ellipse(u, v, ex, p.eye_y, p.eye_r[0], p.eye_r[1], softness=0.08)
        img = img * (1.0 - eye) + eye * p.eye_level
    mx, my, max_, may, mlevel = p.mouth
    mouth = _soft_ellipse(u, v, mx, my, max_, may, softness=0.08)
    img = img * (1.0 - mouth) + mouth * mlevel
    return img


def _downsample_upsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean downsample then nearest-neighbor upsample (pixelation).
    Edges replicate when dimensions are not multiples of the factor."""
    if factor == 1:
        return img
    h, w = img.shape
    ph = (-h) % factor
    pw = (-w) % factor
    padded = np.pad(img, ((0, ph), (0, pw)), mode="edge")
    hh, ww = padded.shape
    small = padded.reshape(hh // factor, factor, ww // factor, factor).mean(axis=(1, 3))
    big = np.repeat(np.repeat(small, factor, axis=0), factor, axis=1)
    return big[:h, :w]


def modality_transform(img: np.ndarray, spec: SynthSpec, noise_rng: Rng | None) -> np.ndarray:
    """Visible -> thermal degradation: gamma, blur, pixelation, noise."""
    out = np.clip(img, 0.0, 1.0)
    if spec.gamma != 1.0:
        out = out**spec.gamma
    if spec.blur_sigma > 0.0:
        out = gaussian_smooth(out, spec.blur_sigma)
    out = _downsample_upsample(out, spec.downsample)
    if spec.noise_sigma > 0.0:
        if noise_rng is None:
            raise ContractViolation("noise requires an rng")
        noise = noise_rng.normal(spec.noise_sigma, out.size).reshape(out.shape)
        out = out + noise
    return np.clip(out, 0.0, 1.0)


def generate(spec: SynthSpec, out_dir) -> SynthDataset:
    """Write PGM images and manifests; returns the dataset description.

    Streams: subject s draws its face from child seed s; image pair k
    (k = s * images_per_subject + i) draws jitter, brightness, and
    thermal noise from child seed n_subjects + k.  Manifest order is
    (subject, image index), visible row before thermal row.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    w, h = spec.width, spec.height
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ds = SynthDataset(out_dir=out_dir)
    n_train = round(spec.n_subjects * spec.train_fraction)
    ds.train_subjects = list(range(n_train))
    ds.test_subjects = list(range(n_train, spec.n_subjects))
    train_rows: list[dict] = []
    test_rows: list[dict] = []
    for subject in range(spec.n_subjects):
        params = _draw_subject(Rng(derive_seed(spec.seed, subject)), w, h)
        face_lm = np.array(
            [
                [params.head[0] - params.eye_dx, params.eye_y],
                [params.head[0] + params.eye_dx, params.eye_y],
                [params.mouth[0], params.mouth[1]],
            ]
        )
        for i in range(spec.images_per_subject):
            pair_id = subject * spec.images_per_subject + i
            img_rng = Rng(derive_seed(spec.seed, spec.n_subjects + pair_id))
            theta = float(img_rng.uniform(-0.10, 0.10, 1)[0])
            scale = float(img_rng.uniform(0.95, 1.05, 1)[0])
            tx = float(img_rng.uniform(-3.0, 3.0, 1)[0])
            ty = float(img_rng.uniform(-3.0, 3.0, 1)[0])
            contrast = float(img_rng.uniform(0.9, 1.1, 1)[0])
            brightness = float(img_rng.uniform(-0.05, 0.05, 1)[0])
            ca, sa = scale * np.cos(theta), scale * np.sin(theta)
            ccx, ccy = w / 2.0, h / 2.0
            # face frame -> canvas: rotate/scale about center, then shift
            inv_s2 = ca * ca + sa * sa
            dx = xs - ccx - tx
            dy = ys - ccy - ty
            u = (ca * dx + sa * dy) / inv_s2 + ccx
            v = (-sa * dx + ca * dy) / inv_s2 + ccy
            visible = np.clip(contrast * _render(params, u, v) + brightness, 0.0, 1.0)
            thermal = modality_transform(visible, spec, img_rng)
            lm_canvas = []
            for fx, fy in face_lm:
                px = ca * (fx - ccx) - sa * (fy - ccy) + ccx + tx
                py = sa * (fx - ccx) + ca * (fy - ccy) + ccy + ty
                lm_canvas.append((px, py))
            for modality, img in (("visible", visible), ("thermal", thermal)):
                name = f"images/s{subject:03d}_i{i:02d}_{modality}.pgm"
                save_pgm(out_dir / name, img)
                row = {
                    "path": name,
                    "subject": subject,
                    "modality": modality,
                    "pair_id": pair_id,
                    "lex": f"{lm_canvas[0][0]:.4f}",
                    "ley": f"{lm_canvas[0][1]:.4f}",
                    "rex": f"{lm_canvas[1][0]:.4f}",
                    "rey": f"{lm_canvas[1][1]:.4f}",
                    "mx": f"{lm_canvas[2][0]:.4f}",
                    "my": f"{lm_canvas[2][1]:.4f}",
                }
                ds.rows.append(row)
                (train_rows if subject < n_train else test_rows).append(row)
    write_manifest(ds.manifest_path, ds.rows)
    write_manifest(ds.train_manifest_path, train_rows)
    write_manifest(ds.test_manifest_path, test_rows)
    return ds


def brute_force_identify(vectors: np.ndarray, labels, probe: np.ndarray) -> int:
    """Oracle for matching: naive per-row cosine via explicit norm
    division, per-subject max, lower subject id on ties.  Zero-norm rows
    (or a zero-norm probe) score 0."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[0] < 1:
        raise ContractViolation("empty gallery")
    pnorm = float(np.sqrt(np.sum(probe * probe)))
    best: dict[int, float] = {}
    for row, label in zip(vectors, labels):
        rnorm = float(np.sqrt(np.sum(row * row)))
        if rnorm < 1e-12 or pnorm < 1e-12:
            score = 0.0
        else:
            score = float(np.dot(row, probe)) / (rnorm * pnorm)
        label = int(label)
        if label not in best or score > best[label]:
            best[label] = score
    return min(best.items(), key=lambda kv: (-kv[1], kv[0]))[0]
