"""Bit-exact binary artifact files (little-endian throughout).

Four artifact kinds, distinguished by an 8-byte magic whose trailing
digit is the format version:

  DPMPCA01  u32 in_dim, u32 out_dim, mean, basis row-major, eigenvalues
  DPMNET01  u32 n_hidden, u32 d, per hidden layer (u32 rows, u32 cols,
            weights, u32 len, bias), output (u32 rows, u32 cols,
            weights), u64 seed
  DPMGAL01  u32 count, u32 dim, vectors row-major, then per row
            (u32 subject_id, u32 image_id)
  DPMDSC1\\0 u32 count, per descriptor f64 cx, f64 cy, u32 scale_index,
            u32 dim, values

Floats are f64.  Raw binary keeps float round-trips exact, which the
determinism tests depend on.  load() re-validates artifact invariants
(orthonormality, shape chaining, row norms) and raises
InvariantViolation naming the failed check.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .embedding import PcaModel
from .errors import ContractViolation, InvariantViolation, StoreFormatError
from .features import DescriptorSet, RawDescriptor
from .matching import GalleryIndex, build_gallery_index
from .network import DpmModel

MAGIC_PCA = b"DPMPCA01"
MAGIC_NET = b"DPMNET01"
MAGIC_GAL = b"DPMGAL01"
MAGIC_DSC = b"DPMDSC1\x00"

_F8 = np.dtype("<f8")


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise StoreFormatError(
                f"{self.path}: truncated at offset {self.pos}, needed {n} more bytes"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype=_F8).astype(np.float64)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise StoreFormatError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes at offset {self.pos}"
            )


def _write(path, chunks: list[bytes]) -> None:
    with open(path, "wb") as fh:
        for c in chunks:
            fh.write(c)
        fh.flush()
        os.fsync(fh.fileno())


def _f8(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype=_F8).tobytes()


def save(artifact, path) -> None:
    """Serialize a PcaModel, DpmModel, GalleryIndex, or DescriptorSet."""
    if isinstance(artifact, PcaModel):
        _save_pca(artifact, path)
    elif isinstance(artifact, DpmModel):
        _save_net(artifact, path)
    elif isinstance(artifact, GalleryIndex):
        _save_gallery(artifact, path)
    elif isinstance(artifact, DescriptorSet):
        _save_descriptors(artifact, path)
    else:
        raise ContractViolation(f"cannot serialize {type(artifact).__name__}")


def load(path):
    """Deserialize any artifact file, validated against its invariants."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise StoreFormatError(f"{path}: too short for a magic header")
    magic = data[:8]
    loaders = {
        MAGIC_PCA: _load_pca,
        MAGIC_NET: _load_net,
        MAGIC_GAL: _load_gallery,
        MAGIC_DSC: _load_descriptors,
    }
    if magic not in loaders:
        raise StoreFormatError(
            f"{path}: unknown magic {magic!r}, expected one of "
            f"{sorted(m.decode('ascii', 'replace') for m in loaders)}"
        )
    reader = _Reader(data, path)
    reader.take(8)
    artifact = loaders[magic](reader)
    reader.done()
    return artifact


def _expect(path_kind: str, condition: bool, check: str) -> None:
    if not condition:
        raise InvariantViolation(f"{path_kind}: invariant failed: {check}")


# --- PCA -------------------------------------------------------------------


def _save_pca(model: PcaModel, path) -> None:
    _write(
        path,
        [
            MAGIC_PCA,
            struct.pack("<II", model.in_dim, model.out_dim),
            _f8(model.mean),
            _f8(model.basis),
            _f8(model.eigenvalues),
        ],
    )


def _load_pca(r: _Reader) -> PcaModel:
    in_dim = r.u32()
    out_dim = r.u32()
    mean = r.f64_array(in_dim)
    basis = r.f64_array(out_dim * in_dim).reshape(out_dim, in_dim)
    eig = r.f64_array(out_dim)
    gram = basis @ basis.T
    _expect("pca", bool(np.all(np.abs(gram - np.eye(out_dim)) <= 1e-8)), "basis orthonormal (1e-8)")
    _expect("pca", bool(np.all(eig >= -1e-12)), "eigenvalues >= -1e-12")
    _expect("pca", bool(np.all(np.diff(eig) <= 0)), "eigenvalues non-increasing")
    _expect("pca", bool(np.all(np.isfinite(mean))), "mean finite")
    return PcaModel(mean=mean, basis=basis, eigenvalues=eig)


# --- Network ---------------------------------------------------------------


def _save_net(model: DpmModel, path) -> None:
    if model.activation != "tanh":
        raise ContractViolation("model files store tanh networks only")
    chunks = [MAGIC_NET, struct.pack("<II", len(model.layers), model.input_dim)]
    for w, b in model.layers:
        chunks.append(struct.pack("<II", w.shape[0], w.shape[1]))
        chunks.append(_f8(w))
        chunks.append(struct.pack("<I", b.shape[0]))
        chunks.append(_f8(b))
    chunks.append(struct.pack("<II", model.w_out.shape[0], model.w_out.shape[1]))
    chunks.append(_f8(model.w_out))
    chunks.append(struct.pack("<Q", model.seed & (2**64 - 1)))
    _write(path, chunks)


def _load_net(r: _Reader) -> DpmModel:
    n = r.u32()
    d = r.u32()
    layers = []
    prev = d
    for k in range(n):
        rows = r.u32()
        cols = r.u32()
        w = r.f64_array(rows * cols).reshape(rows, cols)
        blen = r.u32()
        b = r.f64_array(blen)
        _expect("net", cols == prev, f"layer {k + 1} input width chains from previous layer")
        _expect("net", blen == rows, f"layer {k + 1} bias length matches rows")
        layers.append((w, b))
        prev = rows
    rows = r.u32()
    cols = r.u32()
    w_out = r.f64_array(rows * cols).reshape(rows, cols)
    seed = r.u64()
    _expect("net", cols == prev and rows == d, "output matrix maps last hidden width back to d")
    finite = all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in layers)
    _expect("net", finite and bool(np.all(np.isfinite(w_out))), "parameters finite")
    return DpmModel(layers=layers, w_out=w_out, seed=seed, activation="tanh")


# --- Gallery ---------------------------------------------------------------


def _save_gallery(gal: GalleryIndex, path) -> None:
    g, d = gal.vectors.shape
    chunks = [MAGIC_GAL, struct.pack("<II", g, d), _f8(gal.vectors)]
    for subj, img in zip(gal.labels, gal.image_ids):
        chunks.append(struct.pack("<II", int(subj), int(img)))
    _write(path, chunks)


def _load_gallery(r: _Reader) -> GalleryIndex:
    g = r.u32()
    d = r.u32()
    vectors = r.f64_array(g * d).reshape(g, d)
    labels = np.empty(g, dtype=np.int64)
    image_ids = np.empty(g, dtype=np.int64)
    for i in range(g):
        labels[i] = r.u32()
        image_ids[i] = r.u32()
    norms = np.sqrt(np.sum(vectors * vectors, axis=1))
    zero = norms < 1e-12
    _expect(
        "gallery",
        bool(np.all(np.abs(norms[~zero] - 1.0) <= 1e-9)),
        "row norms are 1 +- 1e-9 or zero",
    )
    return GalleryIndex(vectors=vectors, labels=labels, image_ids=image_ids, zero_flags=zero)


# --- Descriptor dump -------------------------------------------------------


def _save_descriptors(ds: DescriptorSet, path) -> None:
    chunks = [MAGIC_DSC, struct.pack("<I", len(ds.descriptors))]
    for desc in ds.descriptors:
        chunks.append(struct.pack("<dd", desc.center[0], desc.center[1]))
        chunks.append(struct.pack("<II", desc.scale_index, desc.values.shape[0]))
        chunks.append(_f8(desc.values))
    _write(path, chunks)


def _load_descriptors(r: _Reader) -> DescriptorSet:
    count = r.u32()
    ds = DescriptorSet(image_id="")
    for i in range(count):
        cx, cy = struct.unpack("<dd", r.take(16))
        scale_index = r.u32()
        dim = r.u32()
        values = r.f64_array(dim)
        norm = float(np.sqrt(np.sum(values * values)))
        _expect(
            "descriptors",
            norm <= 1e-12 or abs(norm - 1.0) <= 1e-9,
            f"descriptor {i} norm in {{0, 1 +- 1e-9}}",
        )
        ds.descriptors.append(RawDescriptor(center=(cx, cy), scale_index=scale_index, values=values))
    return ds


def load_pca(path) -> PcaModel:
    artifact = load(path)
    if not isinstance(artifact, PcaModel):
        raise StoreFormatError(f"{path}: expected magic {MAGIC_PCA!r}")
    return artifact


def load_net(path) -> DpmModel:
    artifact = load(path)
    if not isinstance(artifact, DpmModel):
        raise StoreFormatError(f"{path}: expected magic {MAGIC_NET!r}")
    return artifact


def load_gallery(path) -> GalleryIndex:
    artifact = load(path)
    if not isinstance(artifact, GalleryIndex):
        raise StoreFormatError(f"{path}: expected magic {MAGIC_GAL!r}")
    return artifact


__all__ = [
    "save",
    "load",
    "load_pca",
    "load_net",
    "load_gallery",
    "build_gallery_index",
    "MAGIC_PCA",
    "MAGIC_NET",
    "MAGIC_GAL",
    "MAGIC_DSC",
]
