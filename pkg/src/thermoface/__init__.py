"""Cross-modal (visible/thermal) face matching.

Dense descriptors from visible gallery images are regressed into the
thermal descriptor space by a small feed-forward network; identification
is cosine similarity on concatenated, L2-normalized vectors.
"""

from .config import RunConfig, load_config
from .embedding import PcaModel, embed_image, pca_apply, pca_fit
from .evaluation import CmcCurve, GapReport, RocCurve, cmc, modality_gap_report, roc
from .features import DescriptorSet, GridSpec, RawDescriptor, extract_dense
from .matching import (
    GalleryIndex,
    MatchResult,
    build_gallery_index,
    encode_thermal_probe,
    encode_visible_gallery_image,
    identify,
    score_all,
)
from .network import DpmConfig, DpmModel, TrainReport, forward, map_batch, train
from .numerics import Rng, gemv, l2_normalize, uniform_fill
from .preprocess import Landmarks, Modality, PreprocParams, load_pgm, preprocess
from .synthetic import SynthSpec, brute_force_identify, generate

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "load_config",
    "PcaModel",
    "pca_fit",
    "pca_apply",
    "embed_image",
    "CmcCurve",
    "RocCurve",
    "GapReport",
    "cmc",
    "roc",
    "modality_gap_report",
    "GridSpec",
    "RawDescriptor",
    "DescriptorSet",
    "extract_dense",
    "GalleryIndex",
    "MatchResult",
    "build_gallery_index",
    "encode_visible_gallery_image",
    "encode_thermal_probe",
    "identify",
    "score_all",
    "DpmConfig",
    "DpmModel",
    "TrainReport",
    "forward",
    "map_batch",
    "train",
    "Rng",
    "gemv",
    "uniform_fill",
    "l2_normalize",
    "Landmarks",
    "Modality",
    "PreprocParams",
    "load_pgm",
    "preprocess",
    "SynthSpec",
    "generate",
    "brute_force_identify",
    "__version__",
]
