"""Development helper: sweep transform/training parameters, reusing the
extraction work per transform setting."""

import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np

from thermoface.config import RunConfig
from thermoface.embedding import pca_fit
from thermoface.evaluation import cmc
from thermoface.manifest import read_manifest
from thermoface.matching import build_gallery_index
from thermoface.network import train
from thermoface.numerics import Rng, derive_seed, l2_normalize
from thermoface.pipeline import (
    _descriptor_matrix,
    _embed_from_matrix,
    paired_entries,
    select_gallery_entries,
)
from thermoface.preprocess import Modality
from thermoface.synthetic import generate


def prepare(cfg, workdir):
    ds = generate(cfg.synth_spec(), workdir)
    train_pairs = paired_entries(read_manifest(ds.train_manifest_path))
    flat = [e for p in train_pairs for e in p]
    mats = [_descriptor_matrix(e, cfg) for e in flat]
    pca = pca_fit(np.vstack(mats), out_dim=64, rng=Rng(derive_seed(cfg.seed, 0xDA7A)))
    x = np.vstack([_embed_from_matrix(m, cfg, pca) for m in mats[0::2]])
    t = np.vstack([_embed_from_matrix(m, cfg, pca) for m in mats[1::2]])
    test_entries = read_manifest(ds.test_manifest_path)
    gal_entries = select_gallery_entries(test_entries, Modality.VISIBLE, "one")
    gal_embeds = [_embed_from_matrix(_descriptor_matrix(e, cfg), cfg, pca) for e in gal_entries]
    gal_labels = [e.subject for e in gal_entries]
    probe_entries = [e for e in test_entries if e.modality is Modality.THERMAL]
    probes = [
        (l2_normalize(_embed_from_matrix(_descriptor_matrix(e, cfg), cfg, pca).ravel()), e.subject)
        for e in probe_entries
    ]
    return pca, x, t, gal_embeds, gal_labels, probes


def rank1_with(model, gal_embeds, gal_labels, probes):
    from thermoface.network import map_batch

    if model is None:
        vectors = np.stack([l2_normalize(e.ravel()) for e in gal_embeds])
    else:
        vectors = np.stack([l2_normalize(map_batch(model, e).ravel()) for e in gal_embeds])
    gal = build_gallery_index(vectors, gal_labels, list(range(len(gal_labels))))
    return cmc(gal, probes).rank1 * 100.0


def run(tag, cfg, workdir):
    t0 = time.time()
    pca, x, t, gal_embeds, gal_labels, probes = prepare(cfg, workdir)
    prep_s = time.time() - t0
    results = {}
    for name, hidden in (("deep", cfg.hidden_sizes), ("shallow", (1000,))):
        dcfg = replace(cfg, hidden_sizes=tuple(hidden)).dpm_config(input_dim=x.shape[1])
        t0 = time.time()
        model, report = train(dcfg, x, t)
        ratio = report.epoch_losses[min(29, len(report.epoch_losses) - 1)] / report.epoch_losses[0]
        results[name] = (
            rank1_with(model, gal_embeds, gal_labels, probes),
            ratio,
            report.epoch_losses[0],
            report.final_loss,
            time.time() - t0,
        )
    base = rank1_with(None, gal_embeds, gal_labels, probes)
    d, s = results["deep"], results["shallow"]
    print(
        f"{tag}: base {base:5.2f} | deep {d[0]:5.2f} (r {d[1]:.3f}, {d[2]:.3f}->{d[3]:.3f}, {d[4]:.0f}s)"
        f" | shallow {s[0]:5.2f} (r {s[1]:.3f})"
        f" | d-b {d[0] - base:+5.2f} s-b {s[0] - base:+5.2f} d>=s {d[0] >= s[0]} prep {prep_s:.0f}s",
        flush=True,
    )


if __name__ == "__main__":
    combos = eval(sys.argv[1])  # list of dicts
    for i, combo in enumerate(combos):
        cfg = replace(RunConfig(), **combo)
        with tempfile.TemporaryDirectory() as d:
            run(f"#{i} {combo}", cfg, Path(d))
