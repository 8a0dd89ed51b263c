"""Development helper: run the full synthetic benchmark and print the
rank-1 numbers the acceptance thresholds are frozen against."""

import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from thermoface.config import RunConfig
from thermoface.evaluation import cmc
from thermoface.pipeline import build_gallery, encode_probes, fit_models
from thermoface.preprocess import Modality
from thermoface.synthetic import generate


def rank1(gallery, probes):
    curve = cmc(gallery, [(v, s) for v, s, _ in probes])
    return curve.rank1 * 100.0


def main(cfg: RunConfig, workdir: Path):
    t0 = time.time()
    ds = generate(cfg.synth_spec(), workdir / "data")
    print(f"synth: {time.time() - t0:.1f}s, {len(ds.rows)} images")

    t0 = time.time()
    pca, deep, report = fit_models(cfg, ds.train_manifest_path)
    print(f"deep train: {time.time() - t0:.1f}s, epoch1 {report.epoch_losses[0]:.4f} "
          f"-> final {report.final_loss:.4f} (ratio {report.final_loss / report.epoch_losses[0]:.3f})")

    shallow_cfg = replace(cfg, hidden_sizes=(1000,))
    t0 = time.time()
    _, shallow, rep2 = fit_models(shallow_cfg, ds.train_manifest_path)
    print(f"shallow train: {time.time() - t0:.1f}s, final {rep2.final_loss:.4f}")

    t0 = time.time()
    test_m = ds.test_manifest_path
    gal_base = build_gallery(cfg, test_m, pca, None, policy="one")
    gal_deep = build_gallery(cfg, test_m, pca, deep, policy="one")
    gal_shallow = build_gallery(cfg, test_m, pca, shallow, policy="one")
    gal_thermal = build_gallery(cfg, test_m, pca, None, policy="one", modality=Modality.THERMAL)
    probes = encode_probes(cfg, test_m, pca)
    probes_within = [p for p in probes if p[2] not in set(int(i) for i in gal_thermal.image_ids)]
    print(f"encode: {time.time() - t0:.1f}s, probes {len(probes)}")

    r_base = rank1(gal_base, probes)
    r_deep = rank1(gal_deep, probes)
    r_shallow = rank1(gal_shallow, probes)
    r_within = rank1(gal_thermal, probes_within)
    print(f"rank-1: baseline {r_base:.2f}  shallow {r_shallow:.2f}  deep {r_deep:.2f}  "
          f"within-thermal {r_within:.2f}")
    print(f"margins: deep-base {r_deep - r_base:+.2f} (need >=15)  "
          f"shallow-base {r_shallow - r_base:+.2f} (need >=10)  deep>=shallow: {r_deep >= r_shallow}")
    if r_within > r_base:
        bridged = (r_deep - r_base) / (r_within - r_base) * 100
        print(f"gap bridged: {bridged:.1f}%")


if __name__ == "__main__":
    cfg = RunConfig()
    overrides = {}
    for arg in sys.argv[1:]:
        k, _, v = arg.partition("=")
        field_type = type(getattr(cfg, k))
        if field_type is tuple:
            overrides[k] = tuple(type(getattr(cfg, k)[0])(x) for x in v.split(","))
        elif field_type is bool:
            overrides[k] = v.lower() in ("1", "true")
        else:
            overrides[k] = field_type(v)
    cfg = replace(cfg, **overrides)
    print({k: getattr(cfg, k) for k in overrides} or "defaults")
    with tempfile.TemporaryDirectory() as d:
        main(cfg, Path(d))
