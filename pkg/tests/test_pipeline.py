import numpy as np
import pytest

from thermoface.errors import ManifestError
from thermoface.manifest import read_manifest, write_manifest
from thermoface.pipeline import (
    build_gallery,
    encode_probes,
    fit_models,
    paired_entries,
    select_gallery_entries,
)
from thermoface.preprocess import Modality


class TestPairing:
    def test_pairs_sorted_and_matched(self, tiny_dataset):
        entries = read_manifest(tiny_dataset.train_manifest_path)
        pairs = paired_entries(entries)
        assert len(pairs) == 6  # 3 train subjects x 2 images
        for vis, thr in pairs:
            assert vis.modality is Modality.VISIBLE
            assert thr.modality is Modality.THERMAL
            assert vis.pair_id == thr.pair_id
            assert vis.subject == thr.subject
        assert [v.pair_id for v, _ in pairs] == sorted(v.pair_id for v, _ in pairs)

    def test_missing_counterpart_rejected(self, tiny_dataset, tmp_path):
        entries = read_manifest(tiny_dataset.manifest_path)
        rows = [
            {
                "path": str(e.path),
                "subject": e.subject,
                "modality": e.modality.value,
                "pair_id": e.pair_id,
                "lex": e.landmarks.left_eye[0],
                "ley": e.landmarks.left_eye[1],
                "rex": e.landmarks.right_eye[0],
                "rey": e.landmarks.right_eye[1],
                "mx": e.landmarks.mouth[0],
                "my": e.landmarks.mouth[1],
            }
            for e in entries
            if e.modality is Modality.VISIBLE
        ]
        bad = tmp_path / "bad.csv"
        write_manifest(bad, rows)
        with pytest.raises(ManifestError):
            paired_entries(read_manifest(bad))


class TestFitModels:
    def test_artifacts_shapes(self, tiny_cfg, tiny_models):
        pca, dpm, report = tiny_models
        assert pca.basis.shape == (64, 128)
        assert dpm.input_dim == 66
        assert dpm.hidden_sizes == (24, 24)
        assert report.epochs_run == tiny_cfg.epochs
        assert len(report.epoch_losses) == tiny_cfg.epochs

    def test_loss_decreases(self, tiny_models):
        _, _, report = tiny_models
        assert report.epoch_losses[-1] < report.epoch_losses[0]

    def test_deterministic_refit(self, tiny_cfg, tiny_dataset, tiny_models):
        pca1, dpm1, _ = tiny_models
        pca2, dpm2, _ = fit_models(tiny_cfg, tiny_dataset.train_manifest_path)
        assert np.array_equal(pca1.basis, pca2.basis)
        assert np.array_equal(dpm1.w_out, dpm2.w_out)
        for (w1, b1), (w2, b2) in zip(dpm1.layers, dpm2.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)

    def test_threads_do_not_change_results(self, tiny_cfg, tiny_dataset, tiny_models):
        pca1, dpm1, _ = tiny_models
        pca3, dpm3, _ = fit_models(tiny_cfg, tiny_dataset.train_manifest_path, threads=3)
        assert np.array_equal(pca1.basis, pca3.basis)
        assert np.array_equal(dpm1.w_out, dpm3.w_out)


class TestGalleryBuild:
    def test_policy_counts(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, dpm, _ = tiny_models
        test_m = tiny_dataset.test_manifest_path
        for policy, expected in (("one", 3), ("two", 6), ("all", 6)):
            gal = build_gallery(tiny_cfg, test_m, pca, dpm, policy=policy)
            assert len(gal) == expected

    def test_policy_selects_lowest_pair_ids(self, tiny_dataset):
        entries = read_manifest(tiny_dataset.test_manifest_path)
        selected = select_gallery_entries(entries, Modality.VISIBLE, "one")
        per_subject = {}
        for e in entries:
            if e.modality is Modality.VISIBLE:
                per_subject.setdefault(e.subject, []).append(e.pair_id)
        assert [e.pair_id for e in selected] == [min(v) for _, v in sorted(per_subject.items())]

    def test_unknown_policy(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, dpm, _ = tiny_models
        with pytest.raises(ManifestError):
            build_gallery(tiny_cfg, tiny_dataset.test_manifest_path, pca, dpm, policy="three")

    def test_rows_unit_norm(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, dpm, _ = tiny_models
        gal = build_gallery(tiny_cfg, tiny_dataset.test_manifest_path, pca, dpm, policy="all")
        norms = np.linalg.norm(gal.vectors, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-9)

    def test_baseline_and_thermal_variants(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, dpm, _ = tiny_models
        test_m = tiny_dataset.test_manifest_path
        mapped = build_gallery(tiny_cfg, test_m, pca, dpm, policy="one")
        baseline = build_gallery(tiny_cfg, test_m, pca, None, policy="one")
        thermal = build_gallery(tiny_cfg, test_m, pca, None, policy="one", modality=Modality.THERMAL)
        assert not np.allclose(mapped.vectors, baseline.vectors)
        assert not np.allclose(baseline.vectors, thermal.vectors)


class TestEncodeProbes:
    def test_probe_set(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, _, _ = tiny_models
        probes = encode_probes(tiny_cfg, tiny_dataset.test_manifest_path, pca)
        assert len(probes) == 6  # 3 test subjects x 2 thermal images
        for vec, subject, pair_id in probes:
            assert vec.shape == (408 * 66,)
            assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9

    def test_exclusion(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, _, _ = tiny_models
        all_probes = encode_probes(tiny_cfg, tiny_dataset.test_manifest_path, pca)
        excluded = {all_probes[0][2]}
        probes = encode_probes(
            tiny_cfg, tiny_dataset.test_manifest_path, pca, exclude_pair_ids=excluded
        )
        assert len(probes) == 5
        assert excluded.isdisjoint({p[2] for p in probes})

    def test_threads_preserve_order_and_values(self, tiny_cfg, tiny_dataset, tiny_models):
        pca, _, _ = tiny_models
        a = encode_probes(tiny_cfg, tiny_dataset.test_manifest_path, pca)
        b = encode_probes(tiny_cfg, tiny_dataset.test_manifest_path, pca, threads=3)
        for (va, sa, pa), (vb, sb, pb) in zip(a, b):
            assert (sa, pa) == (sb, pb)
            assert np.array_equal(va, vb)
