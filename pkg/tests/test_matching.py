import numpy as np
import pytest

from thermoface.embedding import pca_fit
from thermoface.errors import ContractViolation
from thermoface.matching import (
    build_gallery_index,
    encode_thermal_probe,
    encode_visible_gallery_image,
    identify,
    score_all,
)
from thermoface.network import DpmConfig, init_glorot
from thermoface.numerics import l2_normalize
from thermoface.preprocess import Landmarks


def random_gallery(g=6, d=40, seed=0, labels=None):
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((g, d))
    if labels is None:
        labels = list(range(g))
    return build_gallery_index(vectors, labels, list(range(g)))


def fitted_models(seed=0):
    rng = np.random.default_rng(seed)
    sample = rng.standard_normal((500, 128)) * np.linspace(2, 0.1, 128)
    pca = pca_fit(sample, out_dim=64)
    dpm = init_glorot(DpmConfig(input_dim=66, hidden_sizes=(12, 12), seed=seed))
    return pca, dpm


FACE_LM = Landmarks(left_eye=(45.0, 55.0), right_eye=(95.0, 55.0), mouth=(70.0, 120.0))


class TestEncode:
    def test_gallery_vector_length_and_norm(self):
        pca, dpm = fitted_models()
        img = np.random.default_rng(1).random((170, 140))
        vec = encode_visible_gallery_image(img, FACE_LM, pca, dpm)
        assert vec.shape == (408 * 66,) == (26928,)
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9

    def test_probe_vector_no_network_needed(self):
        pca, _ = fitted_models(seed=2)
        img = np.random.default_rng(3).random((170, 140))
        vec = encode_thermal_probe(img, FACE_LM, pca)
        assert vec.shape == (26928,)
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9

    def test_probe_deterministic(self):
        pca, _ = fitted_models(seed=4)
        img = np.random.default_rng(5).random((170, 140))
        a = encode_thermal_probe(img, FACE_LM, pca)
        b = encode_thermal_probe(img, FACE_LM, pca)
        assert np.array_equal(a, b)

    def test_constant_image_degenerate_path(self):
        # constant input -> zero descriptors -> constant mapped rows;
        # the vector must still be well-defined (no NaN)
        pca, dpm = fitted_models(seed=6)
        img = np.full((170, 140), 0.5)
        vec = encode_visible_gallery_image(img, FACE_LM, pca, dpm)
        assert np.all(np.isfinite(vec))
        n = np.linalg.norm(vec)
        assert n == 0.0 or abs(n - 1.0) <= 1e-9


class TestScoreAll:
    def test_self_similarity(self):
        gal = random_gallery(seed=7)
        scores = score_all(gal, gal.vectors[2])
        assert abs(scores[2] - 1.0) <= 1e-9

    def test_orthogonal_probe(self):
        vectors = np.eye(4)
        gal = build_gallery_index(vectors, [0, 1, 2, 3], [0, 1, 2, 3])
        scores = score_all(gal, np.array([0.0, 1.0, 0.0, 0.0]))
        assert abs(scores[0]) <= 1e-9 and abs(scores[1] - 1.0) <= 1e-9

    def test_matches_naive_loop(self):
        gal = random_gallery(g=20, d=300, seed=8)
        probe = l2_normalize(np.random.default_rng(9).standard_normal(300))
        scores = score_all(gal, probe)
        naive = np.array([float(np.dot(row, probe)) for row in gal.vectors])
        assert np.max(np.abs(scores - naive)) <= 1e-12

    def test_dim_guard(self):
        gal = random_gallery(seed=10)
        with pytest.raises(ContractViolation):
            score_all(gal, np.zeros(gal.dim + 1))

    def test_zero_rows_flagged_and_score_zero(self):
        vectors = np.vstack([np.zeros(8), np.ones(8)])
        gal = build_gallery_index(vectors, [0, 1], [0, 1])
        assert gal.zero_flags.tolist() == [True, False]
        scores = score_all(gal, l2_normalize(np.ones(8)))
        assert scores[0] == 0.0


class TestIdentify:
    def test_single_subject(self):
        gal = random_gallery(g=1, seed=11)
        result = identify(gal, gal.vectors[0])
        assert result.best_subject == 0

    def test_ranking_order(self):
        vectors = np.eye(3)
        gal = build_gallery_index(vectors, [10, 20, 30], [0, 1, 2])
        probe = l2_normalize(np.array([0.9, 0.2, 0.05]))
        result = identify(gal, probe)
        assert [s for s, _ in result.ranking] == [10, 20, 30]

    def test_tie_break_lower_subject(self):
        vectors = np.vstack([np.ones(4), np.ones(4)])
        gal = build_gallery_index(vectors, [7, 3], [0, 1])
        result = identify(gal, l2_normalize(np.ones(4)))
        assert result.best_subject == 3

    def test_max_fusion_across_images(self):
        # subject 0 has a weak and a strong image; fusion takes the max
        v = np.eye(3)
        gal = build_gallery_index(v, [0, 0, 1], [0, 1, 2])
        probe = l2_normalize(np.array([0.1, 0.8, 0.5]))
        result = identify(gal, probe)
        assert result.best_subject == 0
        assert dict(result.ranking)[0] == pytest.approx(0.8 / np.linalg.norm([0.1, 0.8, 0.5]))

    def test_empty_gallery(self):
        gal = random_gallery(seed=12)
        gal.vectors = np.zeros((0, 4))
        gal.labels = np.zeros(0, dtype=np.int64)
        with pytest.raises(ContractViolation):
            identify(gal, np.zeros(4))

    def test_rescaling_invariance(self):
        gal = random_gallery(g=10, d=50, seed=13)
        raw = np.random.default_rng(14).standard_normal(50)
        r1 = identify(gal, l2_normalize(raw))
        r2 = identify(gal, l2_normalize(raw * 1234.5))
        assert [s for s, _ in r1.ranking] == [s for s, _ in r2.ranking]
        for (_, a), (_, b) in zip(r1.ranking, r2.ranking):
            assert abs(a - b) <= 1e-9

    def test_permutation_equivariance(self):
        raw = np.random.default_rng(15).standard_normal((8, 30))
        probe = l2_normalize(np.random.default_rng(16).standard_normal(30))
        perm = np.random.default_rng(17).permutation(8)
        gal = build_gallery_index(raw, list(range(8)), list(range(8)))
        gal2 = build_gallery_index(raw[perm], np.arange(8)[perm], np.arange(8)[perm])
        scores = score_all(gal, probe)
        scores2 = score_all(gal2, probe)
        assert np.max(np.abs(scores[perm] - scores2)) <= 1e-12


class TestScoringLatency:
    def test_paper_scale_gallery_under_50ms(self):
        import time

        rng = np.random.default_rng(18)
        vectors = rng.standard_normal((82, 26928))
        gal = build_gallery_index(vectors, list(range(41)) * 2, list(range(82)))
        probe = l2_normalize(rng.standard_normal(26928))
        score_all(gal, probe)  # warm-up
        t0 = time.perf_counter()
        reps = 20
        for _ in range(reps):
            score_all(gal, probe)
        per_probe_ms = (time.perf_counter() - t0) / reps * 1000.0
        assert per_probe_ms < 50.0, f"{per_probe_ms:.2f} ms"
