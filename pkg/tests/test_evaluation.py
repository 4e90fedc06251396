import numpy as np
import pytest

from oracles import (ap_brute_force, cmc_brute_force, naive_distances,
                     rerank_reference)

from dareid.evaluation import (EvalConfig, RerankParams, cmc,
                               evaluate_retrieval, k_reciprocal_rerank,
                               mean_average_precision, pairwise_distances,
                               precision_recall_points)


class TestPairwiseDistances:
    def test_identical_vectors_give_zero(self):
        v = np.array([[1.0, 2.0, 3.0]])
        assert pairwise_distances(v, v)[0, 0] == 0.0

    def test_unit_vectors(self):
        e1, e2 = np.eye(2)
        d = pairwise_distances([e1], [e2])
        assert d[0, 0] == pytest.approx(np.sqrt(2), abs=1e-15)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(0)
        q, g = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
        for squared, metric in ((False, "euclidean"),
                                (True, "squared-euclidean")):
            got = pairwise_distances(q, g, metric)
            assert np.allclose(got, naive_distances(q, g, squared), atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pairwise_distances(np.zeros((1, 3)), np.zeros((1, 4)))

    def test_symmetry_under_role_swap(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(3, 5)), rng.normal(size=(4, 5))
        assert np.allclose(pairwise_distances(a, b),
                           pairwise_distances(b, a).T, atol=1e-12)


class TestMeanAveragePrecision:
    def test_perfect_ranking(self):
        dist = np.array([[0.1, 0.2, 0.9]])
        map_k, aps = mean_average_precision(dist, [5], [5, 5, 6], k=100)
        assert map_k == 1.0 and aps == [1.0]

    def test_miss_hit_miss_hit_pattern(self):
        dist = np.array([[0.1, 0.2, 0.3, 0.4]])
        map_k, _ = mean_average_precision(dist, [1], [0, 1, 0, 1], k=100)
        assert map_k == pytest.approx(0.5, abs=1e-12)

    def test_same_pattern_truncated_to_top_one(self):
        dist = np.array([[0.1, 0.2, 0.3, 0.4]])
        map_k, _ = mean_average_precision(dist, [1], [0, 1, 0, 1], k=1)
        assert map_k == 0.0

    def test_single_relevant_item_at_rank_r(self):
        for r in (1, 2, 5):
            dist = np.arange(1.0, 7.0).reshape(1, 6)
            gids = np.zeros(6, dtype=int)
            gids[r - 1] = 9
            map_k, _ = mean_average_precision(dist, [9], gids, k=100)
            assert map_k == pytest.approx(1.0 / r, abs=1e-12)

    def test_no_relevant_items_listed_in_error(self):
        dist = np.ones((2, 2))
        with pytest.raises(ValueError, match=r"\[1\]"):
            mean_average_precision(dist, [0, 9], [0, 0], k=10)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(2)
        dist = rng.uniform(size=(4, 10))
        qids = rng.integers(3, size=4)
        gids = np.concatenate([np.arange(3), rng.integers(3, size=7)])
        a, _ = mean_average_precision(dist, qids, gids, k=5)
        b, _ = mean_average_precision(np.exp(3 * dist) - 1, qids, gids, k=5)
        assert a == pytest.approx(b, abs=1e-12)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            nq, ng = rng.integers(1, 8), rng.integers(4, 15)
            qids = rng.integers(3, size=nq)
            gids = np.concatenate([np.arange(3), rng.integers(3, size=ng - 3)])
            dist = rng.uniform(size=(nq, ng))
            k = int(rng.integers(1, 20))
            map_k, aps = mean_average_precision(dist, qids, gids, k)
            expected = [ap_brute_force(dist[i], qids[i], gids, k)
                        for i in range(nq)]
            assert np.allclose(aps, expected, atol=1e-12)
            assert map_k == pytest.approx(np.mean(expected), abs=1e-12)

    def test_exclusion_mask(self):
        dist = np.array([[0.1, 0.2, 0.3]])
        exclude = np.array([[True, False, False]])
        map_k, _ = mean_average_precision(dist, [1], [1, 0, 1], k=10,
                                          exclude=exclude)
        assert map_k == pytest.approx(0.5, abs=1e-12)

    def test_map_in_unit_interval(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            dist = rng.uniform(size=(3, 8))
            gids = np.concatenate([np.arange(2), rng.integers(2, size=6)])
            map_k, _ = mean_average_precision(dist, rng.integers(2, size=3),
                                              gids, k=4)
            assert 0.0 <= map_k <= 1.0


class TestCmc:
    def test_perfect_ranking(self):
        dist = np.array([[0.1, 0.5]])
        assert cmc(dist, [1], [1, 0])[1] == 1.0

    def test_first_relevant_at_rank_three(self):
        dist = np.array([[0.1, 0.2, 0.3, 0.4]])
        got = cmc(dist, [1], [0, 0, 1, 1], ranks=(1, 5))
        assert got[1] == 0.0 and got[5] == 1.0

    def test_non_decreasing_in_rank(self):
        rng = np.random.default_rng(5)
        dist = rng.uniform(size=(5, 12))
        gids = np.concatenate([np.arange(4), rng.integers(4, size=8)])
        got = cmc(dist, rng.integers(4, size=5), gids, ranks=(1, 5, 10))
        assert got[1] <= got[5] <= got[10]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            dist = rng.uniform(size=(4, 9))
            gids = np.concatenate([np.arange(3), rng.integers(3, size=6)])
            qids = rng.integers(3, size=4)
            got = cmc(dist, qids, gids, ranks=(1, 3, 5))
            expected = cmc_brute_force(dist, qids, gids, (1, 3, 5))
            assert got == pytest.approx(expected)

    def test_cmc1_equals_map_with_single_relevant(self):
        rng = np.random.default_rng(7)
        dist = rng.uniform(size=(5, 6))
        gids = np.arange(6)
        qids = rng.integers(6, size=5)
        map1, _ = mean_average_precision(dist, qids, gids, k=1)
        assert cmc(dist, qids, gids)[1] == pytest.approx(map1, abs=1e-12)


class TestPrecisionRecallPoints:
    def test_simple_pattern(self):
        pts = precision_recall_points(np.array([False, True, False, True]))
        assert pts == [(0.5, 0.5), (1.0, 0.5)]


class TestRerank:
    def test_lambda_one_preserves_ordering(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            q = rng.normal(size=(4, 5))
            g = rng.normal(size=(12, 5))
            base = pairwise_distances(q, g)
            final = k_reciprocal_rerank(q, g, RerankParams(k1=4, k2=2,
                                                           lambda_orig=1.0))
            for i in range(4):
                assert np.array_equal(np.argsort(final[i], kind="stable"),
                                      np.argsort(base[i], kind="stable"))

    def test_exact_match_stays_rank_one(self):
        rng = np.random.default_rng(9)
        g = rng.normal(size=(10, 4))
        q = g[3:4].copy()
        final = k_reciprocal_rerank(q, g, RerankParams(k1=3, k2=2))
        assert final[0].argmin() == 3

    def test_matches_reference_translation(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            q = rng.normal(size=(3, 4))
            g = rng.normal(size=(9, 4))
            got = k_reciprocal_rerank(q, g, RerankParams(k1=3, k2=2,
                                                         lambda_orig=0.3))
            ref = rerank_reference(q, g, k1=3, k2=2, lambda_value=0.3)
            assert np.allclose(got, ref, atol=1e-9)

    def test_default_parameters_against_reference(self):
        rng = np.random.default_rng(11)
        q = rng.normal(size=(5, 6))
        g = rng.normal(size=(30, 6))
        got = k_reciprocal_rerank(q, g)
        ref = rerank_reference(q, g)
        assert np.allclose(got, ref, atol=1e-9)

    def test_k1_must_be_below_gallery_size(self):
        with pytest.raises(ValueError):
            k_reciprocal_rerank(np.zeros((1, 2)), np.zeros((5, 2)),
                                RerankParams(k1=5, k2=2))

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            RerankParams(lambda_orig=1.5)
        with pytest.raises(ValueError):
            RerankParams(k1=3, k2=4)


class TestEvaluateRetrieval:
    def test_report_consistency(self):
        rng = np.random.default_rng(12)
        g = np.repeat(rng.normal(size=(4, 3)), 3, axis=0)
        g += rng.normal(scale=0.01, size=g.shape)
        gids = np.repeat(np.arange(4), 3)
        q = g[::3] + rng.normal(scale=0.01, size=(4, 3))
        report = evaluate_retrieval(q, g, np.arange(4), gids, EvalConfig())
        assert report.map_at_k == pytest.approx(
            np.mean(report.per_query_ap), abs=1e-12)
        assert report.cmc[1] <= report.cmc[5] <= report.cmc[10]
        assert not report.reranked
        assert report.config["top_k"] == 100

    def test_json_round_trip(self):
        import json
        rng = np.random.default_rng(13)
        g = rng.normal(size=(6, 3))
        report = evaluate_retrieval(g, g, np.arange(6), np.arange(6),
                                    EvalConfig(top_k=5))
        parsed = json.loads(report.to_json())
        assert parsed["mAP"] == report.map_at_k
        assert parsed["config"]["top_k"] == 5
