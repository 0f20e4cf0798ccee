"""
Tests for relative-virality pair construction.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from viraliency.core.exceptions import InsufficientDataError
from viraliency.schemas.data import PairLabel, PairMode, PairRequest, ScoredImage
from viraliency.services.pairs import build_pairs, pair_ids, split_train_test


def scored(values):
    return [ScoredImage(id=f"i{index}", virality=v) for index, v in enumerate(values)]


def more_viral(pair):
    return pair.id_a if pair.label is PairLabel.A_MORE_VIRAL else pair.id_b


class TestBuildPairs:

    def test_two_images_median_split(self):
        pairs = build_pairs(scored([5.0, 1.0]), PairRequest(count=1), seed=3)
        assert len(pairs) == 1
        assert {pairs[0].id_a, pairs[0].id_b} == {"i0", "i1"}
        assert more_viral(pairs[0]) == "i0"

    def test_extremes_order_statistics(self):
        request = PairRequest(mode=PairMode.EXTREMES, count=1, top_k=1, bottom_k=1)
        pairs = build_pairs(scored([9.0, 5.0, 1.0]), request)
        assert {pairs[0].id_a, pairs[0].id_b} == {"i0", "i2"}
        assert more_viral(pairs[0]) == "i0"

    def test_label_always_names_the_higher_score(self, rng):
        images = scored(rng.standard_normal(40).tolist())
        by_id = {s.id: s.virality for s in images}
        for pair in build_pairs(images, PairRequest(count=100), seed=1):
            other = pair.id_b if more_viral(pair) == pair.id_a else pair.id_a
            assert by_id[more_viral(pair)] > by_id[other]

    def test_no_repeated_pairs(self, rng):
        images = scored(rng.standard_normal(20).tolist())
        pairs = build_pairs(images, PairRequest(count=100), seed=2)
        assert len({frozenset((p.id_a, p.id_b)) for p in pairs}) == 100

    def test_both_orientations_appear(self, rng):
        pairs = build_pairs(scored(rng.standard_normal(30).tolist()), PairRequest(count=50), seed=4)
        labels = {p.label for p in pairs}
        assert labels == {PairLabel.A_MORE_VIRAL, PairLabel.B_MORE_VIRAL}

    def test_deterministic(self, rng):
        images = scored(rng.standard_normal(30).tolist())
        assert build_pairs(images, PairRequest(count=20), seed=9) == build_pairs(images, PairRequest(count=20), seed=9)

    def test_median_images_excluded(self):
        pairs = build_pairs(scored([3.0, 2.0, 1.0]), PairRequest(count=1))
        assert "i1" not in pair_ids(pairs)

    def test_too_many_pairs_requested(self):
        with pytest.raises(InsufficientDataError):
            build_pairs(scored([5.0, 1.0]), PairRequest(count=2))

    def test_all_equal_scores(self):
        with pytest.raises(InsufficientDataError):
            build_pairs(scored([1.0, 1.0, 1.0]), PairRequest(count=1))

    def test_extremes_need_enough_images(self):
        request = PairRequest(mode=PairMode.EXTREMES, count=1, top_k=2, bottom_k=2)
        with pytest.raises(InsufficientDataError):
            build_pairs(scored([3.0, 2.0, 1.0]), request)

    def test_extremes_need_sizes(self):
        with pytest.raises(ValidationError):
            PairRequest(mode=PairMode.EXTREMES, count=1)

    def test_excluded_ids_never_used(self, rng):
        images = scored(rng.standard_normal(20).tolist())
        excluded = {"i0", "i1", "i2"}
        pairs = build_pairs(images, PairRequest(count=30), seed=5, exclude_ids=excluded)
        assert not pair_ids(pairs) & excluded


class TestSplitTrainTest:

    @pytest.mark.parametrize("seed", range(5))
    def test_disjoint(self, seed):
        values = np.random.default_rng(seed).standard_normal(60).tolist()
        split = split_train_test(scored(values), train_count=50, test_count=20, extremes_k=10, seed=seed)
        assert len(split.train) == 50
        assert len(split.test) == 20
        assert not pair_ids(split.train) & pair_ids(split.test)

    def test_test_pairs_come_from_extremes(self):
        values = list(range(30))
        split = split_train_test(scored([float(v) for v in values]), train_count=5, test_count=10,
                                 extremes_k=5, seed=0)
        allowed = {f"i{v}" for v in list(range(5)) + list(range(25, 30))}
        assert pair_ids(split.test) <= allowed

    def test_zero_counts(self):
        split = split_train_test(scored([1.0, 2.0]), train_count=0, test_count=0, extremes_k=1)
        assert split.train == [] and split.test == []
