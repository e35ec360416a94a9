"""Metric tests: hand-computed examples and enumeration oracles."""

import numpy as np
import pytest

from seqrig.metrics import (corpus_bleu, corpus_wer, edit_distance,
                            sentence_bleu_smooth, sequence_accuracy)


def brute_force_edit_distance(a, b):
    """Exhaustive alignment enumeration (oracle for short sequences)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(brute_force_edit_distance(a[1:], b) + 1,
               brute_force_edit_distance(a, b[1:]) + 1,
               brute_force_edit_distance(a[1:], b[1:]) + (a[0] != b[0]))


class TestBleu:
    def test_identity_corpus_scores_one(self):
        hyps = [["a", "b", "c", "d"], ["x", "y", "z", "w", "q"]]
        assert corpus_bleu(hyps, hyps) == pytest.approx(1.0)

    def test_identity_with_short_sentences_scores_one(self):
        hyps = [["a"], ["b", "c"]]
        assert corpus_bleu(hyps, hyps) == pytest.approx(1.0)

    def test_hand_computed_brevity_penalty_example(self):
        # precisions 4/4, 3/3, 2/2, 1/1; BP = exp(1 - 5/4)
        hyp = ["a", "b", "c", "d"]
        ref = ["a", "b", "c", "d", "e"]
        assert corpus_bleu([hyp], [ref]) == pytest.approx(np.exp(-0.25), abs=1e-4)
        assert corpus_bleu([hyp], [ref]) == pytest.approx(0.7788, abs=1e-4)

    def test_no_common_fourgram_scores_zero(self):
        hyp = ["a", "b", "c", "x", "d"]
        ref = ["a", "b", "c", "y", "d"]
        assert corpus_bleu([hyp], [ref]) == 0.0

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            hyp = [str(t) for t in rng.integers(0, 4, size=rng.integers(1, 8))]
            ref = [str(t) for t in rng.integers(0, 4, size=rng.integers(1, 8))]
            assert 0.0 <= corpus_bleu([hyp], [ref]) <= 1.0

    def test_count_mismatch_and_empty_corpus(self):
        with pytest.raises(ValueError, match="mismatch"):
            corpus_bleu([["a"]], [])
        with pytest.raises(ValueError, match="empty"):
            corpus_bleu([], [])

    def test_smoothed_sentence_variant_self_is_one(self):
        assert sentence_bleu_smooth(["a", "b"], ["a", "b"]) == pytest.approx(1.0)

    def test_smoothed_variant_is_nonzero_without_matches(self):
        assert 0.0 < sentence_bleu_smooth(["a"], ["b"]) < 1.0


class TestWer:
    def test_identity_is_zero(self):
        hyps = [["a", "b"], ["c"]]
        assert corpus_wer(hyps, hyps) == 0.0

    def test_single_substitution_over_three(self):
        assert corpus_wer([["a", "x", "c"]], [["a", "b", "c"]]) == pytest.approx(1 / 3)

    def test_empty_hypothesis_is_all_deletions(self):
        assert corpus_wer([[]], [["a", "b", "c", "d"]]) == pytest.approx(1.0)

    def test_matches_alignment_enumeration_on_random_pairs(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            hyp = [int(t) for t in rng.integers(0, 3, size=rng.integers(0, 6))]
            ref = [int(t) for t in rng.integers(0, 3, size=rng.integers(1, 6))]
            assert edit_distance(hyp, ref) == brute_force_edit_distance(hyp, ref)

    def test_empty_reference_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            corpus_wer([[]], [[]])

    def test_wer_can_exceed_one(self):
        assert corpus_wer([["a", "b", "c"]], [["x"]]) == pytest.approx(3.0)


class TestAccuracy:
    def test_exact_match_fraction(self):
        hyps = [["a"], ["b"], ["c"]]
        refs = [["a"], ["x"], ["c"]]
        assert sequence_accuracy(hyps, refs) == pytest.approx(2 / 3)

    def test_identity_is_one(self):
        hyps = [["a", "b"]]
        assert sequence_accuracy(hyps, hyps) == 1.0
