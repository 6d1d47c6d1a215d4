"""Linguistic majority vote and the agreement-based partition."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpseudo.consensus import (
    CONFIDENT,
    UNCONFIDENT,
    ConfidencePartition,
    PseudoLabelRecord,
    build_records,
    partition_by_agreement,
)
from mvpseudo.errors import CoverageMismatch, DuplicateItem, InvalidInput, UnknownClass
from mvpseudo.linguistic import PredictionSet, group_predictions, label_corpus, majority_vote

CLASSES = ("A", "B", "C", "D")


def _votes(*labels):
    return {f"p{i}": lab for i, lab in enumerate(labels)}


class TestMajorityVote:
    @pytest.mark.parametrize(
        "votes, want",
        [(("A", "A", "B"), "A"), (("A", "B", "C"), None), (("A", "A", "A"), "A"),
         (("A", "B"), None), (("B", "A", "B", "A", "B"), "B")],
    )
    def test_examples(self, votes, want):
        assert majority_vote(PredictionSet("x", _votes(*votes)), CLASSES) == want

    def test_unknown_label(self):
        with pytest.raises(UnknownClass):
            majority_vote(PredictionSet("x", _votes("A", "Z")), CLASSES)

    def test_empty_votes(self):
        with pytest.raises(InvalidInput):
            PredictionSet("x", {})

    def test_predictor_count(self):
        assert PredictionSet("x", _votes("A", "B", "C")).predictor_count == 3

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(CLASSES), min_size=1, max_size=7), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, labels, rnd):
        shuffled = labels[:]
        rnd.shuffle(shuffled)
        assert majority_vote(PredictionSet("x", _votes(*labels))) == majority_vote(
            PredictionSet("x", _votes(*shuffled))
        )

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(CLASSES), min_size=1, max_size=7))
    def test_extra_vote_for_winner_keeps_winner(self, labels):
        winner = majority_vote(PredictionSet("x", _votes(*labels)))
        if winner is not None:
            assert majority_vote(PredictionSet("x", _votes(*labels, winner))) == winner

    @pytest.mark.parametrize("n", [1, 3, 5, 7])
    def test_odd_count_two_labels_always_resolves(self, n):
        for combo in itertools.product("AB", repeat=n):
            assert majority_vote(PredictionSet("x", _votes(*combo))) is not None


class TestLabelCorpus:
    def test_resolved_and_tied(self):
        preds = [PredictionSet("u1", _votes("A", "A", "A")), PredictionSet("u2", _votes("A", "B", "C"))]
        assert label_corpus(preds, CLASSES) == {"u1": "A", "u2": None}

    def test_three_unanimous(self):
        preds = [PredictionSet(f"u{i}", _votes(c, c, c)) for i, c in enumerate("ABC")]
        assert list(label_corpus(preds).values()) == ["A", "B", "C"]

    def test_empty(self):
        assert label_corpus([]) == {}

    def test_duplicate_item(self):
        p = PredictionSet("u1", _votes("A"))
        with pytest.raises(DuplicateItem):
            label_corpus([p, p])

    def test_group_predictions(self):
        rows = [("u2", "p0", "A"), ("u1", "p0", "B"), ("u2", "p1", "C")]
        grouped = group_predictions(rows)
        assert [g.item_id for g in grouped] == ["u2", "u1"]
        assert grouped[0].votes == {"p0": "A", "p1": "C"}
        with pytest.raises(DuplicateItem):
            group_predictions(rows + [("u1", "p0", "A")])


class TestPartition:
    def test_mismatch_is_unconfident(self):
        part = partition_by_agreement({"x": "A", "y": "B"}, {"x": "A", "y": "C"}, {})
        assert part.confident == {"x": "A"}
        assert part.unconfident == ("y",)

    def test_full_agreement(self):
        labels = {f"u{i}": CLASSES[i % 4] for i in range(8)}
        part = partition_by_agreement(labels, dict(labels), {})
        assert part.unconfident == () and part.confident == labels

    def test_no_consensus_never_confident(self):
        part = partition_by_agreement({"x": "A", "y": "B"}, {"x": None, "y": None}, {"s": "C"})
        assert part.confident == {}
        assert set(part.unconfident) == {"x", "y"}

    def test_seed_passes_through(self):
        part = partition_by_agreement({"s": "B", "x": "A"}, {"s": "B", "x": "A"}, {"s": "C"})
        assert part.labeled_seed == {"s": "C"}
        assert "s" not in part.confident and "s" not in part.unconfident

    def test_coverage_mismatch(self):
        with pytest.raises(CoverageMismatch):
            partition_by_agreement({"x": "A"}, {"y": "A"}, {})

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            ConfidencePartition({"x": "A"}, {"x": "A"}, ())

    @settings(max_examples=200, deadline=None)
    @given(
        st.dictionaries(
            st.text("abcdefgh", min_size=1, max_size=3),
            st.tuples(st.sampled_from(CLASSES), st.one_of(st.none(), st.sampled_from(CLASSES)), st.booleans()),
            max_size=20,
        )
    )
    def test_disjoint_exhaustive_and_sound(self, cases):
        acoustic = {k: v[0] for k, v in cases.items()}
        linguistic = {k: v[1] for k, v in cases.items()}
        seed = {k: v[0] for k, v in cases.items() if v[2]}
        part = partition_by_agreement(acoustic, linguistic, seed)
        assert part.pool == set(cases)
        assert len(part.labeled_seed) + len(part.confident) + len(part.unconfident) == len(cases)
        for item, label in part.confident.items():
            assert acoustic[item] == linguistic[item] == label

    @settings(max_examples=100, deadline=None)
    @given(
        st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                        st.tuples(st.sampled_from(CLASSES), st.sampled_from(CLASSES)), min_size=1, max_size=15),
        st.data(),
    )
    def test_confident_count_non_increasing_in_no_consensus(self, cases, data):
        acoustic = {k: v[0] for k, v in cases.items()}
        linguistic = {k: v[1] for k, v in cases.items()}
        base = len(partition_by_agreement(acoustic, linguistic, {}).confident)
        dropped = data.draw(st.sets(st.sampled_from(sorted(cases))))
        worse = {k: (None if k in dropped else v) for k, v in linguistic.items()}
        assert len(partition_by_agreement(acoustic, worse, {}).confident) <= base


class TestRecords:
    def test_status_matches_agreement(self):
        acoustic = {"x": "A", "y": "B", "z": "C"}
        linguistic = {"x": "A", "y": "C", "z": None}
        part = partition_by_agreement(acoustic, linguistic, {})
        recs = build_records(acoustic, linguistic, part)
        assert recs["x"].status == CONFIDENT and recs["x"].sources_agree
        assert recs["y"].status == UNCONFIDENT and recs["z"].status == UNCONFIDENT

    def test_match_and_promote(self):
        r = PseudoLabelRecord("y", "B", "C")
        assert r.matches("B") and r.matches("C") and not r.matches("A")
        p = r.promote("C")
        assert p.status == CONFIDENT and p.model_label == "C"
        assert not PseudoLabelRecord("z", "B", None).matches("A")
