from __future__ import annotations

import math

import pytest

from docie.core import BBox, Document, Segment
from docie.perturb import (
    PerturbSpec,
    delete_char,
    load_lexicon,
    perturb_document,
    save_lexicon,
)


def word_fixture(n_words: int = 100, word: str = "name") -> Document:
    # many identical eligible words spread over a few segments
    per_segment = 10
    segments = []
    for index in range(n_words // per_segment):
        segments.append(
            Segment(
                f"w:{index}",
                " ".join(word for _ in range(per_segment)),
                BBox(10, min(10 + index * 30, 950), 400, min(30 + index * 30, 970)),
                gold_label="other",
            )
        )
    return Document("w", "FUNSD", "test", tuple(segments), ordered=True)


def binomial_interval(n: int, p: float, confidence: float = 0.99) -> tuple[int, int]:
    """Exact central interval from the binomial pmf; independent of the code under test."""
    pmf = [math.comb(n, k) * (p**k) * ((1 - p) ** (n - k)) for k in range(n + 1)]
    tail = (1 - confidence) / 2
    lower, acc = 0, 0.0
    while acc + pmf[lower] < tail:
        acc += pmf[lower]
        lower += 1
    upper, acc = n, 0.0
    while acc + pmf[upper] < tail:
        acc += pmf[upper]
        upper -= 1
    return lower, upper


class TestDeleteChar:
    def test_name_becomes_nme(self):
        assert delete_char("name", 1) == "nme"

    def test_never_first_character(self):
        with pytest.raises(ValueError):
            delete_char("name", 0)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            delete_char("ab", 2)


class TestPerturbDocument:
    def test_zero_probabilities_are_identity(self, fixture_corpus):
        train, _ = fixture_corpus
        spec = PerturbSpec(seed=1, p_char_delete=0.0, p_substitute=0.0)
        perturbed, events = perturb_document(train[0], spec)
        assert perturbed == train[0]
        assert events == []

    def test_forced_deletion_reproduces_known_typo(self):
        doc = Document(
            "n",
            "FUNSD",
            "test",
            (Segment("n:0", "name", BBox(10, 10, 50, 20), gold_label="other"),),
            ordered=True,
        )
        # deletion always fires; scan seeds until the second character drops
        for seed in range(200):
            spec = PerturbSpec(seed=seed, p_char_delete=1.0, p_substitute=0.0)
            perturbed, events = perturb_document(doc, spec)
            if perturbed.segments[0].text == "nme":
                assert events[0].kind == "delete"
                assert events[0].before == "name"
                assert events[0].after == "nme"
                break
        else:
            pytest.fail("no seed produced the documented deletion")

    def test_substitution_comes_from_table(self):
        doc = Document(
            "s",
            "FUNSD",
            "test",
            (Segment("s:0", "corner", BBox(10, 10, 80, 20), gold_label="other"),),
            ordered=True,
        )
        spec = PerturbSpec(seed=0, p_substitute=1.0, p_char_delete=0.0)
        perturbed, events = perturb_document(doc, spec)
        assert perturbed.segments[0].text == "comer"
        assert events[0].kind == "substitute"

    def test_structure_preserved(self, fixture_corpus):
        train, _ = fixture_corpus
        spec = PerturbSpec(seed=3, p_char_delete=0.5, p_substitute=0.3)
        for doc in train:
            perturbed, _ = perturb_document(doc, spec)
            assert perturbed.doc_id == doc.doc_id
            assert perturbed.ordered == doc.ordered
            assert [s.id for s in perturbed.segments] == [s.id for s in doc.segments]
            assert [s.box for s in perturbed.segments] == [s.box for s in doc.segments]
            assert [s.gold_label for s in perturbed.segments] == [
                s.gold_label for s in doc.segments
            ]

    def test_no_word_shrinks_below_one_character(self):
        doc = word_fixture(100, word="abc")
        spec = PerturbSpec(seed=5, p_char_delete=1.0, p_substitute=0.0, min_word_len=2)
        perturbed, _ = perturb_document(doc, spec)
        for segment in perturbed.segments:
            assert all(len(word) >= 1 for word in segment.text.split(" "))

    def test_deterministic_for_fixed_seed(self):
        doc = word_fixture()
        spec = PerturbSpec(seed=11, p_char_delete=0.2, p_substitute=0.3)
        first, first_events = perturb_document(doc, spec)
        second, second_events = perturb_document(doc, spec)
        assert first == second
        assert first_events == second_events

    def test_perturbed_count_within_binomial_bounds(self):
        # every word is in the table, so each eligible word perturbs with
        # probability p_substitute + p_char_delete = 0.5
        doc = word_fixture(100)
        spec = PerturbSpec(
            seed=7, p_substitute=0.3, p_char_delete=0.2, substitution_table={"name": "namex"}
        )
        _, events = perturb_document(doc, spec)
        lower, upper = binomial_interval(100, 0.5)
        assert lower <= len(events) <= upper

    def test_at_most_one_perturbation_per_word(self):
        doc = word_fixture(50)
        spec = PerturbSpec(
            seed=13, p_substitute=0.5, p_char_delete=0.5, substitution_table={"name": "namex"}
        )
        _, events = perturb_document(doc, spec)
        touched = [(event.segment_id, event.word_index) for event in events]
        assert len(touched) == len(set(touched))

    def test_short_words_never_touched(self):
        doc = word_fixture(50, word="ab")
        spec = PerturbSpec(seed=17, p_substitute=1.0, p_char_delete=1.0, min_word_len=3)
        perturbed, events = perturb_document(doc, spec)
        assert perturbed == doc
        assert events == []


class TestLexiconFile:
    def test_round_trip(self, tmp_path):
        table = {"name": "nme", "corner": "comer"}
        path = tmp_path / "lexicon.tsv"
        save_lexicon(table, path)
        assert load_lexicon(path) == table

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("word-without-tab\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_lexicon(path)

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("# comment\n\nname\tnme\n", encoding="utf-8")
        assert load_lexicon(path) == {"name": "nme"}
