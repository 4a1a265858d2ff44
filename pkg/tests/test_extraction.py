from __future__ import annotations

import pytest

from docie.core import BBox, Segment, cord_schema
from docie.extraction import (
    ParsedEntity,
    align_predictions,
    parse_labeled_segments,
    parse_query_entries,
    parse_sroie_grouped,
)

TABLE_RECORD = '{text:"ACUTE TOXICITY IN MICE",Box:[295 56 512 79],entity:header}'

SROIE_GROUPED = (
    '{"KEDAI PAPAN YEW CHUAN"}.\n'
    '{"LOT 276 JALAN BANTING"}{"43800 DENGKIL, SELANGOR."}.\n'
    '{"283.55"}.\n'
    '{"12/03/2018"}.\n'
)


class TestParseLabeledSegments:
    def test_single_record(self):
        entities, diagnostics = parse_labeled_segments(TABLE_RECORD)
        assert diagnostics == []
        assert entities == [
            ParsedEntity(
                "ACUTE TOXICITY IN MICE", BBox(295, 56, 512, 79), "header", (0, len(TABLE_RECORD))
            )
        ]

    def test_empty_string(self):
        assert parse_labeled_segments("") == ([], [])

    def test_malformed_box_skips_record_and_continues(self):
        raw = '{text:"X",Box:[1 2 3],entity:q}{text:"Y",Box:[1 2 3 4],entity:answer}'
        entities, diagnostics = parse_labeled_segments(raw)
        assert [e.text for e in entities] == ["Y"]
        assert [d.code for d in diagnostics] == ["MalformedBox"]

    def test_escaped_quotes_survive(self):
        raw = '{text:"SAY \\"HI\\" NOW",Box:[1 2 3 4],entity:other}'
        entities, _ = parse_labeled_segments(raw)
        assert entities[0].text == 'SAY \\"HI\\" NOW'

    def test_whitespace_inside_box_tolerated(self):
        raw = '{text:"A",Box:[ 295  56 512 79 ],entity:header}'
        entities, diagnostics = parse_labeled_segments(raw)
        assert entities[0].box == BBox(295, 56, 512, 79)
        assert diagnostics == []

    def test_unlabeled_records_skipped_silently(self):
        raw = '{text:"A",Box:[1 2 3 4]}{text:"B",Box:[5 6 7 8],entity:other}'
        entities, diagnostics = parse_labeled_segments(raw)
        assert [e.text for e in entities] == ["B"]
        assert diagnostics == []

    def test_out_of_range_box_keeps_entity_without_box(self):
        raw = '{text:"BIG",Box:[1598 2761 2305 2855],entity:other}'
        entities, diagnostics = parse_labeled_segments(raw)
        assert entities[0].box is None
        assert [d.code for d in diagnostics] == ["InvalidBox"]

    def test_unparsed_fragment_reported(self):
        raw = '{text:"broken...'
        entities, diagnostics = parse_labeled_segments(raw)
        assert entities == []
        assert [d.code for d in diagnostics] == ["UnparsedFragment"]

    def test_surrounding_prose_is_ignored(self):
        raw = "Sure! Here are the labels:\n" + TABLE_RECORD + ".\nHope that helps."
        entities, diagnostics = parse_labeled_segments(raw)
        assert len(entities) == 1
        assert diagnostics == []


class TestParseQueryEntries:
    def test_reads_text_box_pairs(self):
        raw = '{text:"A",Box:[1 2 3 4]}{text:"B",Box:[5 6 7 8],entity:x}'
        assert parse_query_entries(raw) == [
            ("A", BBox(1, 2, 3, 4)),
            ("B", BBox(5, 6, 7, 8)),
        ]


class TestParseSroieGrouped:
    def test_four_groups_map_to_fields(self):
        answer, diagnostics = parse_sroie_grouped(SROIE_GROUPED)
        assert diagnostics == []
        assert answer.company == ("KEDAI PAPAN YEW CHUAN",)
        assert answer.address == ("LOT 276 JALAN BANTING", "43800 DENGKIL, SELANGOR.")
        assert answer.total == ("283.55",)
        assert answer.date == ("12/03/2018",)

    def test_all_empty_groups(self):
        answer, diagnostics = parse_sroie_grouped("....")
        assert answer.company == answer.address == answer.total == answer.date == ()
        assert diagnostics == []

    def test_extra_group_reported(self):
        raw = SROIE_GROUPED + '{"SPURIOUS"}.\n'
        answer, diagnostics = parse_sroie_grouped(raw)
        assert answer.date == ("12/03/2018",)
        assert [d.code for d in diagnostics] == ["ExtraGroup"]

    def test_missing_groups_reported(self):
        answer, diagnostics = parse_sroie_grouped('{"ONLY COMPANY"}.')
        assert answer.company == ("ONLY COMPANY",)
        assert answer.total == ()
        assert [d.code for d in diagnostics] == ["MissingGroup"]

    def test_keyword_variant_detected(self):
        raw = (
            'company: {"STAR GROCER"}\n'
            'address: {"NO 4 DESA PANDAN"}{"55100 KUALA LUMPUR"}\n'
            'total: {"66.15"}\n'
            'date: {"25/03/18"}\n'
        )
        answer, diagnostics = parse_sroie_grouped(raw)
        assert "KeywordMode" in [d.code for d in diagnostics]
        assert answer.company == ("STAR GROCER",)
        assert answer.address == ("NO 4 DESA PANDAN", "55100 KUALA LUMPUR")
        assert answer.total == ("66.15",)
        assert answer.date == ("25/03/18",)


def _chunk():
    return [
        Segment("d:0", "NAME:", BBox(10, 10, 60, 20), gold_label="question"),
        Segment("d:1", "J. DOE", BBox(80, 10, 140, 20), gold_label="answer"),
        Segment("d:2", "DRAFT", BBox(400, 900, 500, 930), gold_label="other"),
    ]


def _entity(text, box, label):
    return ParsedEntity(text, box, label, (0, 0))


class TestAlignPredictions:
    def test_verbatim_echo_aligns_everything(self, schema):
        chunk = _chunk()
        entities = [_entity(s.text, s.box, s.gold_label) for s in chunk]
        labeled, diagnostics = align_predictions(entities, chunk, schema)
        assert diagnostics == []
        assert [s.predicted_label for s in labeled] == ["question", "answer", "other"]

    def test_omitted_segment_degrades_to_other(self, schema):
        chunk = _chunk()
        entities = [_entity(s.text, s.box, s.gold_label) for s in chunk[:2]]
        labeled, diagnostics = align_predictions(entities, chunk, schema)
        assert [d.code for d in diagnostics] == ["Unmatched"]
        assert labeled[2].predicted_label == "other"

    def test_wrong_but_known_label_is_kept(self):
        # an in-schema mistake is a wrong prediction, not an unknown token
        schema = cord_schema()
        segment = Segment("d:0", "PAKET SLICES", BBox(310, 405, 460, 425), gold_label="MENU.SUB_NM")
        entities = [_entity(segment.text, segment.box, "MENU.SUB_ETC")]
        labeled, diagnostics = align_predictions(entities, [segment], schema)
        assert labeled[0].predicted_label == "MENU.SUB_ETC"
        assert diagnostics == []

    def test_unknown_label_degrades_with_diagnostic(self, schema):
        chunk = _chunk()[:1]
        entities = [_entity(chunk[0].text, chunk[0].box, "banana")]
        labeled, diagnostics = align_predictions(entities, chunk, schema)
        assert labeled[0].predicted_label == "other"
        assert [d.code for d in diagnostics] == ["UnknownLabel"]

    def test_box_tolerance_of_two_units(self, schema):
        chunk = _chunk()[:1]
        close = BBox(12, 8, 62, 22)  # off by 2 on every coordinate
        labeled, diagnostics = align_predictions(
            [_entity("NAME:", close, "question")], chunk, schema
        )
        assert labeled[0].predicted_label == "question"
        assert diagnostics == []

    def test_box_off_by_three_fails_to_match(self, schema):
        chunk = _chunk()[:1]
        far = BBox(13, 10, 63, 20)
        labeled, diagnostics = align_predictions(
            [_entity("NAME:", far, "question")], chunk, schema
        )
        assert labeled[0].predicted_label == "other"
        assert "Unmatched" in [d.code for d in diagnostics]

    def test_predictions_must_not_predecide(self, schema):
        chunk = [_chunk()[0].with_predicted_label("other")]
        with pytest.raises(ValueError):
            align_predictions([], chunk, schema)

    def test_every_segment_gets_a_label(self, schema):
        labeled, _ = align_predictions([], _chunk(), schema)
        assert all(s.predicted_label is not None for s in labeled)
