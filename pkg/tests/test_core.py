from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from docie.core import (
    BBox,
    Document,
    Segment,
    cord_schema,
    funsd_schema,
    normalize_box,
    normalize_text,
    schema_for,
    sroie_schema,
    validate_document,
)
from docie.errors import DegenerateBoxError, OutOfBoundsError


def boxes():
    coords = st.integers(min_value=0, max_value=1000)
    return st.builds(
        lambda x0, y0, dx, dy: BBox(x0, y0, min(1000, x0 + dx), min(1000, y0 + dy)),
        coords,
        coords,
        st.integers(min_value=0, max_value=400),
        st.integers(min_value=0, max_value=400),
    )


class TestNormalizeBox:
    def test_full_page_is_identity(self):
        assert normalize_box([0, 0, 850, 1100], 850, 1100) == BBox(0, 0, 1000, 1000)

    def test_grid_coordinates_pass_through(self):
        # a box already on the grid survives normalization untouched
        assert normalize_box([84, 53, 112, 67], 1000, 1000) == BBox(84, 53, 112, 67)

    def test_hand_computed_scaling(self):
        # x halves (page 2000 wide), y unchanged (page 1000 tall)
        assert normalize_box([100, 50, 300, 150], 2000, 1000) == BBox(50, 50, 150, 150)

    def test_rounding_is_half_up(self):
        # 1*1000/2000 = 0.5 -> 1 and 3*1000/2000 = 1.5 -> 2
        assert normalize_box([1, 0, 3, 0], 2000, 1000) == BBox(1, 0, 2, 0)

    def test_negative_coordinate_rejected(self):
        with pytest.raises(OutOfBoundsError):
            normalize_box([-1, 0, 10, 10], 100, 100)

    def test_coordinate_beyond_page_rejected(self):
        with pytest.raises(OutOfBoundsError):
            normalize_box([0, 0, 101, 10], 100, 100)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateBoxError):
            normalize_box([50, 0, 10, 10], 100, 100)

    def test_bad_page_dimensions_rejected(self):
        with pytest.raises(ValueError):
            normalize_box([0, 0, 1, 1], 0, 100)

    @given(boxes())
    def test_idempotent_on_grid_pages(self, box):
        raw = [box.x0, box.y0, box.x1, box.y1]
        assert normalize_box(raw, 1000, 1000) == box


class TestBBox:
    @given(boxes())
    def test_render_parse_round_trip(self, box):
        assert BBox.parse(box.render()) == box

    def test_render_format(self):
        assert BBox(84, 53, 112, 67).render() == "[84 53 112 67]"

    def test_invariants_enforced(self):
        with pytest.raises(OutOfBoundsError):
            BBox(0, 0, 1001, 5)
        with pytest.raises(DegenerateBoxError):
            BBox(10, 0, 5, 5)


class TestNormalizeText:
    def test_collapses_whitespace_and_controls(self):
        assert normalize_text("A \t B\n\nC\x00D") == "A B C D"

    def test_escapes_bare_quotes(self):
        assert normalize_text('SAY "HI"') == 'SAY \\"HI\\"'

    def test_idempotent(self):
        once = normalize_text('A  "B"  C')
        assert normalize_text(once) == once


class TestValidateDocument:
    def _doc(self, segments):
        return Document("d0", "FUNSD", "train", tuple(segments))

    def test_well_formed_document_is_clean(self, fixture_corpus, schema):
        train, _ = fixture_corpus
        for doc in train:
            assert validate_document(doc, schema) == []

    def test_duplicate_id_reported(self, schema):
        seg = Segment("d0:0", "HELLO", BBox(0, 0, 10, 10), gold_label="other")
        report = validate_document(self._doc([seg, seg]), schema)
        assert [v.code for v in report] == ["DuplicateId"]
        assert report[0].segment_id == "d0:0"

    def test_unknown_label_reported(self, schema):
        seg = Segment("d0:0", "HELLO", BBox(0, 0, 10, 10), gold_label="questoin")
        report = validate_document(self._doc([seg]), schema)
        assert [v.code for v in report] == ["UnknownLabel"]

    def test_unescaped_quote_reported(self, schema):
        seg = Segment("d0:0", 'BAD " TEXT', BBox(0, 0, 10, 10), gold_label="other")
        report = validate_document(self._doc([seg]), schema)
        assert [v.code for v in report] == ["InvalidText"]

    def test_pure(self, fixture_corpus, schema):
        train, _ = fixture_corpus
        assert validate_document(train[0], schema) == validate_document(train[0], schema)


class TestSchemas:
    def test_funsd_is_natural(self):
        schema = funsd_schema()
        assert schema.is_natural()
        assert schema.labels == ("question", "answer", "header", "other")
        assert schema.prompt_labels() == schema.labels

    def test_sroie_prompt_hides_other(self):
        schema = sroie_schema()
        assert schema.other_label in schema.labels
        assert schema.prompt_labels() == ("company", "address", "date", "total")

    def test_cord_has_thirty_entity_labels(self):
        schema = cord_schema()
        assert len([l for l in schema.labels if l != "other"]) == 30
        assert schema.descriptions["MENU.NM"] == "name of menu"
        assert not schema.is_natural()

    def test_schema_lookup(self):
        assert schema_for("funsd").dataset == "FUNSD"
        with pytest.raises(ValueError):
            schema_for("nope")
