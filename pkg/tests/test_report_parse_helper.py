import json
from datetime import date

import pytest

from petgrid.pyscripts.helpers.report_parse_helper import (
    UNKNOWN,
    AnatomyLexicon,
    LesionRecord,
    LexiconEntry,
    MeasurementPatterns,
    ReportParseHelper,
    Sentence,
    default_lexicon,
    detect_tracer,
    extract_measurements,
    filter_candidate,
    flag_prior_reference,
    read_records,
    split_sentences,
    to_record,
    write_records,
)
from petgrid.pyscripts.types.errors import NoPairFound
from petgrid.pyscripts.types.report_format import ReportFormat
from petgrid.pyscripts.types.tracer import Tracer

from .conftest import FIXTURES_DIR


def _s(text: str, index: int = 0) -> Sentence:
    return Sentence(text=text, exam_id="exam", index=index)


def _labeled_sentences() -> list[dict]:
    with open(FIXTURES_DIR / "labeled_sentences.jsonl", "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


class TestLabeledFixture:
    def test_candidate_agreement(self):
        rows = _labeled_sentences()
        assert len(rows) == 50
        agree = sum(filter_candidate(_s(row["text"])) == row["candidate"] for row in rows)
        assert agree >= 48

    def test_extraction_exact_on_labeled_candidates(self):
        for row in _labeled_sentences():
            if not row["candidate"]:
                continue
            pairs = [(m.suv_max, m.slice_number) for m in extract_measurements(_s(row["text"]))]
            assert pairs == [tuple(p) for p in row["pairs"]], row["text"]

    def test_prior_reference_precision(self):
        flagged = [row for row in _labeled_sentences() if row["candidate"] and flag_prior_reference(_s(row["text"]))]
        assert flagged
        precision = sum(row["prior"] for row in flagged) / len(flagged)
        assert precision >= 0.9

    def test_prior_reference_recall(self):
        rows = _labeled_sentences()
        prior = [row for row in rows if row["prior"]]
        assert prior
        recall = sum(flag_prior_reference(_s(row["text"])) for row in prior) / len(prior)
        assert recall >= 0.8


class TestSentence:
    def test_whitespace_normalized(self):
        assert _s("  SUV max\t5.0,\n slice 3. ").text == "SUV max 5.0, slice 3."

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            _s("   ")


class TestMeasurements:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("Right hilar node, SUV max 8.4, slice 152.", [(8.4, 152)]),
            ("Slice 40: left adrenal nodule, SUVmax 3.1.", [(3.1, 40)]),
            ("SUV max 5.0 on image 10 and SUV max 6.0 on image 20.", [(5.0, 10), (6.0, 20)]),
            ("SUV max 5.0 and SUV max 6.0, slice 10.", [(6.0, 10)]),
        ],
    )
    def test_pairing(self, text, expected):
        assert [(m.suv_max, m.slice_number) for m in extract_measurements(_s(text))] == expected

    def test_spans_cover_both_mentions(self):
        text = "Node with SUV max 8.4 on slice 152."
        (measurement,) = extract_measurements(_s(text))
        start, end = measurement.span
        assert text[start:end] == "SUV max 8.4 on slice 152"

    def test_zero_values_are_not_mentions(self):
        assert not filter_candidate(_s("SUV max 0, slice 12."))
        assert not filter_candidate(_s("SUV max 4.0, slice 0."))

    def test_suv_without_slice(self):
        assert not filter_candidate(_s("Rectum shows SUV max 3.4."))
        with pytest.raises(NoPairFound):
            extract_measurements(_s("Rectum shows SUV max 3.4."))

    def test_prior_sentence_without_slice_is_not_a_candidate(self):
        s = _s("SUV max previously 5.2 on prior study.")
        assert not filter_candidate(s)
        assert flag_prior_reference(s)


class TestPriorReference:
    def test_cue_words(self):
        assert flag_prior_reference(_s("Compared with the prior study, SUV max 4.0, slice 10."))
        assert not flag_prior_reference(_s("Right hilar node, SUV max 4.0, slice 10."))

    def test_dates_against_exam_date(self):
        sentence = _s("Right hilar node on 03/02/2024, SUV max 4.0, slice 10.")
        assert not flag_prior_reference(sentence)
        assert flag_prior_reference(sentence, exam_date=date(2024, 5, 1))
        assert not flag_prior_reference(sentence, exam_date=date(2024, 1, 1))
        assert flag_prior_reference(_s("Seen on 2023-11-30, SUV 4.0, slice 10."), exam_date=date(2024, 5, 1))


class TestLexicon:
    def test_longest_term_wins(self):
        entry = default_lexicon().lookup("Right hilar lymph node, SUV max 8.4, slice 152.")
        assert entry.term == "right hilar lymph node"
        assert entry.anatomic_subsite == "right hilum"

    def test_plural_and_case(self):
        assert default_lexicon().lookup("MEDIASTINAL NODES are avid.").term == "mediastinal node"

    def test_equal_length_earliest_position(self):
        lexicon = AnatomyLexicon(
            [
                LexiconEntry("liver", "abdomen", "liver", "liver"),
                LexiconEntry("colon", "abdomen", "colon", "colon"),
            ]
        )
        assert lexicon.lookup("liver and colon").term == "liver"
        assert lexicon.lookup("colon and liver").term == "colon"
        assert lexicon.lookup("nothing here") is None

    def test_from_tsv(self, tmp_path):
        path = tmp_path / "lexicon.tsv"
        path.write_text("term\tregion\torgan\tanatomic_subsite\nspleen\tabdomen\tspleen\tspleen\n", encoding="utf-8")
        lexicon = AnatomyLexicon.from_tsv(path)
        assert len(lexicon) == 1
        assert lexicon.lookup("Splenic tip and spleen").organ == "spleen"


class TestRecords:
    def test_to_record_anatomy(self):
        sentence = _s("Left axillary node, SUV max 5.6, slice 88.", index=3)
        (pair,) = extract_measurements(sentence)
        record = to_record(sentence, pair)
        assert (record.region, record.organ, record.anatomic_subsite) == ("chest", "lymph node", "left axilla")
        assert record.slice_index == 87
        assert record.sentence_index == 3
        assert not record.is_prior_reference

    def test_unknown_anatomy(self):
        sentence = _s("Focus with SUV max 3.0, slice 4.")
        record = to_record(sentence, extract_measurements(sentence)[0])
        assert record.region == record.organ == record.anatomic_subsite == UNKNOWN

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            LesionRecord("chest", "lung", "lung", "x", 0.0, 3, "exam", False, 0)
        with pytest.raises(ValueError):
            LesionRecord("chest", "lung", "lung", "x", 2.0, 0, "exam", False, 0)

    def test_jsonl_round_trip_and_strict_keys(self, tmp_path):
        record = LesionRecord("chest", "lung", "lung", "Lung SUV 2.0 slice 3.", 2.0, 3, "exam", True, 1)
        path = tmp_path / "records.jsonl"
        assert write_records(path, [record]) == 1
        assert read_records(path) == [record]

        row = record.to_dict()
        row["extra"] = 1
        with pytest.raises(ValueError):
            LesionRecord.from_dict(row)


class TestSplitAndTracer:
    def test_lines_format(self):
        assert split_sentences("First line.\n\n  Second line  \n", ReportFormat.LINES) == ["First line.", "Second line"]

    def test_raw_format(self):
        text = "Liver SUV max 5.0, slice 10. Spleen normal.\nSee Dr. smith for details."
        assert split_sentences(text, ReportFormat.RAW) == [
            "Liver SUV max 5.0, slice 10.",
            "Spleen normal.",
            "See Dr. smith for details.",
        ]

    @pytest.mark.parametrize(
        "text, tracer",
        [
            ("FDG PET/CT skull base to thigh.", Tracer.FDG),
            ("Ga-68 DOTATATE PET.", Tracer.DOTATATE),
            ("PSMA PET for rising PSA.", Tracer.DCFPYL),
            ("Axumin study.", Tracer.FLUCICLOVINE),
            ("PET/CT.", Tracer.UNKNOWN),
        ],
    )
    def test_detect_tracer(self, text, tracer):
        assert detect_tracer(text) == tracer


class TestPatterns:
    def test_value_group_required(self, tmp_path):
        path = tmp_path / "patterns.yml"
        path.write_text("version: 2\nsuv:\n  - 'SUV (\\d+)'\n", encoding="utf-8")
        with pytest.raises(ValueError):
            MeasurementPatterns.from_yaml(path)


class TestReportParseHelper:
    def test_parse_text(self):
        text = "\n".join(
            [
                "FDG PET/CT.",
                "Right hilar node, SUV max 8.4, slice 152.",
                "Liver lesion previously SUV max 6.0, slice 120.",
                "No other findings.",
            ]
        )
        parsed = ReportParseHelper().parse_text("exam1", text)
        assert parsed.tracer == Tracer.FDG
        assert len(parsed.sentences) == 4
        assert parsed.candidate_indices == [1, 2]
        assert parsed.unpaired_indices == []
        assert [r.is_prior_reference for r in parsed.records] == [False, True]
        assert all(r.exam_id == "exam1" for r in parsed.records)

    def test_process_directory(self, tmp_path):
        (tmp_path / "b.txt").write_text("Spleen, SUV max 3.0, slice 7.\n", encoding="utf-8")
        (tmp_path / "a.txt").write_text("Liver, SUV max 4.0, slice 9.\n", encoding="utf-8")
        (tmp_path / "notes.md").write_text("SUV max 9.0, slice 1.\n", encoding="utf-8")
        parsed = ReportParseHelper().process_directory(str(tmp_path))
        assert [p.exam_id for p in parsed] == ["a", "b"]
        assert [p.records[0].organ for p in parsed] == ["liver", "spleen"]
