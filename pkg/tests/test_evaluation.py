import numpy as np
import pytest

from clintag.evaluation import (
    AlignmentError,
    binary_eval,
    bioes_level_eval,
    confusion,
    entity_level_eval,
    evaluate_all,
    render_report,
    token_level_eval,
)
from clintag.labels import CATEGORIES, LABELS, Category, parse_label
from fixtures import HAND_SCORES, gold_sequences, pred_sequences


def seq(*labels: str):
    return [parse_label(l) for l in labels]


class TestEntityLevel:
    def test_perfect_prediction(self):
        gold = [seq("B-Drug", "E-Drug", "O", "S-ADE")]
        report = entity_level_eval(gold, gold)
        assert (report.precision, report.recall, report.f1, report.acc) == (1, 1, 1, 1)
        assert report.corr == 2

    def test_boundary_error_counts_as_miss(self):
        gold = [seq("B-Drug", "E-Drug", "O", "B-Strength", "E-Strength")]
        pred = [seq("B-Drug", "E-Drug", "O", "S-Strength", "O")]
        report = entity_level_eval(gold, pred)
        assert report.corr == 1
        drug = report.per_category[Category.DRUG]
        strength = report.per_category[Category.STRENGTH]
        assert (drug.precision, drug.recall) == (1.0, 1.0)
        assert (strength.precision, strength.recall) == (0.0, 0.0)
        assert report.precision == pytest.approx(0.5)
        assert report.recall == pytest.approx(0.5)

    def test_hand_scored_fixture(self):
        report = entity_level_eval(gold_sequences(), pred_sequences())
        expected = HAND_SCORES["entity"]
        assert report.acc == pytest.approx(float(expected["acc"]), abs=1e-15)
        assert report.precision == pytest.approx(float(expected["precision"]), abs=1e-15)
        assert report.recall == pytest.approx(float(expected["recall"]), abs=1e-15)
        assert report.f1 == pytest.approx(float(expected["f1"]), abs=1e-15)
        assert report.corr == expected["corr"]
        for category in CATEGORIES:
            row = report.per_category[category]
            p, r, f1, found = expected["per_category"][category.value]
            assert row.precision == pytest.approx(float(p), abs=1e-15)
            assert row.recall == pytest.approx(float(r), abs=1e-15)
            assert row.f1 == pytest.approx(float(f1), abs=1e-15)
            assert row.found == found

    def test_lenient_decoding_scores_ungrammatical_predictions(self):
        gold = [seq("B-Drug", "E-Drug")]
        pred = [seq("I-Drug", "I-Drug")]  # repaired to Drug[0,2)
        report = entity_level_eval(gold, pred)
        assert report.corr == 1

    def test_alignment_error_names_sentence(self):
        with pytest.raises(AlignmentError, match="sentence 1"):
            entity_level_eval([seq("O"), seq("O", "O")], [seq("O"), seq("O")])

    def test_sentence_count_mismatch(self):
        with pytest.raises(AlignmentError):
            entity_level_eval([seq("O")], [])


class TestTokenLevel:
    def test_prefix_insensitive_matching(self):
        gold = [seq("B-Drug", "E-Drug")]
        pred = [seq("S-Drug", "O")]
        report = token_level_eval(gold, pred)
        assert report[Category.DRUG].precision == pytest.approx(1.0)
        assert report[Category.DRUG].recall == pytest.approx(0.5)

    def test_identical_sequences_are_perfect(self):
        gold = [seq("B-Drug", "E-Drug", "S-ADE", "O")]
        report = token_level_eval(gold, gold)
        assert report[Category.DRUG] == report[Category.DRUG].__class__(1.0, 1.0, 1.0, 2)
        assert report[Category.ADE].f1 == 1.0

    def test_all_outside_prediction_degenerates_to_zero(self):
        gold = [seq("S-Drug", "B-ADE", "E-ADE")]
        pred = [seq("O", "O", "O")]
        report = token_level_eval(gold, pred)
        for category in (Category.DRUG, Category.ADE):
            assert report[category].precision == 0.0
            assert report[category].recall == 0.0
            assert report[category].f1 == 0.0

    def test_hand_scored_fixture(self):
        report = token_level_eval(gold_sequences(), pred_sequences())
        for category in CATEGORIES:
            p, r, f1, support = HAND_SCORES["token"][category.value]
            row = report[category]
            assert row.precision == pytest.approx(float(p), abs=1e-15)
            assert row.recall == pytest.approx(float(r), abs=1e-15)
            assert row.f1 == pytest.approx(float(f1), abs=1e-15)
            assert row.support == support


class TestBioesLevel:
    def test_identical_sequences(self):
        gold = [seq("B-Drug", "E-Drug", "O")]
        report = bioes_level_eval(gold, gold)
        assert report[parse_label("B-Drug")].f1 == 1.0
        assert report[parse_label("O")].f1 == 1.0

    def test_prefix_confusion_is_a_miss(self):
        report = bioes_level_eval([seq("B-Drug")], [seq("S-Drug")])
        assert report[parse_label("B-Drug")].recall == 0.0
        assert report[parse_label("S-Drug")].precision == 0.0

    def test_support_sums_to_token_count(self):
        report = bioes_level_eval(gold_sequences(), pred_sequences())
        assert sum(r.support for r in report.values()) == HAND_SCORES["total_tokens"]

    def test_hand_scored_fixture(self):
        report = bioes_level_eval(gold_sequences(), pred_sequences())
        expected = {**HAND_SCORES["bioes_nonzero_support"], **HAND_SCORES["bioes_predicted_only"]}
        for name, (p, r, f1, support) in expected.items():
            row = report[parse_label(name)]
            assert row.precision == pytest.approx(float(p), abs=1e-15), name
            assert row.recall == pytest.approx(float(r), abs=1e-15), name
            assert row.f1 == pytest.approx(float(f1), abs=1e-15), name
            assert row.support == support, name
        covered = set(expected)
        for label in LABELS:
            if str(label) not in covered:
                assert report[label].support == 0


class TestBinary:
    def test_hand_scored_fixture(self):
        report = binary_eval(gold_sequences(), pred_sequences())
        expected = HAND_SCORES["binary"]
        assert report.precision == pytest.approx(float(expected["precision"]), abs=1e-15)
        assert report.recall == pytest.approx(float(expected["recall"]), abs=1e-15)
        assert report.f1 == pytest.approx(float(expected["f1"]), abs=1e-15)
        assert report.acc == pytest.approx(float(expected["acc"]), abs=1e-15)

    def test_recall_is_detected_specials_over_gold_specials(self):
        gold = [seq("S-Drug", "S-ADE", "O", "B-Drug", "E-Drug")]
        pred = [seq("S-Drug", "O", "S-Form", "O", "I-Drug")]
        report = binary_eval(gold, pred)
        # gold specials 4, of which predicted special: positions 0 and 4.
        assert report.recall == pytest.approx(2 / 4)


class TestConfusion:
    def test_identical_sequences_are_diagonal(self):
        gold = gold_sequences()
        matrix = confusion(gold, gold, "full")
        assert matrix.counts.sum() == HAND_SCORES["total_tokens"]
        assert np.all(matrix.counts == np.diag(np.diag(matrix.counts)))

    def test_swapped_pair_counts(self):
        gold = [seq("O", "S-Drug")]
        pred = [seq("S-Drug", "O")]
        matrix = confusion(gold, pred, "full")
        o = matrix.names.index("O")
        s_drug = matrix.names.index("S-Drug")
        assert matrix.counts[o, s_drug] == 1
        assert matrix.counts[s_drug, o] == 1
        assert matrix.counts.sum() == 2

    def test_swapped_pair_binary_collapse(self):
        gold = [seq("O", "S-Drug")]
        pred = [seq("S-Drug", "O")]
        matrix = confusion(gold, pred, "binary")
        assert matrix.counts.tolist() == [[0, 1], [1, 0]]

    def test_hand_scored_fixture_full(self):
        matrix = confusion(gold_sequences(), pred_sequences(), "full")
        index = {name: i for i, name in enumerate(matrix.names)}
        off = HAND_SCORES["confusion_off_diagonal"]
        total_off = 0
        for i, gname in enumerate(matrix.names):
            for j, pname in enumerate(matrix.names):
                if i != j:
                    assert matrix.counts[i, j] == off.get((gname, pname), 0)
                    total_off += matrix.counts[i, j]
        assert matrix.counts.sum() == HAND_SCORES["total_tokens"]
        assert total_off == sum(off.values())

    def test_hand_scored_fixture_binary(self):
        matrix = confusion(gold_sequences(), pred_sequences(), "binary")
        assert matrix.counts.tolist() == HAND_SCORES["confusion_binary"]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [], "ternary")


class TestCrossReportInvariants:
    def test_entity_correct_implies_token_correct(self):
        gold, pred = gold_sequences(), pred_sequences()
        token = token_level_eval(gold, pred)
        for gold_labels, pred_labels in zip(gold, pred):
            from clintag.labels import labels_to_spans

            matched = labels_to_spans(gold_labels, "lenient") & labels_to_spans(
                pred_labels, "lenient"
            )
            for span in matched:
                for i in range(span.start, span.end):
                    assert pred_labels[i].category == span.category
        assert token[Category.STRENGTH].recall == 1.0

    def test_counting_conservation(self):
        report = entity_level_eval(gold_sequences(), pred_sequences())
        found_total = sum(r.found for r in report.per_category.values())
        assert found_total == 8
        assert report.corr <= found_total


class TestRendering:
    def test_bundle_has_six_artifacts(self, tmp_path):
        bundle = evaluate_all(gold_sequences(), pred_sequences())
        paths = render_report(bundle, tmp_path)
        assert len(paths) == 6
        assert sorted(p.name for p in paths) == [
            "binary_report.csv",
            "bioes_report.csv",
            "confusion_binary.csv",
            "confusion_full.csv",
            "entity_report.csv",
            "token_report.csv",
        ]

    def test_prefix_applied(self, tmp_path):
        bundle = evaluate_all(gold_sequences(), pred_sequences())
        paths = render_report(bundle, tmp_path, prefix="epoch_0008_")
        assert all(p.name.startswith("epoch_0008_") for p in paths)

    def test_entity_table_layout_and_values(self, tmp_path):
        bundle = evaluate_all(gold_sequences(), pred_sequences())
        render_report(bundle, tmp_path)
        lines = (tmp_path / "entity_report.csv").read_text().strip().split("\n")
        assert lines[0] == "Acc,Pre,Rec,F1,Corr"
        assert lines[1] == "77.27%,62.50%,71.43%,66.67%,5"
        assert lines[2] == "Category,Pre,Rec,F1,found"
        assert len(lines) == 3 + 9
        assert lines[5] == "Drug,75.00%,100.00%,85.71%,4"

    def test_perfect_run_renders_all_hundreds(self, tmp_path):
        gold = gold_sequences()
        bundle = evaluate_all(gold, gold)
        render_report(bundle, tmp_path)
        lines = (tmp_path / "entity_report.csv").read_text().strip().split("\n")
        assert lines[1].startswith("100.00%,100.00%,100.00%,100.00%,")

    def test_csv_reparse_matches_two_decimal_values(self, tmp_path):
        bundle = evaluate_all(gold_sequences(), pred_sequences())
        render_report(bundle, tmp_path)

        lines = (tmp_path / "entity_report.csv").read_text().strip().split("\n")
        acc, pre, rec, f1, corr = lines[1].split(",")
        assert float(acc.rstrip("%")) == round(100 * bundle.entity.acc, 2)
        assert float(pre.rstrip("%")) == round(100 * bundle.entity.precision, 2)
        assert float(rec.rstrip("%")) == round(100 * bundle.entity.recall, 2)
        assert float(f1.rstrip("%")) == round(100 * bundle.entity.f1, 2)
        assert int(corr) == bundle.entity.corr

        token_lines = (tmp_path / "token_report.csv").read_text().strip().split("\n")[1:]
        for line, category in zip(token_lines, CATEGORIES):
            name, p, r, f1_, support = line.split(",")
            row = bundle.token[category]
            assert name == category.value
            assert float(p) == round(100 * row.precision, 2)
            assert float(r) == round(100 * row.recall, 2)
            assert float(f1_) == round(100 * row.f1, 2)
            assert int(support) == row.support

    def test_confusion_csv_round_trip(self, tmp_path):
        bundle = evaluate_all(gold_sequences(), pred_sequences())
        render_report(bundle, tmp_path)
        lines = (tmp_path / "confusion_binary.csv").read_text().strip().split("\n")
        assert lines[0] == "gold\\pred,O,special"
        parsed = [list(map(int, line.split(",")[1:])) for line in lines[1:]]
        assert parsed == HAND_SCORES["confusion_binary"]
