"""Shared test fixtures, including the hand-scored five-sentence corpus.

Every expected number in HAND_SCORES was worked out by hand from the
sentences below (span matching, token tallies, and confusion counts);
the test suites assert the reports reproduce them exactly.
"""

from fractions import Fraction

from clintag.labels import parse_label

# (tokens, gold labels, predicted labels)
FIVE_SENTENCES = [
    (
        ["20", "mg", "per", "day"],
        ["B-Strength", "I-Strength", "I-Strength", "E-Strength"],
        ["B-Strength", "I-Strength", "I-Strength", "E-Strength"],
    ),
    (
        ["take", "aspirin", "with", "one", "tablet", "now"],
        ["O", "S-Drug", "O", "B-Dosage", "E-Dosage", "O"],
        ["O", "S-Drug", "O", "B-Dosage", "E-Dosage", "S-Drug"],
    ),
    (
        ["folic", "acid", "caused", "rash", "today"],
        ["B-Drug", "E-Drug", "O", "S-ADE", "O"],
        ["B-Drug", "E-Drug", "O", "O", "O"],
    ),
    (
        ["seen", "in", "clinic"],
        ["O", "O", "O"],
        ["O", "S-Reason", "O"],
    ),
    (
        ["oral", "tablet", "of", "warfarin"],
        ["B-Form", "E-Form", "O", "S-Drug"],
        ["S-Form", "O", "O", "S-Drug"],
    ),
]


def gold_sequences():
    return [[parse_label(l) for l in gold] for _, gold, _ in FIVE_SENTENCES]


def pred_sequences():
    return [[parse_label(l) for l in pred] for _, _, pred in FIVE_SENTENCES]


F = Fraction

HAND_SCORES = {
    "entity": {
        "acc": F(17, 22),
        "precision": F(5, 8),
        "recall": F(5, 7),
        "f1": F(2, 3),
        "corr": 5,
        "per_category": {
            # category: (precision, recall, f1, found)
            "ADE": (F(0), F(0), F(0), 0),
            "Dosage": (F(1), F(1), F(1), 1),
            "Drug": (F(3, 4), F(1), F(6, 7), 4),
            "Duration": (F(0), F(0), F(0), 0),
            "Form": (F(0), F(0), F(0), 1),
            "Frequency": (F(0), F(0), F(0), 0),
            "Reason": (F(0), F(0), F(0), 1),
            "Route": (F(0), F(0), F(0), 0),
            "Strength": (F(1), F(1), F(1), 1),
        },
    },
    "token": {
        # category: (precision, recall, f1, support)
        "ADE": (F(0), F(0), F(0), 1),
        "Dosage": (F(1), F(1), F(1), 2),
        "Drug": (F(4, 5), F(1), F(8, 9), 4),
        "Duration": (F(0), F(0), F(0), 0),
        "Form": (F(1), F(1, 2), F(2, 3), 2),
        "Frequency": (F(0), F(0), F(0), 0),
        "Reason": (F(0), F(0), F(0), 0),
        "Route": (F(0), F(0), F(0), 0),
        "Strength": (F(1), F(1), F(1), 4),
    },
    "bioes_nonzero_support": {
        # label: (precision, recall, f1, support)
        "O": (F(7, 9), F(7, 9), F(7, 9), 9),
        "B-Strength": (F(1), F(1), F(1), 1),
        "I-Strength": (F(1), F(1), F(1), 2),
        "E-Strength": (F(1), F(1), F(1), 1),
        "S-Drug": (F(2, 3), F(1), F(4, 5), 2),
        "B-Dosage": (F(1), F(1), F(1), 1),
        "E-Dosage": (F(1), F(1), F(1), 1),
        "B-Drug": (F(1), F(1), F(1), 1),
        "E-Drug": (F(1), F(1), F(1), 1),
        "S-ADE": (F(0), F(0), F(0), 1),
        "B-Form": (F(0), F(0), F(0), 1),
        "E-Form": (F(0), F(0), F(0), 1),
    },
    "bioes_predicted_only": {
        "S-Reason": (F(0), F(0), F(0), 0),
        "S-Form": (F(0), F(0), F(0), 0),
    },
    "binary": {
        "precision": F(11, 13),
        "recall": F(11, 13),
        "f1": F(11, 13),
        "acc": F(9, 11),
    },
    # (gold label, predicted label): count, for every off-diagonal cell.
    "confusion_off_diagonal": {
        ("O", "S-Drug"): 1,
        ("O", "S-Reason"): 1,
        ("S-ADE", "O"): 1,
        ("B-Form", "S-Form"): 1,
        ("E-Form", "O"): 1,
    },
    "confusion_binary": [[7, 2], [2, 11]],  # rows gold [O, special]
    "total_tokens": 22,
}


def write_fixture_conll(path, which: str) -> None:
    """Write the fixture's gold or pred side as a two-column corpus file."""
    column = {"gold": 1, "pred": 2}[which]
    blocks = []
    for row in FIVE_SENTENCES:
        tokens, labels = row[0], row[column]
        blocks.append("\n".join(f"{t} {l}" for t, l in zip(tokens, labels)))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n\n".join(blocks) + "\n")
