"""Templated synthetic corpus over all nine clinical categories.

Sentences follow prescription-note patterns ("take 20 mg of warfarin
twice daily for 5 days") with category-specific vocabularies, so a small
model can learn the tagging and the toolkit can be exercised end to end
without access-restricted clinical data.
"""

from __future__ import annotations

import random

from .corpus import Dataset, Sentence
from .labels import Category, Span, spans_to_labels

_DRUGS_SINGLE = [
    "aspirin", "warfarin", "metformin", "lisinopril", "ibuprofen",
    "heparin", "insulin", "amoxicillin", "prednisone", "atorvastatin",
]
_DRUGS_MULTI = [["folic", "acid"], ["vitamin", "d"], ["magnesium", "oxide"]]

_STRENGTH_NUMBERS = ["10", "20", "25", "40", "50", "100", "250", "500"]
_STRENGTH_UNITS = ["mg", "mcg", "g", "units"]

_DOSE_AMOUNTS = ["one", "two", "three", "half"]
_DOSE_UNITS = ["dose", "doses", "puff", "puffs", "drops"]

_DURATION_NUMBERS = ["2", "3", "5", "7", "14"]
_DURATION_UNITS = ["days", "weeks", "months"]

_FORMS_SINGLE = ["tablet", "capsule", "cream", "ointment", "syrup", "patch"]
_FORMS_MULTI = [["chewable", "tablet"], ["topical", "gel"]]

_FREQ_SINGLE = ["daily", "nightly", "weekly"]
_FREQ_MULTI = [
    ["twice", "daily"],
    ["as", "needed"],
    ["every", "6", "hours"],
    ["every", "8", "hours"],
    ["once", "a", "day"],
]

_ROUTES_SINGLE = ["oral", "intravenous", "topical", "subcutaneous", "intramuscular"]
_ROUTES_MULTI = [["by", "mouth"]]

_REASONS_SINGLE = ["fever", "hypertension", "infection", "nausea", "anxiety", "insomnia"]
_REASONS_MULTI = [["chest", "pain"], ["high", "blood", "pressure"], ["back", "pain"]]

_ADES_SINGLE = ["rash", "bleeding", "dizziness", "hyperkalemia", "drowsiness"]
_ADES_MULTI = [["acute", "renal", "failure"], ["liver", "injury"], ["stomach", "upset"]]

_FILLER_SENTENCES = [
    "the patient was seen in clinic today",
    "follow up in two weeks",
    "vital signs were stable on arrival",
    "no acute distress was noted",
    "labs were reviewed with the team",
    "the plan was discussed at length",
]

# Sentence templates: literal filler tokens plus <Category> slots.
_TEMPLATES = [
    "patient was started on <Drug> <Strength> <Route> <Frequency>",
    "take <Dosage> of <Drug> <Frequency> for <Duration>",
    "<Drug> <Strength> <Form> <Route> <Frequency>",
    "patient developed <ADE> after taking <Drug>",
    "discontinued <Drug> due to <ADE>",
    "continue <Drug> <Strength> for <Reason>",
    "she was given <Drug> as <Form> for <Reason>",
    "hold <Drug> for <Duration> and monitor for <ADE>",
    "restart <Drug> <Strength> <Frequency> for <Reason>",
]


def _pick_entity(rng: random.Random, category: Category) -> list[str]:
    if category == Category.DRUG:
        if rng.random() < 0.25:
            return list(rng.choice(_DRUGS_MULTI))
        return [rng.choice(_DRUGS_SINGLE)]
    if category == Category.STRENGTH:
        return [rng.choice(_STRENGTH_NUMBERS), rng.choice(_STRENGTH_UNITS)]
    if category == Category.DOSAGE:
        return [rng.choice(_DOSE_AMOUNTS), rng.choice(_DOSE_UNITS)]
    if category == Category.DURATION:
        return [rng.choice(_DURATION_NUMBERS), rng.choice(_DURATION_UNITS)]
    if category == Category.FORM:
        if rng.random() < 0.2:
            return list(rng.choice(_FORMS_MULTI))
        return [rng.choice(_FORMS_SINGLE)]
    if category == Category.FREQUENCY:
        if rng.random() < 0.5:
            return list(rng.choice(_FREQ_MULTI))
        return [rng.choice(_FREQ_SINGLE)]
    if category == Category.ROUTE:
        if rng.random() < 0.2:
            return list(rng.choice(_ROUTES_MULTI))
        return [rng.choice(_ROUTES_SINGLE)]
    if category == Category.REASON:
        if rng.random() < 0.4:
            return list(rng.choice(_REASONS_MULTI))
        return [rng.choice(_REASONS_SINGLE)]
    if category == Category.ADE:
        if rng.random() < 0.4:
            return list(rng.choice(_ADES_MULTI))
        return [rng.choice(_ADES_SINGLE)]
    raise ValueError(category)


_SLOT_BY_NAME = {c.value: c for c in Category}


def generate_sentence(rng: random.Random) -> Sentence:
    if rng.random() < 0.18:
        tokens = rng.choice(_FILLER_SENTENCES).split()
        return Sentence(tuple(tokens), tuple(spans_to_labels([], len(tokens))))

    template = rng.choice(_TEMPLATES).split()
    tokens: list[str] = []
    spans: list[Span] = []
    for piece in template:
        if piece.startswith("<") and piece.endswith(">"):
            category = _SLOT_BY_NAME[piece[1:-1]]
            entity = _pick_entity(rng, category)
            spans.append(Span(category, len(tokens), len(tokens) + len(entity)))
            tokens.extend(entity)
        else:
            tokens.append(piece)
    return Sentence(tuple(tokens), tuple(spans_to_labels(spans, len(tokens))))


def generate_corpus(count: int, seed: int, name: str = "synthetic") -> Dataset:
    rng = random.Random(seed)
    return Dataset(tuple(generate_sentence(rng) for _ in range(count)), name)


def generate_splits(
    train_count: int = 2000,
    dev_count: int = 200,
    test_count: int = 200,
    seed: int = 13,
) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint seeded train/dev/test splits of templated sentences."""
    return (
        generate_corpus(train_count, seed, "train"),
        generate_corpus(dev_count, seed + 1, "dev"),
        generate_corpus(test_count, seed + 2, "test"),
    )
