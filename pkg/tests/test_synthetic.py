from clintag.labels import CATEGORIES, check_grammar, labels_to_spans
from clintag.synthetic import generate_corpus, generate_splits


class TestGenerator:
    def test_deterministic_for_seed(self):
        a = generate_corpus(50, seed=3)
        b = generate_corpus(50, seed=3)
        assert a.sentences == b.sentences

    def test_seed_changes_corpus(self):
        assert generate_corpus(50, seed=3) != generate_corpus(50, seed=4)

    def test_all_nine_categories_appear(self):
        data = generate_corpus(500, seed=13)
        seen = set()
        for sentence in data:
            for span in labels_to_spans(sentence.gold, "strict"):
                seen.add(span.category)
        assert seen == set(CATEGORIES)

    def test_every_sentence_is_grammatical(self):
        for sentence in generate_corpus(300, seed=8):
            check_grammar(sentence.gold)

    def test_split_sizes(self):
        train, dev, test = generate_splits(30, 10, 5, seed=2)
        assert (len(train), len(dev), len(test)) == (30, 10, 5)
        assert (train.name, dev.name, test.name) == ("train", "dev", "test")
