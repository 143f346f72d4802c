import itertools

import numpy as np
import pytest

from rapgen.vowel import (NULL_VOWEL, RHYME_FAMILIES, DictionaryFormatError, UnknownWordError, VowelDictionary,
                          builtin_dictionary, load_dictionary, parse_dictionary, same_rhyme, save_dictionary,
                          vowel_of)


@pytest.fixture(scope="module")
def builtin():
    return builtin_dictionary()


def test_load_two_entries(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("寨\tai\n菜\tai\n", encoding="utf-8")
    d = load_dictionary(path)
    assert len(d) == 2
    assert same_rhyme(d, "寨", "菜")


def test_empty_file_fails_every_lookup(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    d = load_dictionary(path)
    assert len(d) == 0
    with pytest.raises(UnknownWordError):
        d.vowel_of("寨")


def test_identical_duplicate_is_accepted():
    d = parse_dictionary(["寨\tai", "寨\tai"])
    assert len(d) == 1


def test_conflicting_duplicate_names_line():
    with pytest.raises(DictionaryFormatError, match="x.tsv:2"):
        parse_dictionary(["寨\tai", "寨\tao"], source="x.tsv")


def test_malformed_line():
    with pytest.raises(DictionaryFormatError):
        parse_dictionary(["寨 ai extra"])


def test_figure_rhymes(builtin):
    # 寨/菜/爱/代 close the rhyming lines of the sample verse
    ids = {c: vowel_of(builtin, c) for c in "寨菜爱代"}
    assert len(set(ids.values())) == 1
    assert builtin.class_name(ids["寨"]) == "ai"
    assert same_rhyme(builtin, "寨", "菜")


def test_unknown_symbol(builtin):
    with pytest.raises(UnknownWordError):
        vowel_of(builtin, "@")
    assert builtin.vowel_or_null("@") == NULL_VOWEL


def test_medial_glide_is_stripped(builtin):
    assert builtin.same_rhyme("象", "量")
    assert builtin.same_rhyme("江", "方")  # iang / ang
    assert builtin.same_rhyme("快", "来")  # uai / ai
    ident = builtin.with_equivalence("identity")
    assert not ident.same_rhyme("江", "方")
    assert ident.same_rhyme("象", "量")


def test_multichar_word_uses_last_character(builtin):
    assert builtin.vowel_of("简朴的寨") == builtin.vowel_of("寨")
    assert builtin.same_rhyme("时代", "爱")


def test_builtin_table_is_large(builtin):
    assert len(builtin) > 20000
    assert builtin.n_vowels == len({RHYME_FAMILIES.get(f, f) for f in builtin.entries.values()}) + 1


def test_reflexive_and_pure(builtin):
    for w in "我长大的地方像一个简朴的寨":
        assert builtin.same_rhyme(w, w)
        assert builtin.vowel_of(w) == builtin.vowel_of(w)
        assert builtin.vowel_of(w) != NULL_VOWEL


def test_random_dictionary_matches_final_comparison():
    rng = np.random.default_rng(0)
    finals = sorted(RHYME_FAMILIES)
    entries = {f"w{i}": finals[rng.integers(len(finals))] for i in range(100)}
    for eq in ("identity", "rhyme"):
        d = VowelDictionary(entries, equivalence=eq)
        key = (lambda f: f) if eq == "identity" else RHYME_FAMILIES.get
        for a, b in itertools.product(entries, repeat=2):
            assert d.same_rhyme(a, b) == (key(entries[a]) == key(entries[b]))


def test_equivalence_relation_exhaustive():
    # every final of the table, one word each
    entries = {f"w_{f}": f for f in RHYME_FAMILIES}
    d = VowelDictionary(entries)
    words = list(entries)
    rel = {(a, b): d.same_rhyme(a, b) for a in words for b in words}
    for a in words:
        assert rel[a, a]
    for a, b in itertools.product(words, repeat=2):
        assert rel[a, b] == rel[b, a]
    for a, b, c in itertools.product(words, repeat=3):
        if rel[a, b] and rel[b, c]:
            assert rel[a, c]


def test_save_load_round_trip(tmp_path):
    d = VowelDictionary({"寨": "ai", "象": "iang", "x": "ve"})
    save_dictionary(d, tmp_path / "v.tsv")
    back = load_dictionary(tmp_path / "v.tsv")
    assert back.entries == d.entries
    assert [back.vowel_of(w) for w in d.entries] == [d.vowel_of(w) for w in d.entries]


def test_override_merge(builtin):
    d = builtin.merged({"rapper": "er"})
    assert d.class_name(d.vowel_of("rapper")) == "er"
    assert d.vowel_of("寨") == d.vowel_of("爱")
