"""Vowel (pinyin final) lookup and rhyme equivalence.

A :class:`VowelDictionary` maps words to their pinyin final and collapses
finals into rhyme classes.  Rhyme classes get small integer ids; ``0`` is
reserved as :data:`NULL_VOWEL` for control tokens and words that cannot be
resolved.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

NULL_VOWEL = 0

# Finals that differ only by a medial glide (i/u/ü) share a rhyme class.
RHYME_FAMILIES: dict[str, str] = {
    "a": "a", "ia": "a", "ua": "a",
    "o": "o", "uo": "o",
    "e": "e",
    "ie": "ie", "ve": "ie", "ue": "ie",
    "ai": "ai", "uai": "ai",
    "ei": "ei", "uei": "ei", "ui": "ei",
    "ao": "ao", "iao": "ao",
    "ou": "ou", "iou": "ou", "iu": "ou",
    "an": "an", "ian": "an", "uan": "an", "van": "an",
    "en": "en", "uen": "en",
    "in": "in",
    "vn": "vn",
    "ang": "ang", "iang": "ang", "uang": "ang",
    "eng": "eng", "ueng": "eng",
    "ing": "ing",
    "ong": "ong", "iong": "ong",
    "i": "i", "u": "u", "v": "v", "er": "er",
}

EQUIVALENCES = ("rhyme", "identity")


class DictionaryFormatError(ValueError):
    """Raised for malformed or self-contradicting dictionary files."""


class UnknownWordError(KeyError):
    """Raised when a word has no entry in the vowel dictionary."""


def _class_of(final: str, equivalence: str) -> str:
    if equivalence == "identity":
        return final
    return RHYME_FAMILIES.get(final, final)


@dataclass(frozen=True)
class VowelDictionary:
    """Word -> final table plus the final -> rhyme-class id map.

    Ids are assigned to rhyme classes in sorted order starting at 1, so the
    same entries always produce the same ids.
    """

    entries: Mapping[str, str]
    equivalence: str = "rhyme"
    class_ids: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.equivalence not in EQUIVALENCES:
            raise ValueError(f"unknown equivalence {self.equivalence!r}; expected one of {EQUIVALENCES}")
        classes = sorted({_class_of(f, self.equivalence) for f in self.entries.values()})
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "class_ids", {c: i + 1 for i, c in enumerate(classes)})

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        try:
            self.final_of(word)
        except UnknownWordError:
            return False
        return True

    @property
    def n_vowels(self) -> int:
        """Size of a vowel embedding table, NULL_VOWEL included."""
        return len(self.class_ids) + 1

    def final_of(self, word: str) -> str:
        final = self.entries.get(word)
        if final is None and len(word) > 1:
            # rhyme is carried by the last syllable
            final = self.entries.get(word[-1])
        if final is None:
            raise UnknownWordError(word)
        return final

    def vowel_of(self, word: str) -> int:
        return self.class_ids[_class_of(self.final_of(word), self.equivalence)]

    def vowel_or_null(self, word: str) -> int:
        try:
            return self.vowel_of(word)
        except UnknownWordError:
            return NULL_VOWEL

    def same_rhyme(self, a: str, b: str) -> bool:
        return self.vowel_of(a) == self.vowel_of(b)

    def class_name(self, vowel: int) -> str:
        for name, idx in self.class_ids.items():
            if idx == vowel:
                return name
        raise KeyError(vowel)

    def with_equivalence(self, equivalence: str) -> "VowelDictionary":
        return VowelDictionary(self.entries, equivalence)

    def merged(self, overrides: Mapping[str, str]) -> "VowelDictionary":
        """Return a copy where ``overrides`` replace or extend the entries."""
        return VowelDictionary({**self.entries, **overrides}, self.equivalence)

    def to_lines(self) -> list[str]:
        return [f"{w}\t{f}" for w, f in sorted(self.entries.items())]


def vowel_of(vowels: VowelDictionary, word: str) -> int:
    return vowels.vowel_of(word)


def same_rhyme(vowels: VowelDictionary, a: str, b: str) -> bool:
    return vowels.same_rhyme(a, b)


def parse_dictionary(lines: Iterable[str], equivalence: str = "rhyme", source: str = "<string>") -> VowelDictionary:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1].strip():
            raise DictionaryFormatError(f"{source}:{lineno}: expected 'word<TAB>final', got {line!r}")
        word, final = parts[0], parts[1].strip()
        if word in entries and entries[word] != final:
            raise DictionaryFormatError(
                f"{source}:{lineno}: {word!r} maps to both {entries[word]!r} and {final!r}"
            )
        entries[word] = final
    return VowelDictionary(entries, equivalence)


def load_dictionary(path, equivalence: str = "rhyme") -> VowelDictionary:
    """Load a ``word<TAB>final`` file (UTF-8, ``#`` comments allowed)."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_dictionary(fh, equivalence, source=str(path))


@lru_cache(maxsize=None)
def builtin_dictionary(equivalence: str = "rhyme") -> VowelDictionary:
    """Pinyin finals of ~21k CJK characters (most common reading)."""
    text = resources.files("rapgen").joinpath("data/pinyin_finals.tsv").read_text(encoding="utf-8")
    return parse_dictionary(text.splitlines(), equivalence, source="builtin")


def save_dictionary(vowels: VowelDictionary, path) -> None:
    Path(path).write_text("\n".join(vowels.to_lines()) + "\n", encoding="utf-8")
