"""Synthetic rap corpora with known rhyme chains and beat intervals.

Words are made-up syllables assigned round-robin to vowel classes, and a
matching vowel dictionary is produced alongside, so every module can run
without real lyrics.  The ground truth is tallied while the corpus is built.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .align import FrequencyThresholds, beat_frequency
from .corpus import FreqLabel, Sentence, Song, write_corpus
from .vowel import VowelDictionary, save_dictionary

ONSETS = ("b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x",
          "zh", "ch", "sh", "r", "z", "c", "s", "y", "w")
RHYMES = ("a", "o", "e", "i", "u", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "er", "v")


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_songs: int = 10
    sentences_per_song: int = 5
    sentence_length: tuple[int, int] = (4, 6)
    vocab_size: int = 64
    n_vowel_classes: int = 8
    ngram: int = 2
    chain_length: int = 3
    beat_pattern: tuple[int, ...] = (2, 2, 4)
    beat_offset: int = 0
    repeat_prob: float = 0.0
    label_frequency: bool = False
    seed: int = 0
    id_prefix: str = "syn"

    def validate(self):
        for name in ("n_songs", "sentences_per_song", "vocab_size", "n_vowel_classes", "ngram", "chain_length"):
            if getattr(self, name) < 1:
                raise InfeasibleSpecError(f"{name} must be >= 1")
        lo, hi = self.sentence_length
        if lo < 1 or hi < lo:
            raise InfeasibleSpecError(f"bad sentence_length range {self.sentence_length}")
        if self.ngram > lo:
            raise InfeasibleSpecError(f"ngram {self.ngram} exceeds the minimum sentence length {lo}")
        if self.n_vowel_classes < 2:
            raise InfeasibleSpecError("need at least two vowel classes to break rhymes")
        if self.n_vowel_classes > len(RHYMES):
            raise InfeasibleSpecError(f"at most {len(RHYMES)} vowel classes")
        if self.vocab_size < 2 * self.n_vowel_classes:
            raise InfeasibleSpecError("need at least two words per vowel class")
        if any(i < 0 for i in self.beat_pattern) or self.beat_offset < 0:
            raise InfeasibleSpecError("beat intervals and offset must be non-negative")
        if not 0.0 <= self.repeat_prob <= 1.0:
            raise InfeasibleSpecError("repeat_prob must be in [0, 1]")


@dataclass
class SynthCorpus:
    songs: list[Song]
    vowels: VowelDictionary
    ground_truth: dict[str, float] = field(default_factory=dict)

    def write(self, directory, name: str = "corpus") -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": directory / f"{name}.txt",
            "vowels": directory / f"{name}.vowels.tsv",
            "ground_truth": directory / f"{name}.ground_truth.tsv",
        }
        write_corpus(self.songs, paths["corpus"])
        save_dictionary(self.vowels, paths["vowels"])
        paths["ground_truth"].write_text(
            "".join(f"{k}\t{v!r}\n" for k, v in self.ground_truth.items()), encoding="utf-8")
        return paths


def synthetic_lexicon(vocab_size: int, n_classes: int) -> tuple[list[str], list[int], VowelDictionary]:
    """Words, their class index, and the dictionary mapping each word to its final."""
    words, classes, entries = [], [], {}
    for k in range(vocab_size):
        c, j = k % n_classes, k // n_classes
        word = ONSETS[j % len(ONSETS)] + RHYMES[c] + (str(j // len(ONSETS)) if j >= len(ONSETS) else "")
        words.append(word)
        classes.append(c)
        entries[word] = RHYMES[c]
    return words, classes, VowelDictionary(entries)


def generate_synthetic_corpus(spec: SynthSpec) -> SynthCorpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    words, classes, vowels = synthetic_lexicon(spec.vocab_size, spec.n_vowel_classes)
    by_class: list[list[int]] = [[] for _ in range(spec.n_vowel_classes)]
    for k, c in enumerate(classes):
        by_class[c].append(k)
    n_cls = spec.n_vowel_classes

    def word_of_class(c: int, avoid: int | None = None) -> int:
        pool = [k for k in by_class[c] if k != avoid]
        return int(pool[rng.integers(len(pool))])

    def other_class(c: int) -> int:
        return int((c + 1 + rng.integers(n_cls - 1)) % n_cls)

    songs = []
    rd_sum = 0
    combo_sum = Counter()
    rhyme_occ = rhyme_rep = 0
    intervals_all: list[int] = []
    seconds_all: list[int] = []
    lo, hi = spec.sentence_length
    N = spec.ngram

    for s_idx in range(spec.n_songs):
        rev_sents: list[list[int]] = []  # word ids, reversed order
        longest_chain = 0
        for i in range(spec.sentences_per_song):
            length = int(rng.integers(lo, hi + 1))
            in_chain = i % spec.chain_length != 0
            if i % spec.chain_length == 0:
                chain_len = min(spec.chain_length, spec.sentences_per_song - i)
                longest_chain = max(longest_chain, chain_len)
            if i == 0:
                sent = [word_of_class(int(rng.integers(n_cls))) for _ in range(length)]
            elif not in_chain:
                # chain break: first reversed word must not rhyme with the previous sentence
                prev = rev_sents[-1]
                sent = [word_of_class(other_class(classes[prev[0]]))]
                sent += [word_of_class(int(rng.integers(n_cls))) for _ in range(length - 1)]
            else:
                prev = rev_sents[-1]
                sent = []
                for j in range(N):
                    if rng.random() < spec.repeat_prob:
                        sent.append(prev[j])
                        rhyme_rep += 1
                    else:
                        sent.append(word_of_class(classes[prev[j]], avoid=prev[j]))
                rhyme_occ += N
                if length > N:
                    if len(prev) > N:
                        sent.append(word_of_class(other_class(classes[prev[N]])))
                    else:
                        sent.append(word_of_class(int(rng.integers(n_cls))))
                    sent += [word_of_class(int(rng.integers(n_cls))) for _ in range(length - N - 1)]
            rev_sents.append(sent)

        has_pairs = longest_chain >= 2
        rd_sum += N if has_pairs else 0
        for n in (1, 2, 3):
            combo_sum[n] += longest_chain if (n <= N and has_pairs) else 1

        # beats are placed along the generation-order word stream
        total_words = sum(len(s) for s in rev_sents)
        beat_pos = set()
        intervals = []
        if spec.beat_pattern:
            pos, k = spec.beat_offset, 0
            while pos < total_words:
                beat_pos.add(pos)
                nxt = pos + spec.beat_pattern[k % len(spec.beat_pattern)] + 1
                if nxt < total_words:
                    intervals.append(spec.beat_pattern[k % len(spec.beat_pattern)])
                pos, k = nxt, k + 1
        intervals_all.extend(intervals)
        seconds_all.extend(b - a for a, b in zip(intervals, intervals[1:]))

        sentences, offset = [], 0
        for sent in rev_sents:
            flags = [offset + j in beat_pos for j in range(len(sent))]
            offset += len(sent)
            sentences.append(Sentence(tuple((words[w], f) for w, f in zip(reversed(sent), reversed(flags)))))
        song = Song(f"{spec.id_prefix}{s_idx:04d}", tuple(sentences))
        if spec.label_frequency and beat_pos:
            song = Song(song.id, song.sentences, beat_frequency(song)[1])
        songs.append(song)

    gt = {
        "rd": rd_sum / spec.n_songs,
        "combo1": combo_sum[1] / spec.n_songs,
        "combo2": combo_sum[2] / spec.n_songs,
        "combo3": combo_sum[3] / spec.n_songs,
        "rhyme_repetition": 100.0 * rhyme_rep / rhyme_occ if rhyme_occ else 0.0,
    }
    for name, samples in (("fod", intervals_all), ("sod", seconds_all)):
        counts = Counter(samples)
        n = sum(counts.values())
        for key in sorted(counts):
            gt[f"{name}:{key}"] = counts[key] / n
    return SynthCorpus(songs, vowels, gt)


def frequency_corpus(spec: SynthSpec, patterns: dict[FreqLabel, tuple[int, ...]] | None = None,
                     thresholds: FrequencyThresholds = FrequencyThresholds()) -> SynthCorpus:
    """Concatenate one synthetic corpus per beat pattern, labelled by measured frequency.

    Default patterns put a beat on every 2nd, 3rd or 5th word, which lands
    the songs in the slow, medium and fast buckets respectively.
    """
    patterns = patterns or {FreqLabel.SLOW: (1,), FreqLabel.MEDIUM: (2,), FreqLabel.FAST: (4,)}
    songs = []
    vowels = None
    for i, (label, pattern) in enumerate(patterns.items()):
        part = generate_synthetic_corpus(replace(spec, beat_pattern=pattern, seed=spec.seed + 1000 * i,
                                                 id_prefix=f"{spec.id_prefix}{label.value}"))
        vowels = part.vowels
        songs += [Song(s.id, s.sentences, beat_frequency(s, thresholds)[1]) for s in part.songs]
    return SynthCorpus(songs, vowels, {})
