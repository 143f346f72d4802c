"""Objective evaluation: perplexity, rhyme and beat metrics, interval distances.

Rhymes are read on reversed sentences: a k-gram rhyme between consecutive
sentences means their first k reversed words match vowels position by
position.  Unknown words carry NULL_VOWEL and never rhyme.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import FeatureSequence, Sentence, Song, Vocab, song_token_ids
from .model import perplexity
from .vowel import NULL_VOWEL, VowelDictionary


def reversed_vowels(sentence: Sentence, vowels: VowelDictionary) -> list[int]:
    return [vowels.vowel_or_null(w) for w in reversed(sentence.tokens)]


def rhyme_length(prev: Sequence[int], cur: Sequence[int]) -> int:
    """Length of the common leading run of equal, non-null vowels."""
    k = 0
    for a, b in zip(prev, cur):
        if a == NULL_VOWEL or a != b:
            break
        k += 1
    return k


def _pair_lengths(song: Song, vowels: VowelDictionary) -> list[int]:
    vs = [reversed_vowels(s, vowels) for s in song.sentences]
    return [rhyme_length(a, b) for a, b in zip(vs, vs[1:])]


def song_rhyme_density(song: Song, vowels: VowelDictionary) -> int:
    return max(_pair_lengths(song, vowels), default=0)


def _malmi_density(song: Song, vowels: VowelDictionary, window: int = 15) -> float:
    # per word: longest vowel suffix shared with the text ending at an earlier word
    stream = [vowels.vowel_or_null(w) for s in song.sentences for w in s.tokens]
    if not stream:
        return 0.0
    total = 0
    for i in range(len(stream)):
        best = 0
        for j in range(max(0, i - window), i):
            k = 0
            while k <= j and stream[i - k] != NULL_VOWEL and stream[i - k] == stream[j - k] and i - k > j:
                k += 1
            best = max(best, k)
        total += best
    return total / len(stream)


def rhyme_density(songs: Song | Iterable[Song], vowels: VowelDictionary, method: str = "longest") -> float:
    """Longest rhyme per song, averaged over songs.

    ``method="malmi"`` gives the per-word average longest vowel match instead,
    for comparison with work that uses that definition.
    """
    songs = [songs] if isinstance(songs, Song) else list(songs)
    if not songs:
        return 0.0
    if method == "longest":
        per_song = [song_rhyme_density(s, vowels) for s in songs]
    elif method == "malmi":
        per_song = [_malmi_density(s, vowels) for s in songs]
    else:
        raise ValueError(f"unknown rhyme density method {method!r}")
    return float(sum(per_song) / len(per_song))


def song_combo(song: Song, vowels: VowelDictionary, n: int) -> int:
    best = run = 1
    for k in _pair_lengths(song, vowels):
        run = run + 1 if k >= n else 1
        best = max(best, run)
    return best


def combo_n(songs: Song | Iterable[Song], vowels: VowelDictionary, n: int) -> float:
    """Longest run of consecutive sentences chained by n-gram rhymes, averaged over songs."""
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    songs = [songs] if isinstance(songs, Song) else list(songs)
    if not songs:
        return 0.0
    return float(sum(song_combo(s, vowels, n) for s in songs) / len(songs))


def rhyme_repetition_rate(songs: Song | Iterable[Song], vowels: VowelDictionary) -> float:
    """Percent of rhyming word occurrences that repeat the partner word verbatim.

    For each consecutive sentence pair, the words of the later sentence inside
    the shared rhyme prefix are the occurrences; one is a repetition when it is
    the same word found at that position in the earlier sentence.
    """
    songs = [songs] if isinstance(songs, Song) else list(songs)
    total = repeats = 0
    for song in songs:
        rev = [list(reversed(s.tokens)) for s in song.sentences]
        vs = [reversed_vowels(s, vowels) for s in song.sentences]
        for i in range(1, len(rev)):
            k = rhyme_length(vs[i - 1], vs[i])
            total += k
            repeats += sum(rev[i][j] == rev[i - 1][j] for j in range(k))
    return 100.0 * repeats / total if total else 0.0


# -- teacher-forced model metrics ---------------------------------------------------


def rhyme_accuracy(model, corpus: Sequence[FeatureSequence], vocab: Vocab, token_vowels: np.ndarray,
                   pad_id: int = 0) -> float:
    """Percent of sentences whose first reversed word is predicted with the right vowel.

    Teacher-forced argmax at the step that emits each sentence's first
    reversed word; the target is the first reversed word of the previous
    sentence.  Sentences whose predecessor has no known vowel are skipped.
    """
    correct = eligible = 0
    for seq, lp in zip(corpus, model.batch_log_probs(corpus, pad_id)):
        toks = seq.tokens[:seq.n_real].tolist()
        prev_first = None
        cur_first = None
        for j, t in enumerate(toks):
            if t == vocab.sep:
                prev_first, cur_first = cur_first, None
                continue
            if not vocab.is_word(t) or cur_first is not None:
                continue
            cur_first = int(token_vowels[t])
            if j == 0 or prev_first is None or prev_first == NULL_VOWEL:
                continue
            eligible += 1
            pred = int(np.argmax(lp[j - 1]))
            correct += int(token_vowels[pred] == prev_first)
    return 100.0 * correct / eligible if eligible else 0.0


def beat_accuracy(model, corpus: Sequence[FeatureSequence], vocab: Vocab, pad_id: int = 0) -> float:
    """Percent of teacher-forced steps where "next token is [BEAT]" is predicted correctly."""
    correct = total = 0
    for seq, lp in zip(corpus, model.batch_log_probs(corpus, pad_id)):
        n = seq.n_real
        pred_beat = lp[:n - 1].argmax(-1) == vocab.beat
        true_beat = seq.tokens[1:n] == vocab.beat
        correct += int((pred_beat == true_beat).sum())
        total += n - 1
    return 100.0 * correct / total if total else 0.0


# -- beat interval distributions ------------------------------------------------------


@dataclass(frozen=True)
class IntervalDistribution:
    values: tuple[int, ...]
    probs: tuple[float, ...]

    @classmethod
    def from_samples(cls, samples: Iterable[int]) -> "IntervalDistribution":
        counts = Counter(int(s) for s in samples)
        n = sum(counts.values())
        keys = sorted(counts)
        return cls(tuple(keys), tuple(counts[k] / n for k in keys))

    @property
    def is_empty(self) -> bool:
        return not self.values

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.values, self.probs))

    def cdf(self, support: Sequence[int]) -> np.ndarray:
        d = self.as_dict()
        return np.cumsum([d.get(x, 0.0) for x in support])


def beat_intervals(song: Song) -> list[int]:
    """Words strictly between consecutive beat-aligned words, in generation order."""
    stream = [b for s in song.sentences for _, b in reversed(s.words)]
    pos = [i for i, b in enumerate(stream) if b]
    return [b - a - 1 for a, b in zip(pos, pos[1:])]


def beat_interval_distributions(songs: Song | Iterable[Song]) -> tuple[IntervalDistribution, IntervalDistribution]:
    """First-order (intervals) and second-order (next minus current interval) distributions."""
    songs = [songs] if isinstance(songs, Song) else list(songs)
    first, second = [], []
    for song in songs:
        iv = beat_intervals(song)
        first.extend(iv)
        second.extend(b - a for a, b in zip(iv, iv[1:]))
    return IntervalDistribution.from_samples(first), IntervalDistribution.from_samples(second)


def wasserstein_1d(a: IntervalDistribution, b: IntervalDistribution, span: float | None = None) -> float:
    """W1 between two integer distributions, divided by the span of their joint support."""
    if a.is_empty or b.is_empty:
        raise ValueError("Wasserstein distance of an empty distribution")
    support = sorted(set(a.values) | set(b.values))
    if span is None:
        span = support[-1] - support[0]
    if span == 0:
        return 0.0
    gaps = np.diff(support)
    diff = np.abs(a.cdf(support) - b.cdf(support))[:-1]
    return float(np.dot(diff, gaps) / span)


def beat_distribution_distance(songs: Iterable[Song], reference: Iterable[Song]) -> tuple[float, float]:
    """Normalised (FOD, SOD) distances between two song collections."""
    fa, sa = beat_interval_distributions(songs)
    fb, sb = beat_interval_distributions(reference)
    return wasserstein_1d(fa, fb), wasserstein_1d(sa, sb)


# -- report --------------------------------------------------------------------


@dataclass
class MetricsReport:
    ppl: float = math.nan
    ra: float = math.nan
    rd: float = math.nan
    combo1: float = math.nan
    combo2: float = math.nan
    combo3: float = math.nan
    ba: float = math.nan
    fod: float = math.nan
    sod: float = math.nan
    rhyme_repetition: float = math.nan

    def items(self):
        return asdict(self).items()

    def to_tsv(self, extra: dict | None = None) -> str:
        lines = [f"{k}\t{v!r}" for k, v in self.items() if not math.isnan(v)]
        lines += [f"{k}\t{v!r}" for k, v in (extra or {}).items()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        names = {"ppl": "Perplexity", "ra": "Rhyme accuracy (%)", "rd": "Rhyme density",
                 "combo1": "Combo-1", "combo2": "Combo-2", "combo3": "Combo-3",
                 "ba": "Beat accuracy (%)", "fod": "FOD distance", "sod": "SOD distance",
                 "rhyme_repetition": "Rhyme word repetition (%)"}
        return "\n".join(f"{names[k]:<28}{v:.4f}" for k, v in self.items() if not math.isnan(v)) + "\n"


def distribution_entries(songs: Iterable[Song]) -> dict[str, float]:
    """``fod:<interval>`` / ``sod:<difference>`` probability entries."""
    fod, sod = beat_interval_distributions(songs)
    out = {f"fod:{k}": p for k, p in fod.as_dict().items()}
    out.update({f"sod:{k}": p for k, p in sod.as_dict().items()})
    return out


def evaluate(songs: Sequence[Song], vowels: VowelDictionary, model=None, vocab: Vocab | None = None,
             encoded: Sequence[FeatureSequence] | None = None, reference: Sequence[Song] | None = None) -> MetricsReport:
    """Corpus metrics always; model metrics when ``model`` is given; FOD/SOD against ``reference``."""
    report = MetricsReport(
        rd=rhyme_density(songs, vowels),
        combo1=combo_n(songs, vowels, 1),
        combo2=combo_n(songs, vowels, 2),
        combo3=combo_n(songs, vowels, 3),
        rhyme_repetition=rhyme_repetition_rate(songs, vowels),
    )
    if model is not None:
        if vocab is None or encoded is None:
            raise ValueError("model metrics need the vocabulary and encoded corpus")
        token_vowels = vocab.token_vowels(vowels)
        report.ppl = perplexity(model, encoded, vocab.pad)
        report.ra = rhyme_accuracy(model, encoded, vocab, token_vowels, vocab.pad)
        if any(vocab.beat in song_token_ids(s, vocab) for s in songs):
            report.ba = beat_accuracy(model, encoded, vocab, vocab.pad)
    if reference is not None:
        report.fod, report.sod = beat_distribution_distance(songs, reference)
    return report
