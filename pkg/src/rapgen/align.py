"""Word/beat alignment from timestamps and beat-frequency labels.

Each beat is paired with the closest word whose timestamp lies within half
an average word duration of it; beats with no such word stay unaligned.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import FreqLabel, Sentence, Song


class TimestampFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TimedWord:
    word: str
    t: float

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"bad timestamp {self.t!r} for {self.word!r}")

    @classmethod
    def from_interval(cls, word: str, start: float, end: float) -> "TimedWord":
        if end < start:
            raise ValueError(f"{word!r}: end {end} before start {start}")
        return cls(word, 0.5 * (start + end))


@dataclass(frozen=True)
class TimedBeat:
    t: float

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"bad beat timestamp {self.t!r}")


@dataclass(frozen=True)
class AlignmentResult:
    pairs: tuple[tuple[int, int], ...]
    r: float

    @property
    def beat_words(self) -> set[int]:
        return {w for _, w in self.pairs}

    @property
    def aligned_beats(self) -> set[int]:
        return {b for b, _ in self.pairs}


def average_word_duration(words: Sequence[TimedWord], total_duration: float) -> float:
    if not words:
        raise ValueError("average word duration needs at least one word")
    if total_duration <= 0:
        raise ValueError(f"total duration must be positive, got {total_duration}")
    return total_duration / len(words)


def align_beats(words: Sequence[TimedWord], beats: Sequence[TimedBeat], r: float,
                injective: bool = False) -> AlignmentResult:
    """Align every beat to its nearest word inside the ``r/2`` window.

    Ties go to the earlier word.  With ``injective=True`` a word takes at most
    one beat: candidate pairs are assigned greedily, nearest first.
    """
    if not words or not beats:
        return AlignmentResult((), r)
    order = sorted(range(len(words)), key=lambda i: (words[i].t, i))
    ts = [words[i].t for i in order]
    half = r / 2

    if injective:
        cands = []
        for j, b in enumerate(beats):
            lo = bisect_left(ts, b.t - half)
            k = lo
            while k < len(ts) and ts[k] <= b.t + half:
                d = abs(b.t - ts[k])
                if d <= half:
                    cands.append((d, order[k], j))
                k += 1
        cands.sort()
        used_w, used_b, pairs = set(), set(), []
        for _, wi, bj in cands:
            if wi in used_w or bj in used_b:
                continue
            used_w.add(wi)
            used_b.add(bj)
            pairs.append((bj, wi))
        return AlignmentResult(tuple(sorted(pairs)), r)

    pairs = []
    for j, b in enumerate(beats):
        k = bisect_left(ts, b.t)
        best = None
        if k > 0:
            # earliest word sharing the left neighbour's timestamp
            left = bisect_left(ts, ts[k - 1])
            best = (abs(b.t - ts[left]), ts[left], order[left])
        if k < len(ts):
            cand = (abs(b.t - ts[k]), ts[k], order[k])
            if best is None or cand < best:
                best = cand
        if best is not None and best[0] <= half:
            pairs.append((j, best[2]))
    return AlignmentResult(tuple(pairs), r)


@dataclass(frozen=True)
class FrequencyThresholds:
    """Words-per-beat buckets: MEDIUM within ``tolerance`` of ``center``."""

    center: float = 3.0
    tolerance: float = 0.25

    def label(self, ratio: float) -> FreqLabel:
        if abs(ratio - self.center) <= self.tolerance:
            return FreqLabel.MEDIUM
        return FreqLabel.SLOW if ratio < self.center else FreqLabel.FAST


def beat_frequency(song: Song, thresholds: FrequencyThresholds = FrequencyThresholds()) -> tuple[float, FreqLabel]:
    if song.n_beats == 0:
        raise ValueError(f"song {song.id!r} has no beats; beat frequency is undefined")
    ratio = song.n_words / song.n_beats
    return ratio, thresholds.label(ratio)


def with_frequency_label(song: Song, thresholds: FrequencyThresholds = FrequencyThresholds()) -> Song:
    _, label = beat_frequency(song, thresholds)
    return Song(song.id, song.sentences, label)


@dataclass
class TimedSong:
    """Timestamp records of one song: sentences of words, each with its own beats."""

    id: str
    sentences: list[list[TimedWord]] = field(default_factory=list)
    beats: list[list[TimedBeat]] = field(default_factory=list)
    duration: float | None = None

    @property
    def words(self) -> list[TimedWord]:
        return [w for s in self.sentences for w in s]

    def total_duration(self, intervals: list[tuple[float, float]]) -> float:
        if self.duration is not None:
            return self.duration
        return max(e for _, e in intervals) - min(s for s, _ in intervals)


def parse_timestamps(text: str, source: str = "<string>") -> list[tuple[TimedSong, list[list[tuple[float, float]]]]]:
    """Parse a timestamp file.

    Records are ``WORD <word> <start_s> <end_s>`` and ``BEAT <t_s>``; a blank
    line ends a sentence, ``#SONG <id>`` starts a song and ``#DURATION <s>``
    overrides the song duration (default: last word end minus first word start).
    Returns each song with the raw ``(start, end)`` intervals per sentence.
    """
    songs = []
    song, intervals = None, []

    def new_sentence():
        if song is not None and song.sentences[-1]:
            song.sentences.append([])
            song.beats.append([])
            intervals.append([])

    def finish():
        if song is None:
            return
        while song.sentences and not song.sentences[-1]:
            # beats listed after the last word belong to the previous sentence
            if len(song.beats) > 1:
                song.beats[-2].extend(song.beats[-1])
            song.sentences.pop()
            song.beats.pop()
            intervals.pop()
        if song.sentences:
            songs.append((song, intervals))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        where = f"{source}:{lineno}"
        if not line:
            new_sentence()
            continue
        if line.startswith("#SONG"):
            finish()
            song = TimedSong(line[5:].strip() or str(len(songs)), [[]], [[]])
            intervals = [[]]
            continue
        if song is None:
            song = TimedSong(str(len(songs)), [[]], [[]])
            intervals = [[]]
        parts = line.split()
        try:
            if parts[0] == "#DURATION":
                song.duration = float(parts[1])
            elif parts[0].startswith("#"):
                continue
            elif parts[0] == "WORD" and len(parts) == 4:
                start, end = float(parts[2]), float(parts[3])
                song.sentences[-1].append(TimedWord.from_interval(parts[1], start, end))
                intervals[-1].append((start, end))
            elif parts[0] == "BEAT" and len(parts) == 2:
                song.beats[-1].append(TimedBeat(float(parts[1])))
            else:
                raise TimestampFormatError(f"{where}: unrecognised record {line!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, TimestampFormatError):
                raise
            raise TimestampFormatError(f"{where}: {exc}") from exc
    finish()
    return songs


def align_song(song: TimedSong, intervals: list[list[tuple[float, float]]], injective: bool = False) -> Song:
    """Run alignment per sentence with the song-level average word duration."""
    flat = [iv for s in intervals for iv in s]
    r = average_word_duration(song.words, song.total_duration(flat))
    sentences = []
    for words, beats in zip(song.sentences, song.beats):
        result = align_beats(words, sorted(beats, key=lambda b: b.t), r, injective)
        hit = result.beat_words
        sentences.append(Sentence(tuple((w.word, i in hit) for i, w in enumerate(words))))
    return Song(song.id, tuple(sentences))


def align_file(path, injective: bool = False) -> list[Song]:
    path = Path(path)
    parsed = parse_timestamps(path.read_text(encoding="utf-8"), str(path))
    return [align_song(s, iv, injective) for s, iv in parsed]
