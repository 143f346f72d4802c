"""Beat-annotated lyrics: parsing, rendering and reverse-order encoding.

Lyric format, one sentence per line, ``*`` right before a beat-aligned word::

    我长大的地方像一*个简朴*的寨

Chinese text is tokenized per character; runs of other non-space characters
form a single word, so synthetic corpora can use whitespace-separated
syllables.

Corpus files hold several songs::

    #SONG 0001
    #FREQ F
    ...lyric lines...
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .vowel import NULL_VOWEL, VowelDictionary

logger = logging.getLogger(__name__)

PAD, START, SEP, BEAT, UNK = "[PAD]", "[START]", "[SEP]", "[BEAT]", "[UNK]"
FREQ_TOKENS = ("[S]", "[M]", "[F]")
SPECIAL_TOKENS = (PAD, START, SEP, BEAT, UNK) + FREQ_TOKENS

_SEPARATORS = set("，。！？、；：,.!?;:\"“”‘’()（）《》")


class StructureError(ValueError):
    """A lyric line or token stream violates the corpus grammar."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"position {position}: {message}")
        self.position = position


class FreqLabel(enum.Enum):
    SLOW = "S"
    MEDIUM = "M"
    FAST = "F"

    @property
    def token(self) -> str:
        return f"[{self.value}]"

    @classmethod
    def parse(cls, text: str) -> "FreqLabel":
        key = text.strip().upper()
        for label in cls:
            if key in (label.value, label.name, label.token):
                return label
        raise ValueError(f"unknown frequency label {text!r}")


@dataclass(frozen=True)
class Sentence:
    words: tuple[tuple[str, bool], ...]

    def __post_init__(self):
        if not self.words:
            raise StructureError("empty sentence")
        object.__setattr__(self, "words", tuple((str(w), bool(b)) for w, b in self.words))

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], beats: Sequence[bool] | None = None) -> "Sentence":
        beats = [False] * len(tokens) if beats is None else beats
        return cls(tuple(zip(tokens, beats)))

    @property
    def tokens(self) -> list[str]:
        return [w for w, _ in self.words]

    @property
    def beats(self) -> list[bool]:
        return [b for _, b in self.words]

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True)
class Song:
    id: str
    sentences: tuple[Sentence, ...]
    freq_label: FreqLabel | None = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise StructureError(f"song {self.id!r} has no sentences")

    @property
    def n_words(self) -> int:
        return sum(len(s) for s in self.sentences)

    @property
    def n_beats(self) -> int:
        return sum(sum(s.beats) for s in self.sentences)


def is_cjk(ch: str) -> bool:
    o = ord(ch)
    return (0x3400 <= o <= 0x4DBF or 0x4E00 <= o <= 0x9FFF or 0xF900 <= o <= 0xFAFF
            or 0x20000 <= o <= 0x2FA1F)


def tokenize_line(line: str) -> list[tuple[str, bool]]:
    """Split one annotated lyric line into ``(word, has_beat)`` pairs."""
    words: list[tuple[str, bool]] = []
    pending = False
    run: list[str] = []
    run_beat = False

    def flush():
        nonlocal run, run_beat
        if run:
            words.append(("".join(run), run_beat))
            run, run_beat = [], False

    for col, ch in enumerate(line):
        if ch == "*":
            flush()
            if pending:
                raise StructureError(f"repeated '*' in {line!r}", col)
            pending = True
        elif ch.isspace() or ch in _SEPARATORS:
            flush()
            if pending:
                raise StructureError(f"'*' not followed by a word in {line!r}", col)
        elif is_cjk(ch):
            flush()
            words.append((ch, pending))
            pending = False
        else:
            if not run:
                run_beat, pending = pending, False
            run.append(ch)
    flush()
    if pending:
        raise StructureError(f"dangling '*' at end of line {line!r}", len(line))
    return words


def parse_song(text: str, song_id: str = "0", freq_label: FreqLabel | None = None) -> Song:
    sentences = [Sentence(tuple(words)) for words in map(tokenize_line, text.splitlines()) if words]
    if not sentences:
        raise StructureError("empty lyrics")
    return Song(song_id, tuple(sentences), freq_label)


def _joiner(prev: str, word: str) -> str:
    if len(prev) == 1 and len(word) == 1 and is_cjk(prev) and is_cjk(word):
        return ""
    return " "


def render_sentence(sentence: Sentence) -> str:
    out = []
    prev = None
    for word, beat in sentence.words:
        if prev is not None:
            out.append(_joiner(prev, word))
        out.append(("*" if beat else "") + word)
        prev = word
    return "".join(out)


def render_song(song: Song) -> str:
    return "\n".join(render_sentence(s) for s in song.sentences) + "\n"


def parse_corpus(text: str) -> list[Song]:
    songs: list[Song] = []
    song_id, label, lines = None, None, []

    def close():
        if song_id is not None or any(line.strip() for line in lines):
            songs.append(parse_song("\n".join(lines), song_id or str(len(songs)), label))

    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#SONG"):
            close()
            song_id, label, lines = line[5:].strip() or str(len(songs)), None, []
        elif line.startswith("#FREQ"):
            label = FreqLabel.parse(line[5:])
        elif line.startswith("#"):
            continue
        else:
            lines.append(raw)
    close()
    return songs


def render_corpus(songs: Iterable[Song]) -> str:
    parts = []
    for song in songs:
        header = f"#SONG {song.id}\n"
        if song.freq_label is not None:
            header += f"#FREQ {song.freq_label.value}\n"
        parts.append(header + render_song(song))
    return "".join(parts)


def read_corpus(path) -> list[Song]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def write_corpus(songs: Iterable[Song], path) -> None:
    Path(path).write_text(render_corpus(songs), encoding="utf-8")


class Vocab:
    """Token <-> id table; special tokens occupy the first ids."""

    def __init__(self, words: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIAL_TOKENS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for w in words:
            self.add(w)

    @classmethod
    def from_songs(cls, songs: Iterable[Song]) -> "Vocab":
        words = {w for song in songs for s in song.sentences for w in s.tokens}
        return cls(sorted(words - set(SPECIAL_TOKENS)))

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.stoi[UNK])

    def token(self, idx: int) -> str:
        return self.itos[idx]

    @property
    def pad(self): return self.stoi[PAD]

    @property
    def start(self): return self.stoi[START]

    @property
    def sep(self): return self.stoi[SEP]

    @property
    def beat(self): return self.stoi[BEAT]

    @property
    def unk(self): return self.stoi[UNK]

    def freq_id(self, label: FreqLabel) -> int:
        return self.stoi[label.token]

    @property
    def n_special(self) -> int:
        return len(SPECIAL_TOKENS)

    def is_word(self, idx: int) -> bool:
        return idx >= len(SPECIAL_TOKENS)

    def token_vowels(self, vowels: VowelDictionary) -> np.ndarray:
        """Vowel id of every token; control tokens and unknown words get NULL_VOWEL."""
        out = np.zeros(len(self), dtype=np.int64)
        missing = []
        for i in range(len(SPECIAL_TOKENS), len(self)):
            out[i] = vowels.vowel_or_null(self.itos[i])
            if out[i] == NULL_VOWEL:
                missing.append(self.itos[i])
        if missing:
            logger.warning("%d vocabulary words have no vowel entry (e.g. %s); using NULL_VOWEL",
                           len(missing), ", ".join(missing[:5]))
        return out

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        tokens = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(tokens[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError(f"{path}: vocabulary does not start with the special tokens")
        return cls(tokens[len(SPECIAL_TOKENS):])


@dataclass(frozen=True)
class EncodeConfig:
    max_len: int = 1024
    max_intra_pos: int = 32
    max_sentences: int = 128
    pad_to_max: bool = False


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Per-position model inputs for one song (all int64 arrays of equal length)."""

    tokens: np.ndarray
    vowels: np.ndarray
    intra_pos: np.ndarray
    sent_idx: np.ndarray
    abs_pos: np.ndarray
    truncated: bool = False

    def __len__(self):
        return len(self.tokens)

    @property
    def n_real(self) -> int:
        """Length without trailing padding."""
        return int(np.count_nonzero(self.tokens != SPECIAL_TOKENS.index(PAD)))

    @classmethod
    def from_tokens(cls, tokens: Sequence[int], token_vowels: np.ndarray, vocab: Vocab,
                    cfg: EncodeConfig = EncodeConfig(), truncated: bool = False) -> "FeatureSequence":
        """Derive every feature from the token stream alone.

        Word tokens count 0, 1, 2, ... inside a sentence; a [BEAT] takes the
        index of the word that follows it; [SEP] and tokens before the first
        sentence get 0.  The sentence index advances after each [SEP].
        """
        toks = np.asarray(tokens, dtype=np.int64)
        n = len(toks)
        intra = np.zeros(n, dtype=np.int64)
        sent = np.zeros(n, dtype=np.int64)
        n_special = vocab.n_special
        sep, beat, pad = vocab.sep, vocab.beat, vocab.pad
        words_in_sentence, sentence = 0, 0
        for i, t in enumerate(toks.tolist()):
            sent[i] = sentence
            if t >= n_special:
                intra[i] = words_in_sentence
                words_in_sentence += 1
            elif t == beat:
                intra[i] = words_in_sentence
            elif t == sep:
                sentence += 1
                words_in_sentence = 0
            elif t == pad:
                sent[i] = 0
        np.minimum(intra, cfg.max_intra_pos - 1, out=intra)
        np.minimum(sent, cfg.max_sentences - 1, out=sent)
        return cls(
            tokens=toks,
            vowels=np.asarray(token_vowels, dtype=np.int64)[toks],
            intra_pos=intra,
            sent_idx=sent,
            abs_pos=np.arange(n, dtype=np.int64),
            truncated=truncated,
        )

    def padded(self, length: int, pad_id: int = 0) -> "FeatureSequence":
        n = len(self)
        if n >= length:
            return self
        extra = length - n

        def ext(a, fill=0):
            return np.concatenate([a, np.full(extra, fill, dtype=np.int64)])

        return FeatureSequence(ext(self.tokens, pad_id), ext(self.vowels), ext(self.intra_pos),
                               ext(self.sent_idx), np.arange(length, dtype=np.int64), self.truncated)


def song_token_ids(song: Song, vocab: Vocab, include_freq: bool = True) -> list[int]:
    """[START] (freq) then each sentence reversed, [BEAT] before beat words, [SEP] after."""
    ids = [vocab.start]
    if include_freq and song.freq_label is not None:
        ids.append(vocab.freq_id(song.freq_label))
    for sentence in song.sentences:
        ids.extend(sentence_token_ids(sentence, vocab))
    return ids


def sentence_token_ids(sentence: Sentence, vocab: Vocab, close: bool = True) -> list[int]:
    ids = []
    for word, beat in reversed(sentence.words):
        if beat:
            ids.append(vocab.beat)
        ids.append(vocab.id(word))
    if close:
        ids.append(vocab.sep)
    return ids


def encode_training_sequence(song: Song, vowels: VowelDictionary, vocab: Vocab,
                             cfg: EncodeConfig = EncodeConfig(), token_vowels: np.ndarray | None = None,
                             include_freq: bool = True) -> FeatureSequence:
    ids = song_token_ids(song, vocab, include_freq)
    truncated = len(ids) > cfg.max_len
    if truncated:
        logger.warning("song %s has %d tokens; truncated to %d", song.id, len(ids), cfg.max_len)
        ids = ids[:cfg.max_len]
    if token_vowels is None:
        token_vowels = vocab.token_vowels(vowels)
    seq = FeatureSequence.from_tokens(ids, token_vowels, vocab, cfg, truncated)
    if cfg.pad_to_max:
        seq = seq.padded(cfg.max_len, vocab.pad)
    return seq


def encode_corpus(songs: Iterable[Song], vowels: VowelDictionary, vocab: Vocab,
                  cfg: EncodeConfig = EncodeConfig(), include_freq: bool = True) -> list[FeatureSequence]:
    token_vowels = vocab.token_vowels(vowels)
    return [encode_training_sequence(s, vowels, vocab, cfg, token_vowels, include_freq) for s in songs]


def decode_sequence(seq: FeatureSequence | Sequence[int], vocab: Vocab, song_id: str = "0",
                    allow_partial: bool = False) -> Song:
    """Invert :func:`encode_training_sequence`.

    A trailing sentence without [SEP] is kept only when ``allow_partial`` is
    set (or the sequence is flagged as truncated).
    """
    tokens = seq.tokens.tolist() if isinstance(seq, FeatureSequence) else list(seq)
    allow_partial = allow_partial or getattr(seq, "truncated", False)
    freq_ids = {vocab.freq_id(label): label for label in FreqLabel}
    label = None
    pos = 0
    if not tokens or tokens[0] != vocab.start:
        raise StructureError("sequence must start with [START]", 0)
    pos = 1
    if pos < len(tokens) and tokens[pos] in freq_ids:
        label = freq_ids[tokens[pos]]
        pos += 1

    sentences: list[Sentence] = []
    current: list[tuple[str, bool]] = []
    beat_pending = False
    for i in range(pos, len(tokens)):
        t = tokens[i]
        if t == vocab.pad:
            if beat_pending:
                raise StructureError("[BEAT] not followed by a word", i)
            # padding runs to the end
            if any(x != vocab.pad for x in tokens[i:]):
                raise StructureError("[PAD] inside the sequence", i)
            break
        if t == vocab.beat:
            if beat_pending:
                raise StructureError("two consecutive [BEAT] tokens", i)
            beat_pending = True
        elif t == vocab.sep:
            if beat_pending:
                raise StructureError("[BEAT] before [SEP]", i)
            if not current:
                raise StructureError("empty sentence", i)
            sentences.append(Sentence(tuple(reversed(current))))
            current = []
        elif vocab.is_word(t) or t == vocab.unk:
            current.append((vocab.token(t), beat_pending))
            beat_pending = False
        else:
            raise StructureError(f"unexpected control token {vocab.token(t)}", i)
    if beat_pending:
        raise StructureError("sequence ends with [BEAT]", len(tokens) - 1)
    if current:
        if not allow_partial:
            raise StructureError("last sentence is not closed by [SEP]", len(tokens))
        sentences.append(Sentence(tuple(reversed(current))))
    if not sentences:
        raise StructureError("no sentences in sequence", len(tokens))
    return Song(song_id, tuple(sentences), label)
