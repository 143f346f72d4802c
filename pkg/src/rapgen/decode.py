"""Rhyme-constrained autoregressive generation.

While the first words of the current (reversed) sentence keep matching the
vowels of the previous sentence position by position, the next-token
distribution is mixed with a vowel indicator::

    q(w) ∝ alpha * p(w) + (1 - alpha) * [vowel(w) == target vowel]

up to ``ngram_max`` positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import (EncodeConfig, FreqLabel, Sentence, Song, StructureError, Vocab, decode_sequence,
                     sentence_token_ids)
from .vowel import NULL_VOWEL, VowelDictionary

MODES = ("argmax", "temperature", "top-k")


class GenerationError(RuntimeError):
    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = list(transcript or [])


@dataclass(frozen=True)
class RhymeState:
    """Rhyme chain bookkeeping for the sentence being generated.

    ``position`` counts words emitted so far in the current sentence;
    ``current_matched`` counts leading positions whose vowels matched the
    previous sentence.
    """

    prev_sentence_vowels: tuple[int, ...] = ()
    current_matched: int = 0
    position: int = 0
    n_max: int = 3
    alpha: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0 <= self.current_matched <= self.n_max:
            raise ValueError("current_matched out of range")

    def next_sentence(self, finished_vowels: Sequence[int]) -> "RhymeState":
        return replace(self, prev_sentence_vowels=tuple(int(v) for v in finished_vowels),
                       current_matched=0, position=0)

    @property
    def target_vowel(self) -> int:
        return self.prev_sentence_vowels[self.position]


def constraint_active(state: RhymeState, i: int | None = None) -> bool:
    i = state.position if i is None else i
    return (i < state.n_max and state.current_matched == i
            and i < len(state.prev_sentence_vowels)
            and state.prev_sentence_vowels[i] != NULL_VOWEL)


def update_rhyme_state(state: RhymeState, word_vowel: int) -> RhymeState:
    """Advance past one emitted word; the chain only grows while unbroken."""
    i = state.position
    matched = state.current_matched
    if (matched == i and i < state.n_max and i < len(state.prev_sentence_vowels)
            and word_vowel != NULL_VOWEL and word_vowel == state.prev_sentence_vowels[i]):
        matched += 1
    return replace(state, current_matched=matched, position=i + 1)


def adjusted_distribution(p: np.ndarray, target_vowel: int, token_vowels: np.ndarray,
                          alpha: float) -> np.ndarray:
    """Mix ``p`` with the indicator of tokens whose vowel is ``target_vowel`` and renormalise.

    ``token_vowels`` gives the vowel id of every vocabulary entry (control
    tokens carry NULL_VOWEL and therefore never receive indicator mass).
    """
    if target_vowel == NULL_VOWEL:
        raise ValueError("target vowel must be a word vowel, not NULL_VOWEL")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    p = np.asarray(p, dtype=np.float64)
    if alpha == 1.0:
        return p.copy()
    indicator = (np.asarray(token_vowels) == target_vowel).astype(np.float64)
    q = alpha * p + (1.0 - alpha) * indicator
    total = q.sum()
    if total <= 0:
        raise ValueError("adjusted distribution has no mass: no token carries the target vowel")
    return q / total


@dataclass(frozen=True)
class GenControls:
    seed_sentence: Sentence
    freq: FreqLabel | None = None
    max_tokens: int = 256
    n_sentences: int = 8
    mode: str = "temperature"
    temperature: float = 1.0
    top_k: int = 10
    rng_seed: int = 0
    alpha: float = 0.95
    ngram_max: int = 3
    constrain: bool = True
    repair_budget: int = 16

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.n_sentences < 1 or self.max_tokens < 1:
            raise ValueError("n_sentences and max_tokens must be >= 1")


@dataclass
class _Session:
    """Token stream of one generation plus its incremental feature counters."""

    tokens: list[int]
    state: RhymeState
    sentence_vowels: list[int] = field(default_factory=list)
    words_in_sentence: int = 0
    sentence: int = 0
    sentences_done: int = 0
    repairs: int = 0
    done: bool = False


def _features(tok: int, sess: _Session, vocab: Vocab, token_vowels, cfg: EncodeConfig):
    """Features of ``tok`` given the session counters *before* it is appended."""
    intra = sess.words_in_sentence if (vocab.is_word(tok) or tok == vocab.beat) else 0
    return (int(token_vowels[tok]), min(intra, cfg.max_intra_pos - 1),
            min(sess.sentence, cfg.max_sentences - 1))


def _advance(tok: int, sess: _Session, vocab: Vocab, token_vowels):
    sess.tokens.append(tok)
    if vocab.is_word(tok):
        v = int(token_vowels[tok])
        sess.sentence_vowels.append(v)
        sess.words_in_sentence += 1
        sess.state = update_rhyme_state(sess.state, v)
    elif tok == vocab.sep:
        sess.state = sess.state.next_sentence(sess.sentence_vowels)
        sess.sentence_vowels = []
        sess.words_in_sentence = 0
        sess.sentence += 1
        sess.sentences_done += 1


def _allowed_mask(last: int, vocab: Vocab, V: int) -> np.ndarray:
    allowed = np.zeros(V, dtype=bool)
    allowed[vocab.n_special:] = True
    if last != vocab.beat:
        allowed[vocab.beat] = True
        if vocab.is_word(last):
            allowed[vocab.sep] = True
    return allowed


def _choose(q: np.ndarray, controls: GenControls, rng: np.random.Generator) -> int:
    if controls.mode == "argmax":
        return int(np.argmax(q))
    if controls.mode == "top-k":
        k = min(controls.top_k, int(np.count_nonzero(q)))
        keep = np.argsort(-q, kind="stable")[:k]
        sub = q[keep] / q[keep].sum()
        return int(keep[min(np.searchsorted(np.cumsum(sub), rng.random(), side="right"), k - 1)])
    cdf = np.cumsum(q)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(q) - 1))


def generate_transcripts(model, vocab: Vocab, vowels: VowelDictionary, controls: GenControls,
                         n_samples: int = 1, encode_cfg: EncodeConfig | None = None) -> list[list[int]]:
    """Generate ``n_samples`` token streams in lockstep with a key/value cache.

    Sample ``i`` draws from its own generator seeded with ``(rng_seed, i)``.
    """
    token_vowels = vocab.token_vowels(vowels)
    cfg = encode_cfg or EncodeConfig(max_len=model.cfg.max_abs_pos, max_intra_pos=model.cfg.max_intra_pos,
                                     max_sentences=model.cfg.max_sentences)
    max_tokens = min(controls.max_tokens, model.cfg.max_abs_pos)
    prefix = [vocab.start]
    if controls.freq is not None:
        prefix.append(vocab.freq_id(controls.freq))
    prefix += sentence_token_ids(controls.seed_sentence, vocab)
    if len(prefix) >= max_tokens:
        raise GenerationError("seed sentence does not fit in the token budget", prefix)

    base = RhymeState(n_max=controls.ngram_max, alpha=controls.alpha)
    sessions = [_Session([], base) for _ in range(n_samples)]
    rngs = [np.random.default_rng([controls.rng_seed, i]) for i in range(n_samples)]
    kv = model.empty_cache(n_samples)
    V = len(vocab)

    def feed(toks):
        feats = [(t,) + _features(t, s, vocab, token_vowels, cfg) + (len(s.tokens),)
                 for t, s in zip(toks, sessions)]
        cols = list(zip(*feats))
        logits, new_kv = model.step(kv, *[np.array(c) for c in cols])
        for t, s in zip(toks, sessions):
            _advance(t, s, vocab, token_vowels)
        return logits, new_kv

    for tok in prefix:
        logits, kv = feed([tok] * n_samples)

    while True:
        for s in sessions:
            if not s.done and (s.sentences_done >= controls.n_sentences or len(s.tokens) >= max_tokens):
                s.done = True
        if all(s.done for s in sessions):
            break
        z = logits / controls.temperature if controls.mode != "argmax" else logits
        z = z - z.max(-1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(-1, keepdims=True)
        nxt = []
        for i, s in enumerate(sessions):
            if s.done:
                nxt.append(vocab.pad)
                continue
            p = probs[i]
            allowed = _allowed_mask(s.tokens[-1], vocab, V)
            if p[~allowed].sum() > 0.5:
                s.repairs += 1
                if s.repairs > controls.repair_budget:
                    raise GenerationError(f"sample {i}: model keeps proposing invalid tokens", s.tokens)
            p = np.where(allowed, p, 0.0)
            if p.sum() <= 0:
                raise GenerationError(f"sample {i}: no valid continuation", s.tokens)
            p = p / p.sum()
            if controls.constrain and constraint_active(s.state):
                p = adjusted_distribution(p, s.state.target_vowel, token_vowels, controls.alpha)
            nxt.append(_choose(p, controls, rngs[i]))
        logits, kv = feed(nxt)

    out = []
    for s in sessions:
        toks = [t for t in s.tokens if t != vocab.pad]
        # drop an unfinished trailing sentence
        last_sep = max(i for i, t in enumerate(toks) if t == vocab.sep)
        out.append(toks[:last_sep + 1])
    return out


def generate_many(model, vocab: Vocab, vowels: VowelDictionary, controls: GenControls,
                  n_samples: int, encode_cfg: EncodeConfig | None = None) -> list[Song]:
    songs = []
    for i, toks in enumerate(generate_transcripts(model, vocab, vowels, controls, n_samples, encode_cfg)):
        try:
            songs.append(decode_sequence(toks, vocab, song_id=f"gen{i}"))
        except StructureError as exc:
            raise GenerationError(f"sample {i} is structurally invalid: {exc}", toks) from exc
    return songs


def generate(model, vocab: Vocab, vowels: VowelDictionary, controls: GenControls,
             encode_cfg: EncodeConfig | None = None) -> Song:
    return generate_many(model, vocab, vowels, controls, 1, encode_cfg)[0]
