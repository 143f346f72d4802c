"""Independent reference implementations used by the tests.

None of these import the metric or alignment code they check.
"""
import numpy as np
from scipy.optimize import linprog

from rapgen.align import TimedBeat, TimedWord
from rapgen.model import make_batch


def gradient_check(model, seqs, pad_id=0, n_samples=12, h=1e-5, seed=0, dropout_seed=None):
    """Per-tensor relative error ||g_a - g_n|| / (||g_a|| + ||g_n||) on sampled entries.

    Samples the largest-|grad| entries plus random ones among entries with a
    non-zero analytic gradient (so embedding rows the batch touches are
    checked) plus a couple of untouched entries.
    """
    batch = make_batch(seqs, pad_id)

    def rng():
        return None if dropout_seed is None else np.random.default_rng(dropout_seed)

    _, grads = model.loss_and_grads(batch, rng())
    pick = np.random.default_rng(seed)
    errors = {}
    for name, g in grads.items():
        flat = g.ravel()
        order = np.argsort(-np.abs(flat))
        live = np.flatnonzero(flat)
        dead = np.flatnonzero(flat == 0)
        idx = set(order[:n_samples // 2].tolist())
        if len(live):
            idx |= set(pick.choice(live, min(n_samples // 2, len(live)), replace=False).tolist())
        if len(dead):
            idx |= set(pick.choice(dead, min(2, len(dead)), replace=False).tolist())
        idx = sorted(idx)
        p = model.params[name].reshape(-1)
        numeric = []
        for i in idx:
            old = p[i]
            p[i] = old + h
            up = model.loss(batch, rng())
            p[i] = old - h
            down = model.loss(batch, rng())
            p[i] = old
            numeric.append((up - down) / (2 * h))
        a, n = flat[idx], np.array(numeric)
        denom = np.linalg.norm(a) + np.linalg.norm(n)
        errors[name] = float(np.linalg.norm(a - n) / denom) if denom > 0 else 0.0
    return errors


def lp_wasserstein(xa, pa, xb, pb):
    """W1 between two discrete distributions by solving the transport LP."""
    xa, xb = np.asarray(xa, float), np.asarray(xb, float)
    m, n = len(xa), len(xb)
    cost = np.abs(xa[:, None] - xb[None, :]).ravel()
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([pa, pb]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def first_vowel_pairs(tokens, is_word, vowel_of_token, sep):
    """(step, previous sentence's first vowel) for every non-initial sentence start."""
    sentences, cur = [], []
    for j, t in enumerate(tokens):
        if t == sep:
            sentences.append(cur)
            cur = []
        elif is_word(t):
            cur.append(j)
    out = []
    for prev, now in zip(sentences, sentences[1:]):
        if prev and now:
            out.append((now[0], vowel_of_token[tokens[prev[0]]]))
    return out


def recount_rhyme_accuracy(log_probs, seqs, vocab, token_vowels):
    hit = total = 0
    for lp, seq in zip(log_probs, seqs):
        toks = [int(t) for t in seq.tokens[:seq.n_real]]
        for step, target in first_vowel_pairs(toks, vocab.is_word, token_vowels, vocab.sep):
            if target == 0:
                continue
            total += 1
            hit += token_vowels[int(np.argmax(lp[step - 1]))] == target
    return 100.0 * hit / total


def recount_beat_accuracy(log_probs, seqs, beat):
    hit = total = 0
    for lp, seq in zip(log_probs, seqs):
        toks = [int(t) for t in seq.tokens[:seq.n_real]]
        for j in range(1, len(toks)):
            total += 1
            hit += (int(np.argmax(lp[j - 1])) == beat) == (toks[j] == beat)
    return 100.0 * hit / total


class TableModel:
    """Stand-in model returning fixed log-probability rows (duck-typed for metrics)."""

    def __init__(self, rows_fn):
        self.rows_fn = rows_fn

    def batch_log_probs(self, seqs, pad_id=0):
        return [self.rows_fn(s) for s in seqs]


def brute_force_alignment(words, beats, r):
    """Every beat against every word: nearest, ties to the earlier word."""
    pairs = []
    for j, b in enumerate(beats):
        best = min(range(len(words)), key=lambda i: (abs(b.t - words[i].t), words[i].t, i))
        if abs(b.t - words[best].t) <= r / 2:
            pairs.append((j, best))
    return tuple(pairs)


def random_alignment_instance(rng):
    n_w, n_b = int(rng.integers(1, 15)), int(rng.integers(0, 10))
    # a coarse grid makes exact ties and window-edge cases common
    step = float(rng.choice([0.25, 0.5, 1.0]))
    wt = rng.integers(0, 40, n_w) * step
    bt = rng.integers(0, 40, n_b) * step
    r = float(rng.integers(1, 8)) * step
    return [TimedWord(f"w{i}", float(t)) for i, t in enumerate(wt)], [TimedBeat(float(t)) for t in bt], r
