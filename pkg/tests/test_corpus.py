import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapgen.corpus import (BEAT, SEP, START, EncodeConfig, FreqLabel, Sentence, Song, StructureError, Vocab,
                           decode_sequence, encode_corpus, encode_training_sequence, parse_corpus, parse_song,
                           render_corpus, render_song, tokenize_line)
from rapgen.synth import SynthSpec, generate_synthetic_corpus
from rapgen.vowel import NULL_VOWEL, builtin_dictionary

FIG3 = "我*抬头*仰望\n天空*的苍*茫\n"


@pytest.fixture(scope="module")
def vowels():
    return builtin_dictionary()


def tokens_of(seq, vocab):
    return [vocab.token(t) for t in seq.tokens[:seq.n_real]]


def test_beat_markers_on_first_line():
    song = parse_song("我长大的地方像一*个简朴*的寨")
    s = song.sentences[0]
    assert "".join(s.tokens) == "我长大的地方像一个简朴的寨"
    assert [w for w, b in s.words if b] == ["个", "的"]
    assert s.beats.count(True) == 2


def test_line_without_beats():
    song = parse_song("我长大的地方")
    assert not any(song.sentences[0].beats)


def test_render_single_beat():
    s = Song("x", (Sentence.from_tokens(["a", "b", "c"], [False, True, False]),))
    assert render_song(s) == "a *b c\n"


def test_render_without_beats():
    song = parse_song("天空的苍茫\n我抬头")
    assert render_song(song) == "天空的苍茫\n我抬头\n"


def test_mixed_script_tokenization():
    assert tokenize_line("我爱 *rap，*你") == [("我", False), ("爱", False), ("rap", True), ("你", True)]


@pytest.mark.parametrize("line", ["我**爱", "我爱*", "* 我", "我*，爱"])
def test_bad_markers(line):
    with pytest.raises(StructureError):
        tokenize_line(line)


def test_reversed_stream_of_sample(vowels):
    song = parse_song(FIG3)
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    toks = tokens_of(seq, vocab)
    assert toks[:9] == [START, "望", BEAT, "仰", "头", BEAT, "抬", "我", SEP]
    assert toks[9:] == [BEAT, "茫", "苍", BEAT, "的", "空", "天", SEP]
    # beats share the intra position of the word they precede
    assert seq.intra_pos.tolist()[:9] == [0, 0, 1, 1, 2, 3, 3, 4, 0]
    assert seq.sent_idx.tolist() == [0] * 9 + [1] * 8
    assert render_song(decode_sequence(seq, vocab)) == FIG3


def test_one_word_sentence(vowels):
    song = Song("x", (Sentence.from_tokens(["寨"]),))
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    assert tokens_of(seq, vocab) == [START, "寨", SEP]
    assert seq.intra_pos[1] == 0


def test_freq_token_after_start(vowels):
    song = parse_song("我抬头", freq_label=FreqLabel.FAST)
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    assert tokens_of(seq, vocab)[:2] == [START, "[F]"]
    assert decode_sequence(seq, vocab).freq_label is FreqLabel.FAST


@pytest.mark.parametrize("tokens,msg", [
    ([START, SEP], "empty sentence"),
    ([SEP], "START"),
    ([START, "我", BEAT, SEP], "BEAT"),
    ([START, BEAT, BEAT, "我", SEP], "BEAT"),
])
def test_degenerate_sequences(tokens, msg):
    vocab = Vocab(["我"])
    with pytest.raises(StructureError, match=msg):
        decode_sequence([vocab.id(t) for t in tokens], vocab)


def test_partial_tail_needs_flag():
    vocab = Vocab(["我", "你"])
    ids = [vocab.id(t) for t in [START, "我", SEP, "你"]]
    with pytest.raises(StructureError):
        decode_sequence(ids, vocab)
    assert len(decode_sequence(ids, vocab, allow_partial=True).sentences) == 2


def test_truncation_is_flagged(vowels):
    song = parse_song("我抬头仰望\n天空的苍茫")
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab, EncodeConfig(max_len=5))
    assert seq.truncated and len(seq) == 5
    assert decode_sequence(seq, vocab).sentences[0].tokens == ["抬", "头", "仰", "望"]


def test_caps_clamp(vowels):
    song = Song("x", tuple(Sentence.from_tokens(list("我抬头仰望天空")) for _ in range(6)))
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab, EncodeConfig(max_intra_pos=4, max_sentences=3))
    assert seq.intra_pos.max() == 3
    assert seq.sent_idx.max() == 2


def test_control_tokens_carry_null_vowel(vowels):
    song = parse_song(FIG3, freq_label=FreqLabel.SLOW)
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    control = seq.tokens < vocab.n_special
    assert (seq.vowels[control] == NULL_VOWEL).all()
    assert (seq.vowels[~control] != NULL_VOWEL).all()


def test_unknown_word_gets_null_vowel(vowels, caplog):
    song = parse_song("我 zzz")
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    assert seq.vowels[1] == NULL_VOWEL  # reversed: zzz comes first
    assert "no vowel entry" in caplog.text


def test_rhyme_positions_share_intra_pos(vowels):
    corpus = generate_synthetic_corpus(SynthSpec(n_songs=5, seed=3))
    vocab = Vocab.from_songs(corpus.songs)
    for seq in encode_corpus(corpus.songs, corpus.vowels, vocab):
        words = [(int(s), int(p)) for t, s, p in zip(seq.tokens, seq.sent_idx, seq.intra_pos) if vocab.is_word(t)]
        per_sentence = {}
        for s, p in words:
            per_sentence.setdefault(s, []).append(p)
        for positions in per_sentence.values():
            assert positions == list(range(len(positions)))


def test_vocab_save_load(tmp_path):
    vocab = Vocab(["我", "你", "rap"])
    vocab.save(tmp_path / "v.txt")
    assert Vocab.load(tmp_path / "v.txt") == vocab
    assert vocab.id("nope") == vocab.unk


def test_corpus_headers_round_trip():
    songs = [parse_song("我*抬头", "a", FreqLabel.MEDIUM), parse_song("天空\n的苍茫", "b")]
    assert parse_corpus(render_corpus(songs)) == songs


def test_synthetic_round_trips(vowels):
    corpus = generate_synthetic_corpus(SynthSpec(n_songs=200, seed=11))
    vocab = Vocab.from_songs(corpus.songs)
    for song, seq in zip(corpus.songs, encode_corpus(corpus.songs, corpus.vowels, vocab)):
        assert parse_song(render_song(song), song.id) == song
        assert decode_sequence(seq, vocab, song.id) == song


cjk = st.characters(min_codepoint=0x4E00, max_codepoint=0x4FFF)
latin = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=5)
word = st.one_of(cjk, latin)
sentence = st.lists(st.tuples(word, st.booleans()), min_size=1, max_size=8).map(lambda ws: Sentence(tuple(ws)))
song_strategy = st.builds(lambda ss, f: Song("h", tuple(ss), f),
                          st.lists(sentence, min_size=1, max_size=5),
                          st.one_of(st.none(), st.sampled_from(list(FreqLabel))))


@settings(max_examples=200, deadline=None)
@given(song_strategy)
def test_round_trip_property(song):
    vowels = builtin_dictionary()
    assert parse_corpus(render_corpus([song])) == [song]
    vocab = Vocab.from_songs([song])
    seq = encode_training_sequence(song, vowels, vocab)
    assert decode_sequence(seq, vocab, "h") == song
    assert np.array_equal(seq.abs_pos, np.arange(len(seq)))
