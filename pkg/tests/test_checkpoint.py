import numpy as np
import pytest

from rapgen.checkpoint import CheckpointError, checkpoint_digest, load_checkpoint, save_checkpoint
from rapgen.corpus import Vocab
from rapgen.model import ModelConfig, init_model
from rapgen.synth import SynthSpec, generate_synthetic_corpus


@pytest.fixture
def parts():
    c = generate_synthetic_corpus(SynthSpec(n_songs=3, seed=0))
    vocab = Vocab.from_songs(c.songs)
    model = init_model(ModelConfig(len(vocab), c.vowels.n_vowels, hidden_size=16, n_heads=2, n_layers=1,
                                   dropout=0.05, tie_embeddings=True), 4)
    return model, vocab, c.vowels


def test_round_trip(tmp_path, parts):
    model, vocab, vowels = parts
    save_checkpoint(tmp_path / "ck", model, vocab, vowels, {"steps": "12"})
    ck = load_checkpoint(tmp_path / "ck")
    assert ck.model.cfg == model.cfg
    assert all(np.array_equal(ck.model.params[k], model.params[k]) for k in model.params)
    assert ck.vocab == vocab
    assert ck.vowels.entries == vowels.entries
    assert ck.meta == {"steps": "12"}


def test_digest_is_stable(tmp_path, parts):
    model, vocab, vowels = parts
    save_checkpoint(tmp_path / "a", model, vocab, vowels)
    save_checkpoint(tmp_path / "b", model, vocab, vowels)
    assert checkpoint_digest(tmp_path / "a") == checkpoint_digest(tmp_path / "b")
    model.params["head.b"][0] += 1e-12
    save_checkpoint(tmp_path / "c", model, vocab, vowels)
    assert checkpoint_digest(tmp_path / "c") != checkpoint_digest(tmp_path / "a")


def test_missing_directory(tmp_path):
    with pytest.raises(CheckpointError, match="missing manifest"):
        load_checkpoint(tmp_path / "nope")


def test_version_mismatch(tmp_path, parts):
    save_checkpoint(tmp_path / "ck", *parts)
    manifest = tmp_path / "ck" / "manifest.txt"
    manifest.write_text(manifest.read_text().replace("version=1", "version=99"))
    with pytest.raises(CheckpointError, match="version 99"):
        load_checkpoint(tmp_path / "ck")


def test_truncated_params(tmp_path, parts):
    save_checkpoint(tmp_path / "ck", *parts)
    blob = tmp_path / "ck" / "params.bin"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(tmp_path / "ck")


def test_vocab_size_mismatch(tmp_path, parts):
    model, vocab, vowels = parts
    save_checkpoint(tmp_path / "ck", model, Vocab(list(vocab.itos[8:]) + ["extra"]), vowels)
    with pytest.raises(CheckpointError, match="vocabulary"):
        load_checkpoint(tmp_path / "ck")
