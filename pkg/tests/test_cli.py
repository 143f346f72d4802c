import json

import pytest

from rapgen.checkpoint import checkpoint_digest
from rapgen.cli import CONFIG_ENV, EXIT_DATA, EXIT_OK, EXIT_USAGE, run
from rapgen.corpus import FreqLabel, read_corpus, render_sentence


def _tsv(path):
    return {k: float(v) for k, v in (line.split("\t") for line in path.read_text().splitlines())}


def _leftovers(directory):
    return [p for p in directory.iterdir() if p.name.startswith(".rapgen-")]


def test_synth_is_reproducible(tmp_path):
    assert run(["synth", "--out", str(tmp_path / "a"), "--seed", "7"]) == EXIT_OK
    assert run(["synth", "--out", str(tmp_path / "b"), "--seed", "7"]) == EXIT_OK
    for name in ("corpus.txt", "corpus.vowels.tsv", "corpus.ground_truth.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
    assert manifest["command"] == "synth"


def test_evaluate_reproduces_ground_truth(tmp_path):
    run(["synth", "--out", str(tmp_path / "s"), "--seed", "3", "--repeat-prob", "0.3"])
    code = run(["evaluate", "--corpus", str(tmp_path / "s/corpus.txt"), "--vowels",
                str(tmp_path / "s/corpus.vowels.tsv"), "--distributions", "--out", str(tmp_path / "ev")])
    assert code == EXIT_OK
    got, truth = _tsv(tmp_path / "ev/report.tsv"), _tsv(tmp_path / "s/corpus.ground_truth.tsv")
    for key, value in truth.items():
        assert got[key] == pytest.approx(value, abs=1e-9), key
    assert (tmp_path / "ev/report.txt").exists()


def test_missing_checkpoint_is_a_data_error(tmp_path, capsys):
    out = tmp_path / "gen.txt"
    code = run(["generate", "--checkpoint", str(tmp_path / "nope"), "--seed-sentence", "a b", "--out", str(out)])
    assert code == EXIT_DATA
    assert "checkpoint" in capsys.readouterr().err
    assert not out.exists() and not _leftovers(tmp_path)


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err
    assert run([]) == EXIT_USAGE


def test_config_file_and_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# synth settings\nout = {tmp_path / 'from_cfg'}\nseed=7\nn-songs=2\n")
    assert run(["--config", str(cfg), "synth"]) == EXIT_OK
    assert len(read_corpus(tmp_path / "from_cfg/corpus.txt")) == 2
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    assert run(["synth", "--n-songs", "3", "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert len(read_corpus(tmp_path / "flag/corpus.txt")) == 3
    # the environment config supplied the seed
    assert (tmp_path / "flag/corpus.txt").read_text().splitlines()[:2] == \
        (tmp_path / "from_cfg/corpus.txt").read_text().splitlines()[:2]


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed=seven\n")
    assert run(["--config", str(cfg), "synth", "--out", str(tmp_path / "x")]) == EXIT_DATA
    cfg.write_text("no equals sign\n")
    assert run(["--config", str(cfg), "synth", "--out", str(tmp_path / "x")]) == EXIT_DATA
    assert not (tmp_path / "x").exists()


def test_train_then_generate(tmp_path):
    run(["synth", "--out", str(tmp_path / "s"), "--seed", "1", "--n-songs", "3"])
    corpus = str(tmp_path / "s/corpus.txt")
    common = ["--corpus", corpus, "--vowels", str(tmp_path / "s/corpus.vowels.tsv"), "--hidden-size", "16",
              "--n-heads", "2", "--n-layers", "1", "--max-len", "128", "--steps", "3", "--batch-size", "2"]
    assert run(["train", *common, "--out", str(tmp_path / "m1")]) == EXIT_OK
    assert run(["train", *common, "--out", str(tmp_path / "m2")]) == EXIT_OK
    ck = tmp_path / "m1/checkpoint"
    assert checkpoint_digest(ck) == checkpoint_digest(tmp_path / "m2/checkpoint")
    manifest = json.loads((tmp_path / "m1/run_manifest.json").read_text())
    assert manifest["outputs"]["checkpoint"] == checkpoint_digest(ck)
    assert len((tmp_path / "m1/train_log.tsv").read_text().splitlines()) == 4

    seed = read_corpus(corpus)[0].sentences[0]
    sentence = render_sentence(seed)
    outs = []
    for name in ("g1.txt", "g2.txt"):
        code = run(["generate", "--checkpoint", str(ck), "--seed-sentence", sentence, "--freq", "f",
                    "--n-sentences", "3", "--n-samples", "2", "--max-tokens", "60", "--out", str(tmp_path / name)])
        assert code == EXIT_OK
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    songs = read_corpus(tmp_path / "g1.txt")
    assert len(songs) == 2 and all(s.freq_label is FreqLabel.FAST for s in songs)
    gen_manifest = json.loads((tmp_path / "g1.txt.manifest.json").read_text())
    assert gen_manifest["inputs"]["checkpoint"] == checkpoint_digest(ck)


TIMESTAMPS = """#SONG demo
WORD 我 0.0 0.4
BEAT 0.45
WORD 抬 0.4 0.8
WORD 头 0.8 1.2

WORD 仰 1.2 1.6
BEAT 1.55
WORD 望 1.6 2.0
"""


def test_align_and_ingest(tmp_path):
    ts = tmp_path / "t.txt"
    ts.write_text(TIMESTAMPS, encoding="utf-8")
    before = ts.read_bytes()
    assert run(["align", "--timestamps", str(ts), "--out", str(tmp_path / "al")]) == EXIT_OK
    assert ts.read_bytes() == before
    (song,) = read_corpus(tmp_path / "al/corpus.txt")
    assert song.n_words == 5 and song.n_beats == 2

    src = tmp_path / "al/corpus.txt"
    before = src.read_bytes()
    assert run(["ingest", "--corpus", str(src), "--out", str(tmp_path / "in")]) == EXIT_OK
    assert src.read_bytes() == before
    rows = (tmp_path / "in/stats.tsv").read_text().splitlines()
    assert rows[1].split("\t")[-1] == FreqLabel.SLOW.value  # 5 words / 2 beats = 2.5
    (labelled,) = read_corpus(tmp_path / "in/corpus.txt")
    assert labelled.freq_label is FreqLabel.SLOW


def test_malformed_timestamps(tmp_path):
    ts = tmp_path / "t.txt"
    ts.write_text("WORD a zero 1\n", encoding="utf-8")
    assert run(["align", "--timestamps", str(ts), "--out", str(tmp_path / "al")]) == EXIT_DATA
    assert not (tmp_path / "al").exists() and not _leftovers(tmp_path)
