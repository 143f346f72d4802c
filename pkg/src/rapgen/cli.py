"""Command line entry point: ``rapgen {align,ingest,synth,train,generate,evaluate}``.

Options can also come from a flat ``key=value`` config file (``--config`` or
the ``RAPGEN_CONFIG`` environment variable); command-line flags win.  Every
command writes ``run_manifest.json`` next to its outputs.  Outputs are staged
in a temporary directory and only moved into place on success.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .align import FrequencyThresholds, TimestampFormatError, align_file, beat_frequency
from .checkpoint import CheckpointError, checkpoint_digest, load_checkpoint, save_checkpoint
from .corpus import (EncodeConfig, FreqLabel, StructureError, Vocab, encode_corpus, parse_song, read_corpus,
                     write_corpus)
from .decode import GenControls, GenerationError, generate_many
from .metrics import distribution_entries, evaluate
from .model import ConfigError, ModelConfig, TrainConfig, TrainingError, TransformerLM, train
from .synth import InfeasibleSpecError, SynthSpec, frequency_corpus, generate_synthetic_corpus
from .vowel import DictionaryFormatError, builtin_dictionary, load_dictionary

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
CONFIG_ENV = "RAPGEN_CONFIG"

logger = logging.getLogger("rapgen")


class DataError(Exception):
    pass


def _int_pair(text):
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def _int_tuple(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rapgen", description="Rhyme- and beat-aware rap lyric modelling.")
    parser.add_argument("--config", help="flat key=value config file (default: $%s)" % CONFIG_ENV)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("align", help="align beats to words from a timestamp file")
    p.add_argument("--timestamps", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--injective", action="store_true", help="at most one beat per word")
    p.add_argument("--label-frequency", action="store_true")

    p = sub.add_parser("ingest", help="validate a corpus and attach beat-frequency labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--freq-center", type=float, default=3.0)
    p.add_argument("--freq-tolerance", type=float, default=0.25)

    p = sub.add_parser("synth", help="write a synthetic corpus with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-songs", type=int, default=10)
    p.add_argument("--sentences-per-song", type=int, default=5)
    p.add_argument("--sentence-length", type=_int_pair, default=(4, 6), help="MIN,MAX words")
    p.add_argument("--vocab-size", type=int, default=64)
    p.add_argument("--n-vowel-classes", type=int, default=8)
    p.add_argument("--ngram", type=int, default=2)
    p.add_argument("--chain-length", type=int, default=3)
    p.add_argument("--beat-pattern", type=_int_tuple, default=(2, 2, 4), help="comma-separated intervals")
    p.add_argument("--repeat-prob", type=float, default=0.0)
    p.add_argument("--frequency-classes", action="store_true",
                   help="emit slow/medium/fast labelled songs instead of one beat pattern")

    p = sub.add_parser("train", help="train (pre-train and/or fine-tune) a model")
    p.add_argument("--corpus", required=True, help="fine-tuning corpus")
    p.add_argument("--pretrain-corpus")
    p.add_argument("--vowels", help="word<TAB>final dictionary (default: built-in pinyin table)")
    p.add_argument("--equivalence", choices=("rhyme", "identity"), default="rhyme")
    p.add_argument("--out", required=True)
    p.add_argument("--init-checkpoint")
    p.add_argument("--preset", choices=("desk", "full"), default="desk")
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--n-heads", type=int)
    p.add_argument("--n-layers", type=int)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=1024)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--pretrain-steps", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.00015)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="generate lyrics from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed-sentence", required=True, help="first sentence, '*' marks beats")
    p.add_argument("--freq", choices=("s", "m", "f"))
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--ngram-max", type=int, default=3)
    p.add_argument("--no-constraint", action="store_true")
    p.add_argument("--mode", choices=("temperature", "argmax", "top-k"), default="temperature")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--n-sentences", type=int, default=8)
    p.add_argument("--n-samples", type=int, default=1)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--out", required=True, help="output corpus file")

    p = sub.add_parser("evaluate", help="compute objective metrics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--vowels")
    p.add_argument("--equivalence", choices=("rhyme", "identity"), default="rhyme")
    p.add_argument("--reference", help="reference corpus for FOD/SOD distances")
    p.add_argument("--distributions", action="store_true", help="also emit fod:/sod: probability entries")
    p.add_argument("--out", required=True)
    return parser


def read_config(path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser, sub_name, config) -> None:
    """Install config values as subcommand defaults so explicit flags still win."""
    subparser = parser._subparsers._group_actions[0].choices[sub_name]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in config.items():
        action = known.get(key)
        if action is None or key == "help":
            logger.warning("config key %r is not an option of %s; ignored", key, sub_name)
            continue
        try:
            if isinstance(action.const, bool):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                value = action.type(raw) if action.type else raw
        except ValueError as exc:
            raise DataError(f"config {key}={raw!r}: {exc}") from exc
        if action.choices is not None and value not in action.choices:
            raise DataError(f"config {key}={raw!r}: expected one of {sorted(action.choices)}")
        defaults[key] = value
        action.required = False
    subparser.set_defaults(**defaults)


# -- helpers ---------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require_file(path, what):
    if path is None:
        return None
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} not found: {path}")
    return path


def _vowels(args):
    if getattr(args, "vowels", None):
        return load_dictionary(_require_file(args.vowels, "vowel dictionary"), args.equivalence)
    return builtin_dictionary(args.equivalence)


class _Staging:
    """Temporary output directory moved onto ``target`` on success."""

    def __init__(self, target: Path, is_file: bool = False):
        self.target = target
        self.is_file = is_file
        parent = target.parent if is_file else target.parent
        parent.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=".rapgen-", dir=parent))

    def commit(self):
        if self.is_file:
            for item in self.dir.iterdir():
                dest = self.target if item.name == "__out__" else self.target.parent / item.name
                os.replace(item, dest)
            self.dir.rmdir()
        else:
            self.target.mkdir(parents=True, exist_ok=True)
            for item in self.dir.iterdir():
                dest = self.target / item.name
                if dest.is_dir():
                    shutil.rmtree(dest)
                os.replace(item, dest)
            self.dir.rmdir()

    def abort(self):
        shutil.rmtree(self.dir, ignore_errors=True)


def _manifest(args, argv, started, inputs, outputs) -> dict:
    snapshot = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())}
    seeds = {k: v for k, v in snapshot.items() if "seed" in k and isinstance(v, int)}
    return {
        "command": args.command,
        "argv": list(argv),
        "config": snapshot,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "versions": {"rapgen": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


# -- commands --------------------------------------------------------------------


def cmd_align(args, stage: Path, inputs: dict) -> dict:
    path = _require_file(args.timestamps, "timestamp file")
    inputs["timestamps"] = _sha256(path)
    songs = align_file(path, injective=args.injective)
    if args.label_frequency:
        songs = [s.__class__(s.id, s.sentences, beat_frequency(s)[1]) if s.n_beats else s for s in songs]
    write_corpus(songs, stage / "corpus.txt")
    return {"songs": len(songs)}


def cmd_ingest(args, stage: Path, inputs: dict) -> dict:
    path = _require_file(args.corpus, "corpus")
    inputs["corpus"] = _sha256(path)
    thresholds = FrequencyThresholds(args.freq_center, args.freq_tolerance)
    songs, lines = [], ["id\tsentences\twords\tbeats\tfrequency\tlabel"]
    for s in read_corpus(path):
        if s.n_beats:
            ratio, label = beat_frequency(s, thresholds)
            s = s.__class__(s.id, s.sentences, label)
            lines.append(f"{s.id}\t{len(s.sentences)}\t{s.n_words}\t{s.n_beats}\t{ratio!r}\t{label.value}")
        else:
            lines.append(f"{s.id}\t{len(s.sentences)}\t{s.n_words}\t0\tnan\t-")
        songs.append(s)
    write_corpus(songs, stage / "corpus.txt")
    (stage / "stats.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"songs": len(songs)}


def cmd_synth(args, stage: Path, inputs: dict) -> dict:
    spec = SynthSpec(n_songs=args.n_songs, sentences_per_song=args.sentences_per_song,
                     sentence_length=tuple(args.sentence_length), vocab_size=args.vocab_size,
                     n_vowel_classes=args.n_vowel_classes, ngram=args.ngram, chain_length=args.chain_length,
                     beat_pattern=tuple(args.beat_pattern), repeat_prob=args.repeat_prob, seed=args.seed)
    corpus = frequency_corpus(spec) if args.frequency_classes else generate_synthetic_corpus(spec)
    corpus.write(stage)
    return {"songs": len(corpus.songs)}


def cmd_train(args, stage: Path, inputs: dict) -> dict:
    corpus_path = _require_file(args.corpus, "corpus")
    pre_path = _require_file(args.pretrain_corpus, "pre-training corpus")
    init_path = _require_file(args.init_checkpoint, "initial checkpoint")
    inputs["corpus"] = _sha256(corpus_path)
    songs = read_corpus(corpus_path)
    pre_songs = read_corpus(pre_path) if pre_path else []
    if pre_path:
        inputs["pretrain_corpus"] = _sha256(pre_path)

    if init_path:
        inputs["init_checkpoint"] = checkpoint_digest(init_path)
        ck = load_checkpoint(init_path)
        model, vocab, vowels = ck.model, ck.vocab, ck.vowels
    else:
        vowels = _vowels(args)
        vocab = Vocab.from_songs(pre_songs + songs)
        overrides = {k: getattr(args, k) for k in ("hidden_size", "n_heads", "n_layers") if getattr(args, k)}
        factory = ModelConfig.desk if args.preset == "desk" else ModelConfig.full
        cfg = factory(len(vocab), vowels.n_vowels, dropout=args.dropout, max_abs_pos=args.max_len, **overrides)
        model = TransformerLM.init(cfg, args.seed)
    ecfg = EncodeConfig(max_len=model.cfg.max_abs_pos, max_intra_pos=model.cfg.max_intra_pos,
                        max_sentences=model.cfg.max_sentences)
    log = ["phase\tstep\tloss"]
    if pre_songs and args.pretrain_steps:
        tcfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, max_steps=args.pretrain_steps,
                           phase="pretrain", seed=args.seed)
        model, rep = train(model, encode_corpus(pre_songs, vowels, vocab, ecfg), tcfg, vocab.pad)
        log += [f"pretrain\t{i}\t{l!r}" for i, l in enumerate(rep.losses)]
    tcfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, max_steps=args.steps,
                       phase="finetune" if pre_songs else "pretrain", seed=args.seed + 1)
    model, rep = train(model, encode_corpus(songs, vowels, vocab, ecfg), tcfg, vocab.pad)
    log += [f"{rep.phase}\t{i}\t{l!r}" for i, l in enumerate(rep.losses)]
    save_checkpoint(stage / "checkpoint", model, vocab, vowels, {"steps": str(len(log) - 1)})
    (stage / "train_log.tsv").write_text("\n".join(log) + "\n", encoding="utf-8")
    return {"checkpoint": checkpoint_digest(stage / "checkpoint"), "final_loss": rep.final_loss}


def cmd_generate(args, stage: Path, inputs: dict) -> dict:
    ck_path = _require_file(args.checkpoint, "checkpoint")
    ck = load_checkpoint(ck_path)
    inputs["checkpoint"] = checkpoint_digest(ck_path)
    seed = parse_song(args.seed_sentence).sentences[0]
    controls = GenControls(seed_sentence=seed, freq=FreqLabel.parse(args.freq) if args.freq else None,
                           max_tokens=args.max_tokens, n_sentences=args.n_sentences, mode=args.mode,
                           temperature=args.temperature, top_k=args.top_k, rng_seed=args.rng_seed,
                           alpha=args.alpha, ngram_max=args.ngram_max, constrain=not args.no_constraint)
    songs = generate_many(ck.model, ck.vocab, ck.vowels, controls, args.n_samples)
    write_corpus(songs, stage / "__out__")
    return {"songs": len(songs)}


def cmd_evaluate(args, stage: Path, inputs: dict) -> dict:
    corpus_path = _require_file(args.corpus, "corpus")
    inputs["corpus"] = _sha256(corpus_path)
    ref_path = _require_file(args.reference, "reference corpus")
    songs = read_corpus(corpus_path)
    model = vocab = encoded = None
    if args.checkpoint:
        ck_path = _require_file(args.checkpoint, "checkpoint")
        ck = load_checkpoint(ck_path)
        inputs["checkpoint"] = checkpoint_digest(ck_path)
        model, vocab = ck.model, ck.vocab
        vowels = load_dictionary(args.vowels, args.equivalence) if args.vowels else ck.vowels
        ecfg = EncodeConfig(max_len=model.cfg.max_abs_pos, max_intra_pos=model.cfg.max_intra_pos,
                            max_sentences=model.cfg.max_sentences)
        encoded = encode_corpus(songs, vowels, vocab, ecfg)
    else:
        vowels = _vowels(args)
    reference = read_corpus(ref_path) if ref_path else None
    report = evaluate(songs, vowels, model, vocab, encoded, reference)
    extra = distribution_entries(songs) if args.distributions else None
    (stage / "report.tsv").write_text(report.to_tsv(extra), encoding="utf-8")
    (stage / "report.txt").write_text(report.to_text(), encoding="utf-8")
    return {k: v for k, v in report.items() if v == v}


COMMANDS = {"align": cmd_align, "ingest": cmd_ingest, "synth": cmd_synth, "train": cmd_train,
            "generate": cmd_generate, "evaluate": cmd_evaluate}

DATA_ERRORS = (DataError, FileNotFoundError, StructureError, DictionaryFormatError, TimestampFormatError,
               CheckpointError, InfeasibleSpecError, ConfigError, UnicodeDecodeError)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("-v", "--verbose", action="store_true")
    early, _ = pre.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if early.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    config_path = early.config or os.environ.get(CONFIG_ENV)
    command = next((a for a in argv if a in COMMANDS), None)
    if config_path and command:
        try:
            _apply_config(parser, command, read_config(_require_file(config_path, "config")))
        except DATA_ERRORS as exc:
            print(f"rapgen: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args.config = config_path

    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    out = Path(args.out)
    is_file = args.command == "generate"
    stage = _Staging(out, is_file=is_file)
    inputs: dict = {}
    try:
        outputs = COMMANDS[args.command](args, stage.dir, inputs)
        manifest_name = (out.name + ".manifest.json") if is_file else "run_manifest.json"
        (stage.dir / manifest_name).write_text(
            json.dumps(_manifest(args, argv, started, inputs, outputs), indent=2, sort_keys=True, default=str) + "\n",
            encoding="utf-8")
        stage.commit()
    except DATA_ERRORS as exc:
        stage.abort()
        print(f"rapgen: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, GenerationError, ValueError, RuntimeError) as exc:
        stage.abort()
        print(f"rapgen: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except BaseException:
        stage.abort()
        raise
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
