"""Versioned checkpoint directories.

Layout::

    manifest.txt   key=value lines: format, version, model config, tensor table
    params.bin     parameter tensors, raw little-endian float64, manifest order
    vocab.txt      one token per line
    vowels.tsv     word<TAB>final
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import Vocab
from .model import ModelConfig, TransformerLM, param_shapes
from .vowel import VowelDictionary, load_dictionary, save_dictionary

FORMAT = "rapgen-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: TransformerLM
    vocab: Vocab
    vowels: VowelDictionary
    meta: dict[str, str] = field(default_factory=dict)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def save_checkpoint(path, model: TransformerLM, vocab: Vocab, vowels: VowelDictionary,
                    meta: dict[str, str] | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = [f"format={FORMAT}", f"version={VERSION}", f"equivalence={vowels.equivalence}"]
    for f in fields(model.cfg):
        lines.append(f"config.{f.name}={_fmt(getattr(model.cfg, f.name))}")
    for k, v in sorted((meta or {}).items()):
        lines.append(f"meta.{k}={v}")
    offset = 0
    chunks = []
    for name, shape in param_shapes(model.cfg).items():
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        lines.append(f"tensor.{name}={','.join(map(str, shape))}@{offset}")
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    (path / "params.bin").write_bytes(b"".join(chunks))
    (path / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    vocab.save(path / "vocab.txt")
    save_dictionary(vowels, path / "vowels.tsv")
    return path


def _parse_bool(text: str) -> bool:
    if text not in ("True", "False"):
        raise CheckpointError(f"bad boolean {text!r}")
    return text == "True"


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    manifest = path / "manifest.txt"
    if not manifest.is_file():
        raise CheckpointError(f"{path}: not a checkpoint (missing manifest.txt)")
    entries: dict[str, str] = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            entries[key] = value
    if entries.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown format {entries.get('format')!r}")
    if entries.get("version") != str(VERSION):
        raise CheckpointError(f"{path}: checkpoint version {entries.get('version')} != supported {VERSION}")

    kwargs = {}
    for f in fields(ModelConfig):
        raw = entries.get(f"config.{f.name}")
        if raw is None:
            raise CheckpointError(f"{path}: manifest lacks config.{f.name}")
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        kwargs[f.name] = _parse_bool(raw) if kind == "bool" else float(raw) if kind == "float" else int(raw)
    cfg = ModelConfig(**kwargs)

    blob = (path / "params.bin").read_bytes()
    params = {}
    for name, shape in param_shapes(cfg).items():
        spec = entries.get(f"tensor.{name}")
        if spec is None:
            raise CheckpointError(f"{path}: manifest lacks tensor {name}")
        dims, _, offset = spec.partition("@")
        if tuple(int(d) for d in dims.split(",")) != shape:
            raise CheckpointError(f"{path}: tensor {name} has shape {dims}, config expects {shape}")
        n = int(np.prod(shape))
        start = int(offset)
        if start + 8 * n > len(blob):
            raise CheckpointError(f"{path}: params.bin is truncated at tensor {name}")
        params[name] = np.frombuffer(blob, dtype="<f8", count=n, offset=start).reshape(shape).astype(np.float64)

    vocab = Vocab.load(path / "vocab.txt")
    if len(vocab) != cfg.vocab_size:
        raise CheckpointError(f"{path}: vocabulary has {len(vocab)} tokens, model expects {cfg.vocab_size}")
    vowels = load_dictionary(path / "vowels.tsv", entries.get("equivalence", "rhyme"))
    meta = {k[5:]: v for k, v in entries.items() if k.startswith("meta.")}
    return Checkpoint(TransformerLM(cfg, params), vocab, vowels, meta)


def checkpoint_digest(path) -> str:
    """sha256 over the manifest and parameter bytes."""
    path = Path(path)
    h = hashlib.sha256()
    for name in ("manifest.txt", "params.bin", "vocab.txt", "vowels.tsv"):
        h.update((path / name).read_bytes())
    return h.hexdigest()
