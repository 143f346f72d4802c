"""Autoregressive Transformer decoder in numpy with hand-written backprop.

The input at every position is the sum of five embeddings: word, absolute
position, vowel, intra-sentence position and sentence index.  Blocks are
pre-norm (LayerNorm -> causal multi-head attention / GELU MLP -> residual).
Everything runs in float64.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import FeatureSequence

logger = logging.getLogger(__name__)

DTYPE = np.float64
_GELU_C = math.sqrt(2.0 / math.pi)


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_vowels: int
    hidden_size: int = 128
    n_heads: int = 4
    n_layers: int = 2
    max_abs_pos: int = 1024
    max_intra_pos: int = 32
    max_sentences: int = 128
    dropout: float = 0.1
    tie_embeddings: bool = False
    ffn_mult: int = 4
    ln_eps: float = 1e-5
    use_vowel: bool = True
    use_intra_pos: bool = True
    use_sentence: bool = True

    def __post_init__(self):
        for name in ("vocab_size", "n_vowels", "hidden_size", "n_heads", "n_layers",
                     "max_abs_pos", "max_intra_pos", "max_sentences", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden_size % self.n_heads:
            raise ConfigError(f"hidden_size {self.hidden_size} is not divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    @classmethod
    def desk(cls, vocab_size: int, n_vowels: int, **overrides) -> "ModelConfig":
        return cls(vocab_size, n_vowels, **{"hidden_size": 128, "n_heads": 4, "n_layers": 2, **overrides})

    @classmethod
    def full(cls, vocab_size: int, n_vowels: int, **overrides) -> "ModelConfig":
        return cls(vocab_size, n_vowels, **{"hidden_size": 768, "n_heads": 12, "n_layers": 12, **overrides})

    @property
    def head_dim(self) -> int:
        return self.hidden_size // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, F = cfg.hidden_size, cfg.hidden_size * cfg.ffn_mult
    shapes = {
        "wte": (cfg.vocab_size, H),
        "wpe": (cfg.max_abs_pos, H),
        "wve": (cfg.n_vowels, H),
        "wie": (cfg.max_intra_pos, H),
        "wse": (cfg.max_sentences, H),
    }
    for i in range(cfg.n_layers):
        p = f"h{i}."
        shapes.update({
            p + "ln1.g": (H,), p + "ln1.b": (H,),
            p + "attn.w_qkv": (H, 3 * H), p + "attn.b_qkv": (3 * H,),
            p + "attn.w_o": (H, H), p + "attn.b_o": (H,),
            p + "ln2.g": (H,), p + "ln2.b": (H,),
            p + "mlp.w_in": (H, F), p + "mlp.b_in": (F,),
            p + "mlp.w_out": (F, H), p + "mlp.b_out": (H,),
        })
    shapes["ln_f.g"] = (H,)
    shapes["ln_f.b"] = (H,)
    if not cfg.tie_embeddings:
        shapes["head.w"] = (H, cfg.vocab_size)
    shapes["head.b"] = (cfg.vocab_size,)
    return shapes


def count_parameters(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(cfg).values())


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """N(0, 0.02) for tables and matrices, zeros for biases, ones for LayerNorm gains."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".g"):
            params[name] = np.ones(shape, dtype=DTYPE)
        elif name.endswith((".b", "b_qkv", "b_o", "b_in", "b_out")):
            params[name] = np.zeros(shape, dtype=DTYPE)
        else:
            params[name] = rng.normal(0.0, 0.02, size=shape).astype(DTYPE)
    return params


@dataclass
class Batch:
    tokens: np.ndarray
    vowels: np.ndarray
    intra_pos: np.ndarray
    sent_idx: np.ndarray
    abs_pos: np.ndarray
    targets: np.ndarray
    mask: np.ndarray  # 1.0 where the target is a real token

    @property
    def n_targets(self) -> int:
        return int(self.mask.sum())


def make_batch(seqs: Sequence[FeatureSequence], pad_id: int = 0) -> Batch:
    """Stack sequences, right-padding to the longest; targets are the next tokens."""
    T = max(len(s) for s in seqs)
    padded = [s.padded(T, pad_id) for s in seqs]
    tokens = np.stack([s.tokens for s in padded])
    targets = np.full_like(tokens, pad_id)
    targets[:, :-1] = tokens[:, 1:]
    return Batch(
        tokens=tokens,
        vowels=np.stack([s.vowels for s in padded]),
        intra_pos=np.stack([s.intra_pos for s in padded]),
        sent_idx=np.stack([s.sent_idx for s in padded]),
        abs_pos=np.stack([s.abs_pos for s in padded]),
        targets=targets,
        mask=(targets != pad_id).astype(DTYPE),
    )


def _layernorm(x, g, b, eps):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd)


def _layernorm_back(dy, g, cache):
    xhat, rstd = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(0)
    db = dy.reshape(-1, dy.shape[-1]).sum(0)
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dg, db


def _gelu(h):
    t = np.tanh(_GELU_C * (h + 0.044715 * (h * h * h)))
    return 0.5 * h * (1.0 + t), t


def _gelu_back(dy, h, t):
    dt = _GELU_C * (1.0 + 3 * 0.044715 * h * h)
    return dy * (0.5 * (1.0 + t) + 0.5 * h * (1.0 - t * t) * dt)


def _softmax(x, axis=-1):
    m = x.max(axis, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis, keepdims=True)


def _log_softmax(x, axis=-1):
    m = x.max(axis, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis, keepdims=True))


def _dropout(x, p, rng):
    if p <= 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep, keep


class TransformerLM:
    """Config + parameter dict, with forward/backward passes over :class:`Batch`."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        shapes = param_shapes(cfg)
        if set(params) != set(shapes):
            raise ConfigError(f"parameter names do not match config: {sorted(set(params) ^ set(shapes))}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise ConfigError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.cfg = cfg
        self.params = params
        self._causal_cache: dict[int, np.ndarray] = {}

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "TransformerLM":
        return cls(cfg, init_params(cfg, seed))

    def copy(self) -> "TransformerLM":
        return TransformerLM(self.cfg, {k: v.copy() for k, v in self.params.items()})

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def _head_w(self):
        return self.params["wte"].T if self.cfg.tie_embeddings else self.params["head.w"]

    def _causal(self, T):
        if T not in self._causal_cache:
            self._causal_cache[T] = np.triu(np.full((T, T), -np.inf), k=1)
        return self._causal_cache[T]

    def _check_ranges(self, batch: Batch):
        cfg = self.cfg
        for arr, cap, name in ((batch.tokens, cfg.vocab_size, "token"),
                               (batch.abs_pos, cfg.max_abs_pos, "absolute position"),
                               (batch.vowels, cfg.n_vowels, "vowel"),
                               (batch.intra_pos, cfg.max_intra_pos, "intra-sentence position"),
                               (batch.sent_idx, cfg.max_sentences, "sentence index")):
            if arr.size and (arr.min() < 0 or arr.max() >= cap):
                raise IndexError(f"{name} index out of range [0, {cap}): min {arr.min()}, max {arr.max()}")

    # -- forward / backward ---------------------------------------------------

    def forward(self, batch: Batch, rng: np.random.Generator | None = None):
        """Return logits of shape (B, T, V) and the cache needed by :meth:`backward`.

        Dropout is active only when ``rng`` is given.
        """
        self._check_ranges(batch)
        cfg, P = self.cfg, self.params
        B, T = batch.tokens.shape
        nh, hd = cfg.n_heads, cfg.head_dim
        x = P["wte"][batch.tokens] + P["wpe"][batch.abs_pos]
        if cfg.use_vowel:
            x = x + P["wve"][batch.vowels]
        if cfg.use_intra_pos:
            x = x + P["wie"][batch.intra_pos]
        if cfg.use_sentence:
            x = x + P["wse"][batch.sent_idx]
        x, emb_keep = _dropout(x, cfg.dropout, rng)
        mask = self._causal(T)
        layers = []
        for i in range(cfg.n_layers):
            p = f"h{i}."
            a_in, ln1 = _layernorm(x, P[p + "ln1.g"], P[p + "ln1.b"], cfg.ln_eps)
            qkv = a_in @ P[p + "attn.w_qkv"] + P[p + "attn.b_qkv"]
            q, k, v = (qkv[..., j * cfg.hidden_size:(j + 1) * cfg.hidden_size]
                       .reshape(B, T, nh, hd).transpose(0, 2, 1, 3) for j in range(3))
            att = _softmax(q @ k.transpose(0, 1, 3, 2) / math.sqrt(hd) + mask)
            y = (att @ v).transpose(0, 2, 1, 3).reshape(B, T, cfg.hidden_size)
            o = y @ P[p + "attn.w_o"] + P[p + "attn.b_o"]
            o, keep1 = _dropout(o, cfg.dropout, rng)
            x = x + o
            m_in, ln2 = _layernorm(x, P[p + "ln2.g"], P[p + "ln2.b"], cfg.ln_eps)
            h = m_in @ P[p + "mlp.w_in"] + P[p + "mlp.b_in"]
            g, th = _gelu(h)
            o2 = g @ P[p + "mlp.w_out"] + P[p + "mlp.b_out"]
            o2, keep2 = _dropout(o2, cfg.dropout, rng)
            x = x + o2
            layers.append((a_in, ln1, q, k, v, att, y, keep1, m_in, ln2, h, g, th, keep2))
        xf, lnf = _layernorm(x, P["ln_f.g"], P["ln_f.b"], cfg.ln_eps)
        logits = xf @ self._head_w() + P["head.b"]
        return logits, (batch, emb_keep, layers, xf, lnf)

    def backward(self, dlogits: np.ndarray, cache) -> dict[str, np.ndarray]:
        cfg, P = self.cfg, self.params
        batch, emb_keep, layers, xf, lnf = cache
        B, T = batch.tokens.shape
        H, nh, hd = cfg.hidden_size, cfg.n_heads, cfg.head_dim
        grads = {k: np.zeros_like(v) for k, v in P.items()}
        d2 = dlogits.reshape(-1, cfg.vocab_size)
        grads["head.b"] = d2.sum(0)
        dhead = xf.reshape(-1, H).T @ d2
        if cfg.tie_embeddings:
            grads["wte"] += dhead.T
        else:
            grads["head.w"] = dhead
        dxf = dlogits @ self._head_w().T
        dx, grads["ln_f.g"], grads["ln_f.b"] = _layernorm_back(dxf, P["ln_f.g"], lnf)
        scale = 1.0 / math.sqrt(hd)
        for i in reversed(range(cfg.n_layers)):
            p = f"h{i}."
            a_in, ln1, q, k, v, att, y, keep1, m_in, ln2, h, g, th, keep2 = layers[i]
            do2 = dx if keep2 is None else dx * keep2
            grads[p + "mlp.b_out"] = do2.reshape(-1, H).sum(0)
            grads[p + "mlp.w_out"] = g.reshape(-1, g.shape[-1]).T @ do2.reshape(-1, H)
            dg = do2 @ P[p + "mlp.w_out"].T
            dh = _gelu_back(dg, h, th)
            grads[p + "mlp.b_in"] = dh.reshape(-1, dh.shape[-1]).sum(0)
            grads[p + "mlp.w_in"] = m_in.reshape(-1, H).T @ dh.reshape(-1, dh.shape[-1])
            dm_in = dh @ P[p + "mlp.w_in"].T
            dxl, grads[p + "ln2.g"], grads[p + "ln2.b"] = _layernorm_back(dm_in, P[p + "ln2.g"], ln2)
            dx = dx + dxl

            do = dx if keep1 is None else dx * keep1
            grads[p + "attn.b_o"] = do.reshape(-1, H).sum(0)
            grads[p + "attn.w_o"] = y.reshape(-1, H).T @ do.reshape(-1, H)
            dy = (do @ P[p + "attn.w_o"].T).reshape(B, T, nh, hd).transpose(0, 2, 1, 3)
            datt = dy @ v.transpose(0, 1, 3, 2)
            dv = att.transpose(0, 1, 3, 2) @ dy
            ds = att * (datt - (datt * att).sum(-1, keepdims=True)) * scale
            dq = ds @ k
            dk = ds.transpose(0, 1, 3, 2) @ q
            dqkv = np.concatenate([t.transpose(0, 2, 1, 3).reshape(B, T, H) for t in (dq, dk, dv)], axis=-1)
            grads[p + "attn.b_qkv"] = dqkv.reshape(-1, 3 * H).sum(0)
            grads[p + "attn.w_qkv"] = a_in.reshape(-1, H).T @ dqkv.reshape(-1, 3 * H)
            da_in = dqkv @ P[p + "attn.w_qkv"].T
            dxl, grads[p + "ln1.g"], grads[p + "ln1.b"] = _layernorm_back(da_in, P[p + "ln1.g"], ln1)
            dx = dx + dxl

        if emb_keep is not None:
            dx = dx * emb_keep
        flat = dx.reshape(-1, H)
        tables = [("wte", batch.tokens), ("wpe", batch.abs_pos)]
        if cfg.use_vowel:
            tables.append(("wve", batch.vowels))
        if cfg.use_intra_pos:
            tables.append(("wie", batch.intra_pos))
        if cfg.use_sentence:
            tables.append(("wse", batch.sent_idx))
        for name, idx in tables:
            np.add.at(grads[name], idx.reshape(-1), flat)
        return grads

    def loss(self, batch: Batch, rng: np.random.Generator | None = None) -> float:
        logits, _ = self.forward(batch, rng)
        return _masked_nll(logits, batch)[0]

    def loss_and_grads(self, batch: Batch, rng: np.random.Generator | None = None):
        """Mean next-token NLL over non-pad targets and its gradient."""
        logits, cache = self.forward(batch, rng)
        loss, logp = _masked_nll(logits, batch)
        n = max(batch.n_targets, 1)
        dlogits = np.exp(logp)
        B, T = batch.targets.shape
        dlogits[np.arange(B)[:, None], np.arange(T)[None, :], batch.targets] -= 1.0
        dlogits *= (batch.mask / n)[..., None]
        return loss, self.backward(dlogits, cache)

    # -- inference ------------------------------------------------------------

    def log_probs(self, seq: FeatureSequence) -> np.ndarray:
        """Log next-token distributions, one row per position of ``seq``."""
        logits, _ = self.forward(make_batch([seq]))
        return _log_softmax(logits[0])

    def batch_log_probs(self, seqs: Sequence[FeatureSequence], pad_id: int = 0) -> list[np.ndarray]:
        logits, _ = self.forward(make_batch(seqs, pad_id))
        lp = _log_softmax(logits)
        return [lp[i, :len(s)] for i, s in enumerate(seqs)]

    def next_token_probs(self, seq: FeatureSequence) -> np.ndarray:
        """Distribution over the token following the last position of ``seq``."""
        return np.exp(self.log_probs(seq)[-1])

    def empty_cache(self, batch_size: int) -> list[tuple[np.ndarray, np.ndarray]]:
        cfg = self.cfg
        shape = (batch_size, cfg.n_heads, 0, cfg.head_dim)
        return [(np.zeros(shape, DTYPE), np.zeros(shape, DTYPE)) for _ in range(cfg.n_layers)]

    def step(self, kv: list, tokens, vowels, intra_pos, sent_idx, abs_pos):
        """Incremental forward for one new position per row (inference only).

        Feature arguments are int arrays of shape (B,).  Returns next-token
        logits of shape (B, V) and the extended key/value cache.
        """
        cfg, P = self.cfg, self.params
        one = Batch(*(np.asarray(a, dtype=np.int64)[:, None] for a in
                      (tokens, vowels, intra_pos, sent_idx, abs_pos, tokens)), mask=None)
        self._check_ranges(one)
        B = one.tokens.shape[0]
        H, nh, hd = cfg.hidden_size, cfg.n_heads, cfg.head_dim
        x = P["wte"][one.tokens] + P["wpe"][one.abs_pos]
        if cfg.use_vowel:
            x = x + P["wve"][one.vowels]
        if cfg.use_intra_pos:
            x = x + P["wie"][one.intra_pos]
        if cfg.use_sentence:
            x = x + P["wse"][one.sent_idx]
        new_kv = []
        for i in range(cfg.n_layers):
            p = f"h{i}."
            a_in, _ = _layernorm(x, P[p + "ln1.g"], P[p + "ln1.b"], cfg.ln_eps)
            qkv = a_in @ P[p + "attn.w_qkv"] + P[p + "attn.b_qkv"]
            q, k, v = (qkv[..., j * H:(j + 1) * H].reshape(B, 1, nh, hd).transpose(0, 2, 1, 3)
                       for j in range(3))
            K = np.concatenate([kv[i][0], k], axis=2)
            V = np.concatenate([kv[i][1], v], axis=2)
            new_kv.append((K, V))
            att = _softmax(q @ K.transpose(0, 1, 3, 2) / math.sqrt(hd))
            y = (att @ V).transpose(0, 2, 1, 3).reshape(B, 1, H)
            x = x + y @ P[p + "attn.w_o"] + P[p + "attn.b_o"]
            m_in, _ = _layernorm(x, P[p + "ln2.g"], P[p + "ln2.b"], cfg.ln_eps)
            g, _ = _gelu(m_in @ P[p + "mlp.w_in"] + P[p + "mlp.b_in"])
            x = x + g @ P[p + "mlp.w_out"] + P[p + "mlp.b_out"]
        xf, _ = _layernorm(x, P["ln_f.g"], P["ln_f.b"], cfg.ln_eps)
        logits = xf[:, 0] @ self._head_w() + P["head.b"]
        return logits, new_kv


def _masked_nll(logits, batch: Batch):
    logp = _log_softmax(logits)
    B, T = batch.targets.shape
    picked = logp[np.arange(B)[:, None], np.arange(T)[None, :], batch.targets]
    n = max(batch.n_targets, 1)
    return float(-(picked * batch.mask).sum() / n), logp


def init_model(cfg: ModelConfig, seed: int = 0) -> TransformerLM:
    return TransformerLM.init(cfg, seed)


def forward(model: TransformerLM, seq: FeatureSequence) -> np.ndarray:
    """Per-position next-token probability rows for one sequence."""
    return np.exp(model.log_probs(seq))


# -- optimisation ----------------------------------------------------------------


class Adam:
    def __init__(self, lr=0.00015, beta1=0.9, beta2=0.999, eps=1e-6):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[k] -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)


PHASES = ("pretrain", "finetune")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.00015
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    batch_size: int = 8
    max_steps: int = 1000
    phase: str = "pretrain"
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("batch_size must be >= 1 and max_steps >= 0")
        if self.phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}, got {self.phase!r}")


@dataclass
class TrainReport:
    phase: str
    losses: list[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.losses)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches, reshuffled every epoch."""
    while True:
        perm = rng.permutation(n)
        for i in range(0, n, batch_size):
            chunk = perm[i:i + batch_size]
            if len(chunk) < min(batch_size, n):
                break
            yield chunk


def train(model: TransformerLM, corpus: Sequence[FeatureSequence], tcfg: TrainConfig = TrainConfig(),
          pad_id: int = 0) -> tuple[TransformerLM, TrainReport]:
    """Adam on the mean next-token NLL; returns a new model, the input is untouched.

    Run twice (``phase="pretrain"`` on one corpus, then ``phase="finetune"`` on
    another) for the two-stage regime; optimizer state starts fresh per call.
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    model = model.copy()
    report = TrainReport(tcfg.phase)
    if tcfg.max_steps == 0:
        return model, report
    rng = np.random.default_rng(tcfg.seed)
    opt = Adam(tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
    stream = _batches(len(corpus), tcfg.batch_size, rng)
    for step in range(tcfg.max_steps):
        idx = next(stream)
        batch = make_batch([corpus[i] for i in idx], pad_id)
        loss, grads = model.loss_and_grads(batch, rng)
        if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
            norms = {k: float(np.linalg.norm(v)) for k, v in model.params.items()}
            worst = sorted(norms.items(), key=lambda kv: -kv[1])[:3]
            raise TrainingError(f"non-finite loss {loss} at step {step} ({tcfg.phase}); "
                                f"largest parameter norms: {worst}; batch songs {idx.tolist()}")
        opt.step(model.params, grads)
        report.losses.append(loss)
        if tcfg.log_every and step % tcfg.log_every == 0:
            logger.info("%s step %d loss %.4f", tcfg.phase, step, loss)
    return model, report


def mean_nll(model, corpus: Sequence[FeatureSequence], pad_id: int = 0, batch_size: int = 16) -> float:
    """Mean NLL per predicted token; every non-pad token after the first is a target.

    ``model`` is anything with ``batch_log_probs(seqs, pad_id)``.
    """
    if not corpus:
        raise ValueError("empty corpus")
    total, count = 0.0, 0
    for i in range(0, len(corpus), batch_size):
        chunk = corpus[i:i + batch_size]
        for seq, lp in zip(chunk, model.batch_log_probs(chunk, pad_id)):
            n = seq.n_real
            targets = seq.tokens[1:n]
            total -= float(lp[np.arange(n - 1), targets].sum())
            count += n - 1
    if count == 0:
        raise ValueError("corpus has no prediction targets")
    return total / count


def perplexity(model, corpus: Sequence[FeatureSequence], pad_id: int = 0) -> float:
    return math.exp(mean_nll(model, corpus, pad_id))
