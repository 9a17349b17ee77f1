"""Text encoders producing one pooled 768-dim vector per description.

Two backends share the same interface. The default is a self-contained
deterministic transformer whose weights are generated from counter-based
RNG streams keyed by parameter name, so it needs no checkpoint files and
every machine reproduces identical bytes. Passing a checkpoint id or
path instead loads a pretrained model through the transformers library
(an uncased base BERT works, and CLIP text towers are handled too).

Both backends frame each description as [CLS] tokens [SEP], run the
stack in eval mode, and mean-pool token embeddings over non-padding
positions. Sequences longer than 64 tokens are truncated with a
warning. The built-in backend encodes each description on its own, so
no padding ever enters its pooling.
"""

import hashlib
import math
import re
import warnings
from functools import lru_cache

import numpy as np

DIM = 768
HEADS = 4
LAYERS = 2
FFN_DIM = 1536
MAX_TOKENS = 64


class EncoderLoadError(RuntimeError):
    """Raised when a requested encoder cannot be constructed."""


def tokenize(text):
    """Lowercase word tokens, the shared scheme of the built-in backend."""
    return re.findall(r"[a-z0-9]+", text.lower())


def _rng(name):
    key = int.from_bytes(hashlib.sha256(name.encode()).digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def _token_vector(token):
    return _rng("tok:" + token).normal(size=DIM) / math.sqrt(DIM)


@lru_cache(maxsize=4096)
def _cached_token_vector(token):
    v = _token_vector(token)
    v.flags.writeable = False
    return v


@lru_cache(maxsize=1)
def _position_table():
    # Fixed sinusoidal positions, scaled down so word identity stays the
    # dominant part of the residual stream.
    pos = np.arange(MAX_TOKENS)[:, None]
    i = np.arange(DIM // 2)[None, :]
    angle = pos / (10000.0 ** (2.0 * i / DIM))
    table = np.empty((MAX_TOKENS, DIM))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return 0.05 * table


@lru_cache(maxsize=1)
def _builtin_weights():
    w = {}
    for layer in range(LAYERS):
        for name in ("wq", "wk", "wv", "wo"):
            full = f"layer{layer}.{name}"
            w[full] = 0.02 * _rng(full).normal(size=(DIM, DIM))
        w[f"layer{layer}.ff1"] = 0.02 * _rng(f"layer{layer}.ff1").normal(size=(DIM, FFN_DIM))
        w[f"layer{layer}.ff2"] = 0.02 * _rng(f"layer{layer}.ff2").normal(size=(FFN_DIM, DIM))
    return w


def _layer_norm(x):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-12)


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x**3)))


def _attention(x, wq, wk, wv, wo):
    q = x @ wq
    k = x @ wk
    v = x @ wv
    head_dim = DIM // HEADS
    out = np.empty_like(x)
    for h in range(HEADS):
        cols = slice(h * head_dim, (h + 1) * head_dim)
        logits = q[:, cols] @ k[:, cols].T / math.sqrt(head_dim)
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        out[:, cols] = p @ v[:, cols]
    return out @ wo


class BuiltinEncoder:
    """Deterministic pre-norm transformer with hash-keyed token embeddings.

    Every token maps to a fixed pseudorandom direction, so descriptions
    that share vocabulary pool to nearby vectors. The attention and
    feed-forward branches use small random weights and enter through
    residual connections, which keeps that lexical geometry intact while
    still exercising a genuine forward pass.
    """

    name = "builtin"

    def encode(self, texts):
        weights = _builtin_weights()
        rows = np.empty((len(texts), DIM))
        for n, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                raise ValueError(f"description {n} has no tokens")
            if len(tokens) > MAX_TOKENS - 2:
                warnings.warn(
                    f"description {n} has {len(tokens)} tokens, truncating to "
                    f"{MAX_TOKENS - 2} plus [CLS]/[SEP]")
                tokens = tokens[: MAX_TOKENS - 2]
            seq = ["[CLS]"] + tokens + ["[SEP]"]
            x = np.stack([_cached_token_vector(t) for t in seq])
            x = x + _position_table()[: len(seq)]
            for layer in range(LAYERS):
                x = x + _attention(
                    _layer_norm(x),
                    weights[f"layer{layer}.wq"], weights[f"layer{layer}.wk"],
                    weights[f"layer{layer}.wv"], weights[f"layer{layer}.wo"])
                hidden = _gelu(_layer_norm(x) @ weights[f"layer{layer}.ff1"])
                x = x + hidden @ weights[f"layer{layer}.ff2"]
            rows[n] = _layer_norm(x).mean(axis=0)
        return rows


class PretrainedEncoder:
    """transformers checkpoint wrapper with masked mean pooling."""

    def __init__(self, checkpoint):
        self.name = checkpoint
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer

            self._torch = torch
            self._tokenizer = AutoTokenizer.from_pretrained(checkpoint)
            model = AutoModel.from_pretrained(checkpoint)
        except Exception as exc:
            raise EncoderLoadError(
                f"could not load encoder {checkpoint!r}: {exc}") from exc
        # CLIP checkpoints resolve to the two-tower model; only the text
        # side is wanted here.
        self._model = getattr(model, "text_model", model)
        self._model.eval()

    def encode(self, texts):
        torch = self._torch
        raw = self._tokenizer(list(texts), padding=False, truncation=False)
        for n, ids in enumerate(raw["input_ids"]):
            if len(ids) > MAX_TOKENS:
                warnings.warn(
                    f"description {n} tokenizes to {len(ids)} ids, "
                    f"truncating to {MAX_TOKENS}")
        batch = self._tokenizer(
            list(texts), padding=True, truncation=True,
            max_length=MAX_TOKENS, return_tensors="pt")
        with torch.no_grad():
            hidden = self._model(**batch).last_hidden_state
        mask = batch["attention_mask"].unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        return pooled.cpu().numpy().astype(np.float64)


def load_encoder(spec="builtin"):
    """Resolve an encoder spec string to a ready encode() backend."""
    if spec in (None, "", "builtin"):
        return BuiltinEncoder()
    return PretrainedEncoder(spec)
