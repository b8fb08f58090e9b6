"""Tiny text-pair transformer encoder with optional peer-vector injection.

An encoder maps a pair of texts to a fixed-width vector: the pooled output at
the leading classification position. A second encoding pass can inject a
peer vector (another pair's pooled output, linearly projected) as one extra
input position right after the classification slot, letting the two pair
representations attend over each other.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
SPECIAL_TOKENS = ("[pad]", "[unk]", "[cls]", "[sep]")
SEPARATOR = "[sep]"


def concat_text(a: str, b: str) -> str:
    """Join two texts with a single separator token."""
    return " ".join(part for part in (a, SEPARATOR, b) if part)


def word_tokens(text: str) -> list[str]:
    return text.lower().split()


class Vocabulary:
    """Whitespace word vocabulary with fixed special tokens at indices 0..3."""

    def __init__(self, words: Iterable[str]):
        seen = dict.fromkeys(SPECIAL_TOKENS)
        for word in words:
            if word not in seen:
                seen[word] = None
        self.tokens: list[str] = list(seen)
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        words = set()
        for text in texts:
            words.update(word_tokens(text))
        return cls(sorted(words - set(SPECIAL_TOKENS)))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self._index.get(tok, UNK_ID) for tok in word_tokens(text)]

    def sha256(self) -> str:
        digest = hashlib.sha256()
        for tok in self.tokens:
            digest.update(tok.encode("utf-8") + b"\n")
        return digest.hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        tokens = Path(path).read_text(encoding="utf-8").splitlines()
        if tokens[: len(SPECIAL_TOKENS)] != list(SPECIAL_TOKENS):
            raise ValueError(f"{path}: vocabulary does not start with the special tokens")
        return cls(tokens[len(SPECIAL_TOKENS) :])


@dataclass(frozen=True)
class EncoderConfig:
    hidden_size: int = 32
    num_layers: int = 2
    num_heads: int = 4
    ffn_size: int = 64
    max_len: int = 128
    dropout: float = 0.0


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, hidden_size: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = hidden_size // num_heads
        self.query = nn.Linear(hidden_size, hidden_size)
        self.key = nn.Linear(hidden_size, hidden_size)
        self.value = nn.Linear(hidden_size, hidden_size)
        self.output = nn.Linear(hidden_size, hidden_size)
        # tie query/key at init: same-token positions start with the largest
        # attention logits, which makes cross-segment matching learnable fast
        with torch.no_grad():
            self.key.weight.copy_(self.query.weight)
            self.query.bias.zero_()
            self.key.bias.zero_()

    def forward(self, x: torch.Tensor, padding_mask: torch.Tensor) -> torch.Tensor:
        batch, length, hidden = x.shape
        shape = (batch, length, self.num_heads, self.head_dim)
        q = self.query(x).view(shape).transpose(1, 2)
        k = self.key(x).view(shape).transpose(1, 2)
        v = self.value(x).view(shape).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(padding_mask[:, None, None, :], float("-inf"))
        attended = torch.softmax(scores, dim=-1) @ v
        merged = attended.transpose(1, 2).reshape(batch, length, hidden)
        return self.output(merged)


class EncoderBlock(nn.Module):
    """Pre-norm residual block: stable to train without warmup at tiny scale."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.attention = MultiHeadSelfAttention(config.hidden_size, config.num_heads)
        self.norm1 = nn.LayerNorm(config.hidden_size)
        self.ffn = nn.Sequential(
            nn.Linear(config.hidden_size, config.ffn_size),
            nn.GELU(),
            nn.Linear(config.ffn_size, config.hidden_size),
        )
        self.norm2 = nn.LayerNorm(config.hidden_size)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, padding_mask: torch.Tensor) -> torch.Tensor:
        x = x + self.dropout(self.attention(self.norm1(x), padding_mask))
        x = x + self.dropout(self.ffn(self.norm2(x)))
        return x


class TinyEncoder(nn.Module):
    """Word-level transformer encoder pooled at the classification position."""

    def __init__(self, config: EncoderConfig, vocab: Vocabulary):
        super().__init__()
        if config.hidden_size % config.num_heads != 0:
            raise ValueError(
                f"hidden_size {config.hidden_size} not divisible by num_heads {config.num_heads}"
            )
        if min(config.hidden_size, config.num_layers, config.num_heads, config.ffn_size) <= 0:
            raise ValueError("all encoder sizes must be positive")
        if config.max_len < 4:
            raise ValueError("max_len must be at least 4")
        self.config = config
        self.vocab = vocab
        self.token_embedding = nn.Embedding(len(vocab), config.hidden_size)
        self.position_embedding = nn.Embedding(config.max_len, config.hidden_size)
        self.segment_embedding = nn.Embedding(2, config.hidden_size)
        self.embedding_norm = nn.LayerNorm(config.hidden_size)
        self.blocks = nn.ModuleList(EncoderBlock(config) for _ in range(config.num_layers))
        self.final_norm = nn.LayerNorm(config.hidden_size)
        self.pooler = nn.Linear(config.hidden_size, config.hidden_size)
        self.peer_projection = nn.Linear(config.hidden_size, config.hidden_size)
        self.dropout = nn.Dropout(config.dropout)
        self.truncation_count = 0  # silent truncations, for monitoring

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    def pair_token_ids(self, a: str, b: str, reserve: int = 0) -> tuple[list[int], list[int]]:
        """[cls] a [sep] b token ids plus segment ids (0 for the first text side).

        Truncates the tail of b first, then of a. ``reserve`` leaves room for
        extra injected positions (peer vector).
        """
        budget = self.config.max_len - reserve
        ids_a = self.vocab.encode(a)
        ids_b = self.vocab.encode(b)
        overflow = len(ids_a) + len(ids_b) + 2 - budget
        if overflow > 0:
            self.truncation_count += 1
            take = min(overflow, len(ids_b))
            ids_b = ids_b[: len(ids_b) - take]
            overflow -= take
            if overflow > 0:
                ids_a = ids_a[: len(ids_a) - overflow]
        ids = [CLS_ID] + ids_a + [SEP_ID] + ids_b
        segments = [0] * (len(ids_a) + 2) + [1] * len(ids_b)
        return ids, segments

    def forward(
        self,
        ids: torch.Tensor,
        segments: torch.Tensor,
        padding_mask: torch.Tensor,
        peer: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Pooled classification vectors for a padded id batch.

        ``ids`` and ``segments`` are (batch, length); ``padding_mask`` is True
        at padding positions. ``peer`` is an optional (batch, hidden) vector
        injected as one extra position right after the classification slot.
        """
        x = self.token_embedding(ids) + self.segment_embedding(segments)
        if peer is not None:
            projected = self.peer_projection(peer).unsqueeze(1)
            x = torch.cat([x[:, :1], projected, x[:, 1:]], dim=1)
            pad_column = torch.zeros(
                (x.shape[0], 1), dtype=torch.bool, device=padding_mask.device
            )
            padding_mask = torch.cat([padding_mask[:, :1], pad_column, padding_mask[:, 1:]], dim=1)
        positions = torch.arange(x.shape[1], device=x.device)
        x = self.embedding_norm(x + self.position_embedding(positions)[None, :, :])
        x = self.dropout(x)
        for block in self.blocks:
            x = block(x, padding_mask)
        x = self.final_norm(x)
        return torch.tanh(self.pooler(x[:, 0]))

    def encode_pair(self, a: str, b: str) -> torch.Tensor:
        """Deterministic evaluation-mode vector for one text pair."""
        return self.encode_pairs([(a, b)])[0]

    def encode_pairs(self, pairs: Sequence[tuple[str, str]]) -> torch.Tensor:
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                ids, segments, mask = collate_ids(
                    [self.pair_token_ids(a, b) for a, b in pairs]
                )
                return self.forward(ids, segments, mask)
        finally:
            self.train(was_training)


def collate_ids(
    pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad (ids, segments) lists into batch tensors plus the padding mask."""
    length = max(len(ids) for ids, _ in pairs)
    batch = torch.full((len(pairs), length), PAD_ID, dtype=torch.long)
    segments = torch.zeros((len(pairs), length), dtype=torch.long)
    mask = torch.ones((len(pairs), length), dtype=torch.bool)
    for row, (ids, segs) in enumerate(pairs):
        batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        segments[row, : len(segs)] = torch.tensor(segs, dtype=torch.long)
        mask[row, : len(ids)] = False
    return batch, segments, mask


def init_tiny_encoder(config: EncoderConfig, vocab: Vocabulary, seed: int) -> TinyEncoder:
    """Construct an encoder with parameters reproducibly drawn from the seed."""
    torch.manual_seed(seed)
    return TinyEncoder(config, vocab)


def peer_encode(
    encoder_a: TinyEncoder,
    encoder_g: TinyEncoder,
    pair_a: tuple[str, str],
    pair_g: tuple[str, str],
) -> tuple[torch.Tensor, torch.Tensor]:
    """Two-pass encoding where each pair receives the other pair's pass-1 vector.

    Pass 1 encodes both pairs independently; pass 2 re-encodes each pair with
    the peer's pooled vector injected. Returns the two pass-2 pooled vectors.
    """
    if encoder_a.hidden_size != encoder_g.hidden_size:
        raise ValueError(
            f"hidden size mismatch: {encoder_a.hidden_size} vs {encoder_g.hidden_size}"
        )
    modes = (encoder_a.training, encoder_g.training)
    encoder_a.eval()
    encoder_g.eval()
    try:
        with torch.no_grad():
            batch_a = collate_ids([encoder_a.pair_token_ids(*pair_a, reserve=1)])
            batch_g = collate_ids([encoder_g.pair_token_ids(*pair_g, reserve=1)])
            first_a = encoder_a(*batch_a)
            first_g = encoder_g(*batch_g)
            second_a = encoder_a(*batch_a, peer=first_g)
            second_g = encoder_g(*batch_g, peer=first_a)
            return second_a[0], second_g[0]
    finally:
        encoder_a.train(modes[0])
        encoder_g.train(modes[1])


MANIFEST_NAME = "manifest.txt"
VOCAB_NAME = "vocab.txt"
PARAMS_DIR = "params"


def save_encoder(encoder: TinyEncoder, directory: str | Path) -> None:
    """Checkpoint: plain-text shape manifest, vocabulary, raw float32 LE tensors."""
    directory = Path(directory)
    (directory / PARAMS_DIR).mkdir(parents=True, exist_ok=True)
    encoder.vocab.save(directory / VOCAB_NAME)
    lines = ["format=tiny-encoder-v1"]
    for key, value in asdict(encoder.config).items():
        lines.append(f"{key}={value}")
    lines.append(f"vocab_size={len(encoder.vocab)}")
    lines.append(f"vocab_sha256={encoder.vocab.sha256()}")
    for name, tensor in encoder.state_dict().items():
        shape = ",".join(str(s) for s in tensor.shape)
        lines.append(f"param={name} shape={shape}")
        array = tensor.detach().cpu().numpy().astype("<f4")
        array.tofile(directory / PARAMS_DIR / f"{name}.bin")
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_manifest(path: Path) -> tuple[dict[str, str], list[tuple[str, tuple[int, ...]]]]:
    fields: dict[str, str] = {}
    params: list[tuple[str, tuple[int, ...]]] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key == "param":
            name, _, shape_part = value.partition(" shape=")
            shape = tuple(int(s) for s in shape_part.split(",") if s)
            params.append((name, shape))
        else:
            fields[key] = value
    return fields, params


def load_encoder(directory: str | Path) -> TinyEncoder:
    directory = Path(directory)
    fields, params = _parse_manifest(directory / MANIFEST_NAME)
    if fields.get("format") != "tiny-encoder-v1":
        raise ValueError(f"{directory}: not an encoder checkpoint")
    vocab = Vocabulary.load(directory / VOCAB_NAME)
    if vocab.sha256() != fields["vocab_sha256"]:
        raise ValueError(f"{directory}: vocabulary hash mismatch")
    config = EncoderConfig(
        hidden_size=int(fields["hidden_size"]),
        num_layers=int(fields["num_layers"]),
        num_heads=int(fields["num_heads"]),
        ffn_size=int(fields["ffn_size"]),
        max_len=int(fields["max_len"]),
        dropout=float(fields["dropout"]),
    )
    encoder = TinyEncoder(config, vocab)
    state = {}
    for name, shape in params:
        array = np.fromfile(directory / PARAMS_DIR / f"{name}.bin", dtype="<f4")
        expected = int(np.prod(shape)) if shape else 1
        if array.size != expected:
            raise ValueError(f"{directory}: parameter {name} has wrong size")
        state[name] = torch.from_numpy(array.reshape(shape).copy())
    encoder.load_state_dict(state)
    return encoder
