"""Point-wise judge models assembled from text-pair encoders.

A judge configuration picks a family and a set of role pairs over the
(question, reference, candidate) triple:

* ``pair``   — encode role pairs directly: subsets of {(q,r), (q,t), (r,t)}.
* ``triple`` — encode one role against the concatenation of the other two:
  subsets of {(q, r∘t), (r, q∘t), (t, q∘r)}.
* ``peer``   — exactly {(r, q∘t), (t, q∘r)} with two-pass peer encoding.

One independent encoder per pair; the pooled vectors are concatenated and
fed to a single-logit linear head with a sigmoid output.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .corpus import EvalTuple
from .encoder import (
    EncoderConfig,
    TinyEncoder,
    Vocabulary,
    collate_ids,
    concat_text,
    init_tiny_encoder,
    load_encoder,
    save_encoder,
)
from .metrics import precision_recall_f1

ROLES = ("q", "r", "t")
PairSpec = tuple[str, str]

DIRECT_PAIRS: tuple[PairSpec, ...] = (("q", "r"), ("q", "t"), ("r", "t"))
CONCAT_PAIRS: tuple[PairSpec, ...] = (("q", "rt"), ("r", "qt"), ("t", "qr"))
PEER_PAIRS: tuple[PairSpec, ...] = (("r", "qt"), ("t", "qr"))


class Family(str, Enum):
    PAIR = "pair"
    TRIPLE = "triple"
    PEER = "peer"


def parse_pair(text: str) -> PairSpec:
    """Parse "r:qt" into (("r", "qt")); roles are letters from q/r/t."""
    left, sep, right = text.partition(":")
    if not sep or not left or not right:
        raise ValueError(f"pair spec {text!r} must look like 'r:qt'")
    for side in (left, right):
        if any(role not in ROLES for role in side):
            raise ValueError(f"pair spec {text!r} uses roles outside q/r/t")
    return (left, right)


def format_pair(pair: PairSpec) -> str:
    return f"{pair[0]}:{pair[1]}"


@dataclass(frozen=True)
class EvaluatorConfig:
    family: Family
    pairs: tuple[PairSpec, ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValueError("an evaluator needs at least one pair")
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError(f"duplicate pairs in {self.pairs}")
        if self.family is Family.PAIR:
            allowed = set(DIRECT_PAIRS)
        elif self.family is Family.TRIPLE:
            allowed = set(CONCAT_PAIRS)
        else:
            if tuple(self.pairs) != PEER_PAIRS:
                raise ValueError(
                    f"peer family requires exactly {PEER_PAIRS}, got {self.pairs}"
                )
            return
        bad = [p for p in self.pairs if p not in allowed]
        if bad:
            raise ValueError(
                f"pairs {bad} are not valid for family {self.family.value!r}"
            )

    def roles_used(self) -> frozenset[str]:
        return frozenset("".join(left + right for left, right in self.pairs))


@dataclass
class TrainConfig:
    """Training protocol: fixed batch size, few epochs, best-dev-F1 checkpointing.

    The 1e-3 default learning rate fits the tiny desk-scale encoder; large
    pretrained checkpoints want the usual 1e-6 fine-tuning rate instead.
    """

    learning_rate: float = 1e-3
    epochs: int = 2
    batch_size: int = 32
    weight_decay: float = 0.01
    max_grad_norm: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class EvaluatorModel(nn.Module):
    """Assembled judge: one encoder per configured pair plus a linear head."""

    def __init__(self, config: EvaluatorConfig, encoders: Sequence[TinyEncoder]):
        super().__init__()
        if len(encoders) != len(config.pairs):
            raise ValueError(
                f"{len(config.pairs)} pairs need {len(config.pairs)} encoders, "
                f"got {len(encoders)}"
            )
        sizes = {enc.hidden_size for enc in encoders}
        if len(sizes) != 1:
            raise ValueError(f"encoders disagree on hidden size: {sorted(sizes)}")
        self.config = config
        self.encoders = nn.ModuleList(encoders)
        hidden = encoders[0].hidden_size
        self.head = nn.Linear(len(config.pairs) * hidden, 1)

    @property
    def hidden_size(self) -> int:
        return self.encoders[0].hidden_size

    def pair_texts(self, question: str, reference: str, candidate: str) -> list[tuple[str, str]]:
        roles = {"q": question, "r": reference, "t": candidate}

        def side(spec: str) -> str:
            if len(spec) == 1:
                return roles[spec]
            return concat_text(roles[spec[0]], roles[spec[1]])

        return [(side(left), side(right)) for left, right in self.config.pairs]

    def batch_logits(self, triples: Sequence[tuple[str, str, str]]) -> torch.Tensor:
        """Head logits for a batch of (question, reference, candidate) triples."""
        reserve = 1 if self.config.family is Family.PEER else 0
        texts = [self.pair_texts(q, r, t) for q, r, t in triples]
        per_pair = []
        for index, encoder in enumerate(self.encoders):
            per_pair.append(
                collate_ids(
                    [encoder.pair_token_ids(*row[index], reserve=reserve) for row in texts]
                )
            )
        if self.config.family is Family.PEER:
            first = [encoder(*batch) for encoder, batch in zip(self.encoders, per_pair)]
            reps = [
                self.encoders[0](*per_pair[0], peer=first[1]),
                self.encoders[1](*per_pair[1], peer=first[0]),
            ]
        else:
            reps = [encoder(*batch) for encoder, batch in zip(self.encoders, per_pair)]
        return self.head(torch.cat(reps, dim=1)).squeeze(-1)

    def score(self, question: str, reference: str, candidate: str, short_answer: str | None = None) -> float:
        """Correctness probability for one triple (judge protocol; short answer unused)."""
        return self.score_batch([(question, reference, candidate)])[0]

    def score_batch(self, triples: Sequence[tuple[str, str, str]], batch_size: int = 64) -> list[float]:
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                probs: list[float] = []
                for start in range(0, len(triples), batch_size):
                    chunk = triples[start : start + batch_size]
                    logits = self.batch_logits(chunk)
                    probs.extend(torch.sigmoid(logits).tolist())
            return probs
        finally:
            self.train(was_training)

    def predict(self, tuples: Sequence[EvalTuple], threshold: float = 0.5) -> list[tuple[float, int]]:
        """(probability, decision) per tuple; the decision is strict > threshold."""
        triples = [(t.question, t.reference, t.candidate) for t in tuples]
        probs = self.score_batch(triples)
        return [(p, int(p > threshold)) for p in probs]


def assemble(
    config: EvaluatorConfig,
    encoder_factory: Callable[[int], TinyEncoder],
    seed: int = 0,
) -> EvaluatorModel:
    """Build a judge with a fresh, independent encoder per configured pair."""
    encoders = [encoder_factory(i) for i in range(len(config.pairs))]
    torch.manual_seed(seed)
    return EvaluatorModel(config, encoders)


def tiny_encoder_factory(
    config: EncoderConfig, vocab: Vocabulary, seed: int
) -> Callable[[int], TinyEncoder]:
    """Factory producing independently seeded encoders per pair index."""
    return lambda index: init_tiny_encoder(config, vocab, seed + 7919 * (index + 1))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_f1: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_records(self) -> list[dict]:
        return [
            {
                "epoch": e.epoch,
                "train_loss": e.train_loss,
                "dev_f1": e.dev_f1,
                "best": e.epoch == self.best_epoch,
            }
            for e in self.epochs
        ]


def dev_f1(model: EvaluatorModel, dev_tuples: Sequence[EvalTuple]) -> float:
    decisions = [d for _, d in model.predict(dev_tuples)]
    labels = [t.label for t in dev_tuples]
    return precision_recall_f1(decisions, labels)[2]


def train(
    model: EvaluatorModel,
    train_tuples: Sequence[EvalTuple],
    dev_tuples: Sequence[EvalTuple],
    cfg: TrainConfig,
) -> tuple[EvaluatorModel, TrainHistory]:
    """Binary cross-entropy fine-tuning with best-dev-F1 checkpoint selection.

    Dev F1 is measured at every epoch boundary; the returned model carries the
    parameters of the best epoch (earliest wins on ties).
    """
    labels = {t.label for t in train_tuples}
    if labels != {0, 1}:
        raise ValueError(f"training data must contain both classes, got labels {sorted(labels)}")
    if not dev_tuples:
        raise ValueError("dev set must be non-empty for early stopping")

    torch.manual_seed(cfg.seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    loss_fn = nn.BCEWithLogitsLoss()
    triples = [(t.question, t.reference, t.candidate) for t in train_tuples]
    targets = torch.tensor([float(t.label) for t in train_tuples])

    history = TrainHistory()
    best_f1 = -1.0
    best_state: dict | None = None
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = torch.randperm(len(triples))
        total_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size].tolist()
            logits = model.batch_logits([triples[i] for i in batch_idx])
            loss = loss_fn(logits, targets[batch_idx])
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss {loss.item()!r} at epoch {epoch}, "
                    f"step {start // cfg.batch_size} (lr={cfg.learning_rate})"
                )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
            total_loss += loss.item() * len(batch_idx)
        epoch_f1 = dev_f1(model, dev_tuples)
        history.epochs.append(
            EpochRecord(epoch=epoch, train_loss=total_loss / len(triples), dev_f1=epoch_f1)
        )
        if epoch_f1 > best_f1:
            best_f1 = epoch_f1
            best_state = copy.deepcopy(model.state_dict())
            history.best_epoch = epoch
    assert best_state is not None
    model.load_state_dict(best_state)
    model.eval()
    return model, history


def predict_pointwise(
    model: EvaluatorModel, tuples: Sequence[EvalTuple]
) -> list[tuple[float, int]]:
    return model.predict(tuples)


BUNDLE_MANIFEST = "evaluator.txt"


def save_evaluator(model: EvaluatorModel, directory: str | Path) -> None:
    """Bundle: evaluator manifest, head tensors, one encoder checkpoint per pair."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        "format=evaluator-bundle-v1",
        f"family={model.config.family.value}",
        "pairs=" + ",".join(format_pair(p) for p in model.config.pairs),
        f"hidden_size={model.hidden_size}",
    ]
    for index in range(len(model.encoders)):
        ref = f"encoder_{index}"
        lines.append(f"encoder={ref}")
        save_encoder(model.encoders[index], directory / ref)
    weight = model.head.weight.detach().cpu().numpy().astype("<f4")
    bias = model.head.bias.detach().cpu().numpy().astype("<f4")
    weight.tofile(directory / "head.weight.bin")
    bias.tofile(directory / "head.bias.bin")
    (directory / BUNDLE_MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_evaluator(directory: str | Path) -> EvaluatorModel:
    directory = Path(directory)
    fields: dict[str, str] = {}
    encoder_refs: list[str] = []
    for line in (directory / BUNDLE_MANIFEST).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key == "encoder":
            encoder_refs.append(value)
        else:
            fields[key] = value
    if fields.get("format") != "evaluator-bundle-v1":
        raise ValueError(f"{directory}: not an evaluator bundle")
    config = EvaluatorConfig(
        family=Family(fields["family"]),
        pairs=tuple(parse_pair(p) for p in fields["pairs"].split(",")),
    )
    encoders = [load_encoder(directory / ref) for ref in encoder_refs]
    model = EvaluatorModel(config, encoders)
    hidden = model.hidden_size
    weight = np.fromfile(directory / "head.weight.bin", dtype="<f4")
    bias = np.fromfile(directory / "head.bias.bin", dtype="<f4")
    with torch.no_grad():
        model.head.weight.copy_(
            torch.from_numpy(weight.reshape(1, len(config.pairs) * hidden).copy())
        )
        model.head.bias.copy_(torch.from_numpy(bias.copy()))
    model.eval()
    return model
