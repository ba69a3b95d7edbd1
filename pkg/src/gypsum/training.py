"""Teacher-forced NLL training, early stopping and checkpoint archives."""
from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .config import Config
from .data import KindVocab, collate, prepare_corpus
from .errors import DataError, FormatError, MissingFile, NonFinite, ShapeMismatch
from .frontend import Vocabulary
from .frontend.tokenizer import WordPieceTokenizer
from .model import GypSum

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
clamp_events = 0   # target probabilities that had to be floored, process-wide


def nll_loss(probs: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor | None = None,
             lengths=None) -> torch.Tensor:
    """-(1/N) sum_i sum_t log p(y_t^i) over the non-padding positions.

    probs (N, T, V'), targets (N, T). Padding is given either as a boolean
    ``mask`` or as per-sequence ``lengths``.
    """
    global clamp_events
    p = probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    if mask is None:
        if lengths is None:
            mask = torch.ones_like(p, dtype=torch.bool)
        else:
            steps = torch.arange(p.shape[1], device=p.device)
            mask = steps[None, :] < torch.as_tensor(lengths, device=p.device)[:, None]
    if not torch.isfinite(p[mask]).all():
        raise NonFinite("non-finite target probability")
    low = (p < PROB_FLOOR) & mask
    if low.any():
        n = int(low.sum())
        clamp_events += n
        log.warning("%d target probabilities below %g were clamped", n, PROB_FLOOR)
    logp = torch.log(p.clamp_min(PROB_FLOOR))
    return -(logp * mask).sum() / p.shape[0]


# ---------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    cfg: Config
    vocab: Vocabulary
    kinds: KindVocab
    model: GypSum
    epoch: int = 0
    optimizer_state: dict | None = None
    rng_state: dict | None = None
    metrics: dict = field(default_factory=dict)

    def save(self, path) -> Path:
        path = _archive_path(path, create=True)
        params = {k: v.detach().clone() for k, v in self.model.state_dict().items()}
        torch.save({
            "format": "gypsum-checkpoint/1",
            "params": params,
            "manifest": {k: list(v.shape) for k, v in params.items()},
            "dtype": str(next(self.model.parameters()).dtype),
            "optimizer": self.optimizer_state,
            "rng": self.rng_state,
            "epoch": self.epoch,
            "vocab_hash": self.vocab.digest,
            "vocab": list(self.vocab.tokens),
            "tokenizer": _tokenizer_spec(self.vocab.tokenizer),
            "kinds": list(self.kinds.kinds),
            "config": self.cfg.to_dict(),
            "metrics": self.metrics,
        }, path)
        return path

    @classmethod
    def load(cls, path, tokenizer=None) -> "Checkpoint":
        path = _archive_path(path)
        if not path.exists():
            raise MissingFile(f"checkpoint not found: {path}")
        try:
            blob = torch.load(path, map_location="cpu", weights_only=False)
            cfg = Config(**blob["config"])
            vocab = Vocabulary(blob["vocab"], tokenizer or _tokenizer_from(blob.get("tokenizer")))
        except (KeyError, TypeError, RuntimeError, EOFError) as exc:
            raise FormatError(f"unreadable checkpoint {path}: {exc}") from None
        if vocab.digest != blob["vocab_hash"]:
            raise FormatError(f"{path}: vocabulary hash mismatch")
        kinds = KindVocab(blob["kinds"], cfg.max_kinds)
        model = GypSum(cfg, len(vocab))
        if blob.get("dtype") == "torch.float64":
            model.double()
        own = model.state_dict()
        for k, shape in blob["manifest"].items():
            if k not in own or list(own[k].shape) != shape:
                raise ShapeMismatch(f"{path}: parameter {k} has shape {shape}, model expects "
                                    f"{list(own[k].shape) if k in own else 'nothing'}")
        model.load_state_dict(blob["params"])
        model.eval()
        return cls(cfg, vocab, kinds, model, blob["epoch"], blob["optimizer"], blob["rng"],
                   blob.get("metrics", {}))


def _tokenizer_spec(tok) -> dict:
    if isinstance(tok, WordPieceTokenizer):
        return {"name": "wordpiece", "pieces": sorted(tok.pieces), "prefix": tok.prefix,
                "lowercase": tok.lowercase}
    return {"name": "heuristic"}


def _tokenizer_from(spec):
    if spec and spec.get("name") == "wordpiece":
        return WordPieceTokenizer(spec["pieces"], spec["prefix"], spec["lowercase"])
    return None


def _archive_path(path, create=False) -> Path:
    path = Path(path)
    if path.suffix == ".pt":
        if create:
            path.parent.mkdir(parents=True, exist_ok=True)
        return path
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path / "checkpoint.pt"


# ---------------------------------------------------------------- training

@dataclass
class EpochLog:
    epoch: int
    train_loss: float               # running mean over the epoch's batches (dropout on)
    valid_loss: float | None
    best: bool
    seconds: float
    train_eval_loss: float | None = None   # dropout-free loss on the full training set

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def batches(examples, size, generator):
    order = torch.randperm(len(examples), generator=generator).tolist()
    for i in range(0, len(order), size):
        yield [examples[j] for j in order[i:i + size]]


def mean_loss(model, examples, cfg, copy_mode=None) -> float:
    """Per-sequence average NLL over ``examples`` in eval mode."""
    was = model.training
    model.eval()
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(examples), cfg.batch_size):
            chunk = examples[i:i + cfg.batch_size]
            total += float(model.loss(collate(chunk, cfg, model.vocab_size), copy_mode)) * len(chunk)
    model.train(was)
    return total / len(examples)


class Trainer:
    """Adam on the NLL objective; one optimizer step per mini-batch.

    With a validation set the best-validation weights are kept and training
    stops after ``patience`` epochs without improvement; without one, the best
    training-loss weights are kept and all epochs run unless ``target_loss`` is met.
    """

    def __init__(self, cfg: Config, vocab: Vocabulary, train_examples, valid_examples=None,
                 kinds: KindVocab | None = None, resume: Checkpoint | None = None,
                 dtype=torch.float32):
        if not train_examples:
            raise DataError("training set is empty")
        self.cfg, self.vocab = cfg, vocab
        self.kinds = kinds or KindVocab(capacity=cfg.max_kinds)
        self.train_examples = list(train_examples)
        self.valid_examples = list(valid_examples or [])
        torch.manual_seed(cfg.seed)
        self.generator = torch.Generator().manual_seed(cfg.seed)
        self.model = resume.model if resume else GypSum(cfg, len(vocab)).to(dtype)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=cfg.learning_rate)
        self.epoch = 0
        if resume:
            self.epoch = resume.epoch
            if resume.optimizer_state:
                # load_state_dict keeps references to the given tensors
                self.optimizer.load_state_dict(copy.deepcopy(resume.optimizer_state))
            if resume.rng_state:
                torch.set_rng_state(resume.rng_state["torch"])
                self.generator.set_state(resume.rng_state["shuffle"])
        self.best_score = float("inf")
        self.best_state = None

    def checkpoint(self, metrics=None) -> Checkpoint:
        return Checkpoint(self.cfg, self.vocab, self.kinds, self.model, self.epoch,
                          copy.deepcopy(self.optimizer.state_dict()),
                          {"torch": torch.get_rng_state(), "shuffle": self.generator.get_state()},
                          metrics or {})

    def step(self, chunk) -> float:
        self.model.train()
        self.optimizer.zero_grad()
        loss = self.model.loss(collate(chunk, self.cfg, self.model.vocab_size))
        loss.backward()
        if self.cfg.clip_norm > 0:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.clip_norm)
        self.optimizer.step()
        return float(loss.detach())

    def run_epoch(self) -> float:
        total = 0.0
        for chunk in batches(self.train_examples, self.cfg.batch_size, self.generator):
            total += self.step(chunk) * len(chunk)
        self.epoch += 1
        return total / len(self.train_examples)

    def fit(self, epochs=None, out_dir=None, target_loss=None, track_train_loss=False):
        """Generator of :class:`EpochLog`; best weights are restored when it finishes.

        ``target_loss`` stops training once the dropout-free training loss
        (computed every epoch when ``track_train_loss`` or ``target_loss`` is set)
        falls below it.
        """
        track = track_train_loss or target_loss is not None
        epochs = self.cfg.epochs if epochs is None else epochs
        out = Path(out_dir) if out_dir else None
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "metrics.jsonl").write_text("")
        stale = 0
        for _ in range(epochs):
            t0 = time.perf_counter()
            train_loss = self.run_epoch()
            valid_loss = mean_loss(self.model, self.valid_examples, self.cfg) if self.valid_examples else None
            eval_loss = mean_loss(self.model, self.train_examples, self.cfg) if track else None
            score = valid_loss if valid_loss is not None else (eval_loss if track else train_loss)
            improved = score < self.best_score
            if improved:
                self.best_score, stale = score, 0
                self.best_state = copy.deepcopy(self.model.state_dict())
            else:
                stale += 1
            entry = EpochLog(self.epoch, train_loss, valid_loss, improved, time.perf_counter() - t0,
                             eval_loss)
            if out:
                with open(out / "metrics.jsonl", "a") as fh:
                    fh.write(entry.to_json() + "\n")
                self.checkpoint(entry.__dict__).save(out / "last.pt")
                if improved:
                    self.checkpoint(entry.__dict__).save(out)
            yield entry
            if valid_loss is not None and stale >= self.cfg.patience:
                break
            if target_loss is not None and eval_loss < target_loss:
                break
        if self.best_state is not None:
            self.model.load_state_dict(self.best_state)
        self.model.eval()


def train(snippets, cfg: Config, vocab: Vocabulary, valid_snippets=None, out_dir=None,
          target_loss=None, dtype=torch.float32, graphs=None, track_train_loss=False):
    """Prepare raw snippets and train; yields a :class:`Checkpoint` after every epoch
    and a final one carrying the restored best weights.

    Snippets that fail to parse or build are skipped and counted under
    ``skipped`` in each checkpoint's metrics.
    """
    kinds = KindVocab(capacity=cfg.max_kinds)
    examples, skipped = prepare_corpus(snippets, vocab, kinds, cfg, grow_kinds=True,
                                       graphs=graphs)
    if not examples:
        raise DataError(f"no usable training records ({len(skipped)} skipped)")
    valid = []
    if valid_snippets:
        valid, vskip = prepare_corpus(valid_snippets, vocab, kinds, cfg, grow_kinds=True,
                                       graphs=graphs)
        skipped += vskip
    for sid, reason in skipped:
        log.info("skipped %s: %s", sid, reason)
    trainer = Trainer(cfg, vocab, examples, valid, kinds, dtype=dtype)
    for entry in trainer.fit(out_dir=out_dir, target_loss=target_loss,
                             track_train_loss=track_train_loss):
        yield trainer.checkpoint({**entry.__dict__, "skipped": len(skipped)})
    yield trainer.checkpoint({"final": True, "best_score": trainer.best_score,
                              "skipped": len(skipped)})
