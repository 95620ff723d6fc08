"""Estimator wrappers with the scikit-learn fit/predict/get_params API.

These are the high-level entry points: they own parsing, vocabulary
construction, batching, and checkpointing, and delegate optimization to
training.fit. X is always an iterable of source-code strings; estimator
state lives in trailing-underscore attributes after fit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .config import HiTConfig, TrainSchedule
from .encoding import (
    Batch,
    Vocabulary,
    build_vocab,
    encode_and_pad,
    encode_generation_targets,
    subtokenize_name,
)
from .errors import UnloadedModel
from .model import HiTClassifierModel
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .pointer import HiTGeneratorModel, generation_loss, join_camel_case
from .syntax import (
    NodeTypeVocabulary,
    TokenizedProgram,
    extract_token_paths,
    parse_to_cst,
    project_hierarchy,
)
from .syntax.paths import digest_source
from .training import classification_loss, fit, seed_everything


def validate_sources(X) -> list:
    """Materialize X as a non-empty list of sources or tokenized programs."""
    sources = list(X)
    if not sources:
        raise ValueError("X must hold at least one program")
    for i, item in enumerate(sources):
        if not isinstance(item, (str, TokenizedProgram)):
            raise ValueError(
                f"X[{i}] is {type(item).__name__}; expected source strings "
                "or tokenized programs"
            )
    return sources


def tokenize_strict(code: str, language: str, max_path_depth: int = 32) -> TokenizedProgram:
    """Tokenize one source, treating syntax errors as hard failures."""
    tree = parse_to_cst(code, language)
    if tree.type == "ERROR":
        raise ValueError("source does not parse")
    return extract_token_paths(
        tree, language, max_path_depth=max_path_depth,
        source_digest=digest_source(code),
    )


def parse_sources(
    sources: Sequence, language: str, mode: str, max_path_depth: int = 32
) -> list[TokenizedProgram]:
    """Parse sources into mode-projected programs.

    Items may be raw strings or already-tokenized programs (the latter
    skip parsing and are only projected). Estimator inputs must parse,
    so failures raise.
    """
    programs = []
    for i, item in enumerate(sources):
        if isinstance(item, TokenizedProgram):
            programs.append(project_hierarchy(item, mode))
            continue
        try:
            program = tokenize_strict(item, language, max_path_depth)
        except Exception as err:
            raise ValueError(f"X[{i}] failed to parse: {err}") from err
        programs.append(project_hierarchy(program, mode))
    return programs


def ensure_fitted(estimator, attribute: str = "model_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise UnloadedModel(
            f"{type(estimator).__name__} is not fitted; call fit() or load()"
        )


def _chunk(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


class HierarchyExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer from source strings to token/path programs."""

    def __init__(self, language: str = "python", mode: str = "full",
                 max_path_depth: int = 32):
        self.language = language
        self.mode = mode
        self.max_path_depth = max_path_depth

    def fit(self, X, y=None):
        validate_sources(X)
        return self

    def transform(self, X) -> list[TokenizedProgram]:
        return parse_sources(
            validate_sources(X), self.language, self.mode, self.max_path_depth
        )


class HiTClassifier(BaseEstimator, ClassifierMixin):
    """Program classifier; embed() exposes retrieval embeddings."""

    def __init__(
        self,
        language: str = "python",
        hierarchy_mode: str = "full",
        token_dim: int = 64,
        hier_dim: int = 32,
        seq_model_dim: int = 64,
        heads: int = 4,
        hier_layers: int = 2,
        seq_layers: int = 2,
        ff_factor: int = 2,
        max_len: int = 128,
        max_path_depth: int = 32,
        dropout: float = 0.1,
        vocab_size: int = 8000,
        lr: float = 1e-4,
        weight_decay: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        batch_size: int = 32,
        epochs: int = 10,
        patience: int = 5,
        clip_norm: float = 5.0,
        seed: int = 0,
    ):
        self.language = language
        self.hierarchy_mode = hierarchy_mode
        self.token_dim = token_dim
        self.hier_dim = hier_dim
        self.seq_model_dim = seq_model_dim
        self.heads = heads
        self.hier_layers = hier_layers
        self.seq_layers = seq_layers
        self.ff_factor = ff_factor
        self.max_len = max_len
        self.max_path_depth = max_path_depth
        self.dropout = dropout
        self.vocab_size = vocab_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.clip_norm = clip_norm
        self.seed = seed

        self.model_: HiTClassifierModel | None = None

    def _schedule(self) -> TrainSchedule:
        return TrainSchedule(
            lr=self.lr, weight_decay=self.weight_decay,
            beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            clip_norm=self.clip_norm, batch_size=self.batch_size,
            epochs=self.epochs, patience=self.patience, seed=self.seed,
        )

    def _make_batches(self, programs, labels=None) -> list[Batch]:
        batches = []
        pairs = list(zip(programs, labels)) if labels is not None else [
            (p, None) for p in programs
        ]
        for chunk in _chunk(pairs, self.batch_size):
            progs = [p for p, _ in chunk]
            batch = encode_and_pad(
                progs, self.vocab_, self.node_vocab_,
                self.config_.max_len, self.config_.max_path_depth,
            )
            if labels is not None:
                batch.targets = torch.tensor([l for _, l in chunk], dtype=torch.long)
            batches.append(batch)
        return batches

    def fit(self, X, y, X_valid=None, y_valid=None, report_path=None):
        sources = validate_sources(X)
        y = list(y)
        if len(y) != len(sources):
            raise ValueError(f"{len(sources)} programs but {len(y)} labels")
        seed_everything(self.seed)

        self.classes_ = np.asarray(sorted(set(y)))
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        index = {value: i for i, value in enumerate(self.classes_.tolist())}
        train_labels = [index[value] for value in y]

        programs = parse_sources(
            sources, self.language, self.hierarchy_mode, self.max_path_depth
        )
        self.vocab_ = build_vocab(programs, self.vocab_size)
        self.node_vocab_ = NodeTypeVocabulary.from_programs(programs)
        self.config_ = HiTConfig(
            token_dim=self.token_dim, hier_dim=self.hier_dim,
            seq_model_dim=self.seq_model_dim, heads=self.heads,
            hier_layers=self.hier_layers, seq_layers=self.seq_layers,
            dec_layers=1, ff_factor=self.ff_factor, max_len=self.max_len,
            max_path_depth=self.max_path_depth,
            hierarchy_mode=self.hierarchy_mode, dropout=self.dropout,
            num_categories=len(self.classes_), vocab_size=self.vocab_.size,
            target_vocab_size=4,
            node_vocab_size=len(self.node_vocab_.to_list()),
        )
        self.model_ = HiTClassifierModel(self.config_)

        train_batches = self._make_batches(programs, train_labels)
        if X_valid is not None:
            valid_sources = validate_sources(X_valid)
            valid_labels = [index[value] for value in y_valid]
            valid_programs = parse_sources(
                valid_sources, self.language, self.hierarchy_mode,
                self.max_path_depth,
            )
            eval_batches = self._make_batches(valid_programs, valid_labels)
        else:
            eval_batches = train_batches

        def loss_fn(model, batch):
            return classification_loss(model(batch), batch.targets)

        def metric_fn(model):
            hits = total = 0
            for batch in eval_batches:
                pred = model(batch).argmax(dim=-1)
                hits += int((pred == batch.targets).sum())
                total += len(batch)
            return hits / total

        self.result_ = fit(
            self.model_, train_batches, loss_fn, metric_fn, self._schedule(),
            higher_is_better=True, report_path=report_path,
        )
        self.model_.eval()
        return self

    def _forward(self, X) -> torch.Tensor:
        ensure_fitted(self)
        sources = validate_sources(X)
        programs = parse_sources(
            sources, self.language, self.hierarchy_mode, self.max_path_depth
        )
        outputs = []
        with torch.no_grad():
            for batch in self._make_batches(programs):
                outputs.append(self.model_(batch))
        return torch.cat(outputs, dim=0)

    def predict_proba(self, X) -> np.ndarray:
        return self._forward(X).numpy()

    def predict(self, X) -> np.ndarray:
        indices = self._forward(X).argmax(dim=-1).numpy()
        return self.classes_[indices]

    def embed(self, X) -> np.ndarray:
        """Unit-norm pooled program embeddings for retrieval."""
        ensure_fitted(self)
        sources = validate_sources(X)
        programs = parse_sources(
            sources, self.language, self.hierarchy_mode, self.max_path_depth
        )
        outputs = []
        with torch.no_grad():
            for batch in self._make_batches(programs):
                outputs.append(self.model_.embed_for_retrieval(batch))
        return torch.cat(outputs, dim=0).numpy()

    def transform(self, X) -> np.ndarray:
        return self.embed(X)

    def score(self, X, y) -> float:
        predictions = self.predict(X)
        y = np.asarray(list(y))
        return float((predictions == y).mean())

    def save(self, path: str | Path, task: str = "classify") -> None:
        ensure_fitted(self)
        save_checkpoint(
            path, self.config_.to_dict(), dict(self.model_.state_dict()),
            extra={
                "task": task,
                "vocab": self.vocab_.to_list(),
                "node_vocab": self.node_vocab_.to_list(),
                "classes": self.classes_.tolist(),
                "language": self.language,
            },
        )

    @classmethod
    def load(cls, path: str | Path) -> "HiTClassifier":
        config_dict, state, extra = load_checkpoint(path)
        config = HiTConfig.from_dict(config_dict)
        est = cls(
            language=extra.get("language", "python"),
            hierarchy_mode=config.hierarchy_mode,
            token_dim=config.token_dim, hier_dim=config.hier_dim,
            seq_model_dim=config.seq_model_dim, heads=config.heads,
            hier_layers=config.hier_layers, seq_layers=config.seq_layers,
            ff_factor=config.ff_factor, max_len=config.max_len,
            max_path_depth=config.max_path_depth, dropout=config.dropout,
            vocab_size=config.vocab_size,
        )
        est.config_ = config
        est.vocab_ = Vocabulary.from_list(extra["vocab"])
        est.node_vocab_ = NodeTypeVocabulary.from_list(extra["node_vocab"])
        est.classes_ = np.asarray(extra["classes"])
        est.task_ = extra.get("task", "classify")
        est.model_ = HiTClassifierModel(config)
        est.model_.load_state_dict(state)
        est.model_.eval()
        return est


class HiTNameGenerator(BaseEstimator):
    """Method-name generator with the pointer/copy decoder."""

    def __init__(
        self,
        language: str = "python",
        hierarchy_mode: str = "full",
        token_dim: int = 64,
        hier_dim: int = 32,
        seq_model_dim: int = 64,
        heads: int = 4,
        hier_layers: int = 2,
        seq_layers: int = 2,
        dec_layers: int = 2,
        ff_factor: int = 2,
        max_len: int = 128,
        max_path_depth: int = 32,
        dropout: float = 0.1,
        vocab_size: int = 8000,
        target_vocab_size: int = 8000,
        max_name_steps: int = 8,
        beam: int = 1,
        lr: float = 1e-4,
        weight_decay: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        batch_size: int = 32,
        epochs: int = 10,
        patience: int = 5,
        clip_norm: float = 5.0,
        seed: int = 0,
    ):
        self.language = language
        self.hierarchy_mode = hierarchy_mode
        self.token_dim = token_dim
        self.hier_dim = hier_dim
        self.seq_model_dim = seq_model_dim
        self.heads = heads
        self.hier_layers = hier_layers
        self.seq_layers = seq_layers
        self.dec_layers = dec_layers
        self.ff_factor = ff_factor
        self.max_len = max_len
        self.max_path_depth = max_path_depth
        self.dropout = dropout
        self.vocab_size = vocab_size
        self.target_vocab_size = target_vocab_size
        self.max_name_steps = max_name_steps
        self.beam = beam
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.clip_norm = clip_norm
        self.seed = seed

        self.model_: HiTGeneratorModel | None = None

    def _schedule(self) -> TrainSchedule:
        return TrainSchedule(
            lr=self.lr, weight_decay=self.weight_decay,
            beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            clip_norm=self.clip_norm, batch_size=self.batch_size,
            epochs=self.epochs, patience=self.patience, seed=self.seed,
        )

    def _make_batches(self, programs, names=None):
        """(batch, decoder_in, target_out) triples; names may be None."""
        out = []
        items = list(zip(programs, names)) if names is not None else [
            (p, None) for p in programs
        ]
        for chunk in _chunk(items, self.batch_size):
            progs = [p for p, _ in chunk]
            batch = encode_and_pad(
                progs, self.vocab_, self.node_vocab_,
                self.config_.max_len, self.config_.max_path_depth,
                copy_vocab=self.target_vocab_,
            )
            if names is not None:
                decoder_in, target_out = encode_generation_targets(
                    batch, [n for _, n in chunk], self.target_vocab_
                )
                out.append((batch, decoder_in, target_out))
            else:
                out.append((batch, None, None))
        return out

    def fit(self, X, y, X_valid=None, y_valid=None, report_path=None):
        sources = validate_sources(X)
        names = list(y)
        if len(names) != len(sources):
            raise ValueError(f"{len(sources)} programs but {len(names)} names")
        for i, name in enumerate(names):
            if not isinstance(name, str) or not name:
                raise ValueError(f"y[{i}] must be a non-empty name string")
        seed_everything(self.seed)

        programs = parse_sources(
            sources, self.language, self.hierarchy_mode, self.max_path_depth
        )
        self.vocab_ = build_vocab(programs, self.vocab_size)
        self.target_vocab_ = Vocabulary.build(
            [subtokenize_name(n) for n in names], self.target_vocab_size
        )
        self.node_vocab_ = NodeTypeVocabulary.from_programs(programs)
        self.config_ = HiTConfig(
            token_dim=self.token_dim, hier_dim=self.hier_dim,
            seq_model_dim=self.seq_model_dim, heads=self.heads,
            hier_layers=self.hier_layers, seq_layers=self.seq_layers,
            dec_layers=self.dec_layers, ff_factor=self.ff_factor,
            max_len=self.max_len, max_path_depth=self.max_path_depth,
            hierarchy_mode=self.hierarchy_mode, dropout=self.dropout,
            num_categories=2, vocab_size=self.vocab_.size,
            target_vocab_size=self.target_vocab_.size,
            node_vocab_size=len(self.node_vocab_.to_list()),
        )
        self.model_ = HiTGeneratorModel(self.config_)
        self.model_.bind_target_vocab(self.target_vocab_)

        train_batches = self._make_batches(programs, names)
        if X_valid is not None:
            valid_programs = parse_sources(
                validate_sources(X_valid), self.language, self.hierarchy_mode,
                self.max_path_depth,
            )
            eval_batches = self._make_batches(valid_programs, list(y_valid))
        else:
            eval_batches = train_batches

        def loss_fn(model, item):
            batch, decoder_in, target_out = item
            return generation_loss(model(batch, decoder_in), target_out)

        def metric_fn(model):
            total = 0.0
            with torch.no_grad():
                for item in eval_batches:
                    total += float(loss_fn(model, item))
            return total / len(eval_batches)

        self.result_ = fit(
            self.model_, train_batches, loss_fn, metric_fn, self._schedule(),
            higher_is_better=False, report_path=report_path,
        )
        self.model_.eval()
        return self

    def predict_subtokens(self, X) -> list[list[str]]:
        ensure_fitted(self)
        sources = validate_sources(X)
        programs = parse_sources(
            sources, self.language, self.hierarchy_mode, self.max_path_depth
        )
        outputs: list[list[str]] = []
        for batch, _, _ in self._make_batches(programs):
            outputs.extend(
                self.model_.decode(batch, max_steps=self.max_name_steps, beam=self.beam)
            )
        return outputs

    def predict(self, X) -> list[str]:
        return [join_camel_case(subs) for subs in self.predict_subtokens(X)]

    def save(self, path: str | Path) -> None:
        ensure_fitted(self)
        save_checkpoint(
            path, self.config_.to_dict(), dict(self.model_.state_dict()),
            extra={
                "task": "namegen",
                "vocab": self.vocab_.to_list(),
                "node_vocab": self.node_vocab_.to_list(),
                "target_vocab": self.target_vocab_.to_list(),
                "language": self.language,
            },
        )

    @classmethod
    def load(cls, path: str | Path) -> "HiTNameGenerator":
        config_dict, state, extra = load_checkpoint(path)
        config = HiTConfig.from_dict(config_dict)
        est = cls(
            language=extra.get("language", "python"),
            hierarchy_mode=config.hierarchy_mode,
            token_dim=config.token_dim, hier_dim=config.hier_dim,
            seq_model_dim=config.seq_model_dim, heads=config.heads,
            hier_layers=config.hier_layers, seq_layers=config.seq_layers,
            dec_layers=config.dec_layers, ff_factor=config.ff_factor,
            max_len=config.max_len, max_path_depth=config.max_path_depth,
            dropout=config.dropout, vocab_size=config.vocab_size,
            target_vocab_size=config.target_vocab_size,
        )
        est.config_ = config
        est.vocab_ = Vocabulary.from_list(extra["vocab"])
        est.node_vocab_ = NodeTypeVocabulary.from_list(extra["node_vocab"])
        est.target_vocab_ = Vocabulary.from_list(extra["target_vocab"])
        est.task_ = extra.get("task", "namegen")
        est.model_ = HiTGeneratorModel(config)
        est.model_.load_state_dict(state)
        est.model_.bind_target_vocab(est.target_vocab_)
        est.model_.eval()
        return est


class VariableScopeProbe(BaseEstimator):
    """Estimator face of the scope probe; fit() trains W_s and reports."""

    def __init__(
        self,
        checkpoint: str | Path | None = None,
        mode: str = "full",
        pairs_per_program: int = 8,
        seed: int = 0,
        epochs: int = 200,
        lr: float = 1e-2,
        language: str = "python",
    ):
        self.checkpoint = checkpoint
        self.mode = mode
        self.pairs_per_program = pairs_per_program
        self.seed = seed
        self.epochs = epochs
        self.lr = lr
        self.language = language

        self.report_: dict | None = None

    def fit(self, X, y=None):
        from .scope import run_probe

        if self.checkpoint is None:
            raise ValueError("VariableScopeProbe needs a classifier checkpoint path")
        sources = validate_sources(X)
        programs = []
        for i, code in enumerate(sources):
            try:
                programs.append(tokenize_strict(code, self.language))
            except Exception as err:
                raise ValueError(f"X[{i}] failed to parse: {err}") from err
        self.report_ = run_probe(
            self.checkpoint, programs, mode=self.mode,
            pairs_per_program=self.pairs_per_program, seed=self.seed,
            epochs=self.epochs, lr=self.lr,
        )
        return self

    def score(self, X=None, y=None) -> float:
        ensure_fitted(self, "report_")
        return self.report_["accuracy"]
