"""Evaluation metrics: accuracy, MAP@R, subtoken P/R/F1, TF-IDF overlap.

MAP@R treats every embedding as a query against all others: with R =
(number of same-label items) - 1, AP@R = (1/R) * sum over the top R
ranked neighbours of rel_k * precision@k. Queries whose label has no
second member cannot be scored and are skipped but recorded.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import torch

from .errors import DegenerateCorpus, EmptyInput


def accuracy(predictions: Sequence[int], targets: Sequence[int]) -> float:
    """Fraction of positions where prediction equals target."""
    if len(predictions) != len(targets):
        raise ValueError(
            f"{len(predictions)} predictions against {len(targets)} targets"
        )
    if len(predictions) == 0:
        raise EmptyInput("accuracy of an empty prediction list is undefined")
    hits = sum(1 for p, t in zip(predictions, targets) if p == t)
    return hits / len(predictions)


@dataclass
class MapAtRResult:
    mean: float
    per_query: list[float | None]  # None at skipped queries
    skipped: list[int]


def _as_float64(embeddings) -> np.ndarray:
    if isinstance(embeddings, torch.Tensor):
        embeddings = embeddings.detach().cpu().numpy()
    return np.asarray(embeddings, dtype=np.float64)


def map_at_r(embeddings, labels: Sequence[int]) -> MapAtRResult:
    """Mean average precision at R under cosine similarity.

    Ranking is descending by cosine with ties broken by original index,
    so results are reproducible. Rows may be rescaled by any positive
    per-row constant without changing the outcome.
    """
    E = _as_float64(embeddings)
    if E.ndim != 2 or E.shape[0] != len(labels):
        raise ValueError(
            f"embeddings {E.shape} do not match {len(labels)} labels"
        )
    N = E.shape[0]
    if N == 0:
        raise EmptyInput("no embeddings to rank")
    labels = list(labels)
    counts = Counter(labels)

    norms = np.linalg.norm(E, axis=1, keepdims=True)
    normalized = E / np.clip(norms, 1e-12, None)
    sims = normalized @ normalized.T

    per_query: list[float | None] = []
    skipped: list[int] = []
    scores: list[float] = []
    for q in range(N):
        R = counts[labels[q]] - 1
        if R == 0:
            per_query.append(None)
            skipped.append(q)
            continue
        others = [j for j in range(N) if j != q]
        others.sort(key=lambda j: (-sims[q, j], j))
        hits = 0
        ap = 0.0
        for k, j in enumerate(others[:R], start=1):
            if labels[j] == labels[q]:
                hits += 1
                ap += hits / k
        score = ap / R
        per_query.append(score)
        scores.append(score)
    if not scores:
        raise EmptyInput("every label has a single member; MAP@R is undefined")
    return MapAtRResult(mean=sum(scores) / len(scores), per_query=per_query, skipped=skipped)


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def subtoken_prf(predicted: Sequence[str], target: Sequence[str]) -> PRF:
    """Multiset precision/recall/F1 over name subtokens."""
    overlap = sum((Counter(predicted) & Counter(target)).values())
    precision = overlap / len(predicted) if predicted else 0.0
    recall = overlap / len(target) if target else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return PRF(precision, recall, f1)


def corpus_subtoken_prf(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]]
) -> PRF:
    """Micro-averaged P/R/F1: counts are summed over the corpus first."""
    if not pairs:
        raise EmptyInput("no prediction/target pairs")
    overlap = pred_total = target_total = 0
    for predicted, target in pairs:
        overlap += sum((Counter(predicted) & Counter(target)).values())
        pred_total += len(predicted)
        target_total += len(target)
    precision = overlap / pred_total if pred_total else 0.0
    recall = overlap / target_total if target_total else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return PRF(precision, recall, f1)


class TfidfSimilarity(NamedTuple):
    mean: float
    matrix: np.ndarray  # rows and columns follow sorted(category names)


def category_tfidf_similarity(
    categories: Mapping[str, Sequence[Sequence[str]]]
) -> TfidfSimilarity:
    """Pairwise TF-IDF cosine between category documents.

    Each category's programs are concatenated into one document. tf is
    the raw term count; idf = ln(N / df) with N the number of categories
    and df the number of categories containing the term. The mean is
    over unordered pairs. Two categories whose tf-idf vectors are both
    zero count as similarity 1.0 when their raw counts agree (identical
    texts) and 0.0 otherwise.
    """
    names = sorted(categories)
    if len(names) < 2:
        raise DegenerateCorpus("need at least two categories to compare")
    docs: list[Counter[str]] = []
    for name in names:
        tokens: list[str] = []
        for program in categories[name]:
            tokens.extend(program)
        if not tokens:
            raise DegenerateCorpus(f"category {name!r} has no tokens")
        docs.append(Counter(tokens))

    N = len(docs)
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(doc.keys())
    terms = sorted(df)
    idf = {t: math.log(N / df[t]) for t in terms}

    vectors = np.zeros((N, len(terms)), dtype=np.float64)
    for i, doc in enumerate(docs):
        for j, t in enumerate(terms):
            vectors[i, j] = doc[t] * idf[t]

    matrix = np.eye(N, dtype=np.float64)
    total = 0.0
    pairs = 0
    for i in range(N):
        for j in range(i + 1, N):
            ni = np.linalg.norm(vectors[i])
            nj = np.linalg.norm(vectors[j])
            if ni == 0.0 and nj == 0.0:
                sim = 1.0 if docs[i] == docs[j] else 0.0
            elif ni == 0.0 or nj == 0.0:
                sim = 0.0
            else:
                sim = float(vectors[i] @ vectors[j] / (ni * nj))
            matrix[i, j] = matrix[j, i] = sim
            total += sim
            pairs += 1
    return TfidfSimilarity(mean=total / pairs, matrix=matrix)
